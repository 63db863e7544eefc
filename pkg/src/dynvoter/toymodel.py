"""Idealised tree models with closed-form oracles.

``chain_run`` simulates the killed distance chain directly: from i >= 1
it moves up at rate 2(d-1)/d, down at rate 2/d and dies at rate nu*i;
from 0 it moves up at rate 2.  Its hitting probability of 0 is q(ell)
and the expected local time at 0 is R(0) = 1/(2*theta), both available
in closed form from :mod:`dynvoter.theta`.

``two_phase_sample`` simulates the alternating merge/approach renewal
process of two height-hbar trees: a merge arrives at the total rate
``gamma_pairs`` of component-joining stub pairs, leaves the walks at
distance ell drawn with weight ell*(d-1)^ell on {1, ..., 2*hbar - 1},
and the killed chain from ell either reaches 0 (the walks meet; the run
ends) or dies (the trees are torn apart; a new round starts).  Running
the chain unconditioned makes its outcome the success Bernoulli(q(ell))
and the phase-two duration in one stroke.  The accumulated first-phase
time is exactly Exp(gamma_n) with gamma_n the thinned rate returned by
:func:`dynvoter.theta.gamma_rate`, which converges to 2*theta/n.
"""

from __future__ import annotations

import numpy as np

from . import _kernels, rng
from .errors import DegenerateHeightError, ParameterError
from .theta import ModelConst, toy_height


def chain_run(
    i0: int, d: int, nu: float, stream: rng.Stream
) -> tuple[str, float, float]:
    """One run of the killed distance chain.

    Started at i0 >= 1 the run ends on hitting 0 (``'hit0'``) or on
    killing (``'dagger'``); started at 0 it accumulates local time at 0
    over excursions until killed.  Returns (outcome, elapsed, local0).
    """
    if i0 < 0:
        raise ParameterError(f"i0 must be >= 0, got {i0!r}")
    if d < 3:
        raise ParameterError(f"d must be >= 3, got {d!r}")
    if not nu > 0:
        raise ParameterError("chain_run requires nu > 0 (absorption is not a.s. otherwise)")
    code, elapsed, local0 = _kernels.chain_run_kernel(i0, d, float(nu), stream.state)
    return ("hit0" if code == 0 else "dagger"), float(elapsed), float(local0)


def mc_R0(d: int, nu: float, reps: int, seed: int, threads: int = 1):
    """Monte Carlo estimate of the expected local time at 0: (mean, SE)."""
    from .runner import run_replicas

    if reps < 1:
        raise ParameterError(f"reps must be >= 1, got {reps!r}")

    def worker(replica: int, stream: rng.Stream) -> float:
        _, _, local0 = chain_run(0, d, nu, stream)
        return local0

    samples = np.asarray(run_replicas(worker, reps, seed, threads))
    mean = float(samples.mean())
    se = float(samples.std(ddof=1) / np.sqrt(reps)) if reps > 1 else float("inf")
    return mean, se


def mc_q(d: int, nu: float, ell: int, reps: int, seed: int, threads: int = 1):
    """Monte Carlo estimate of the hitting probability q(ell): (phat, SE)."""
    from .runner import run_replicas

    if ell < 1:
        raise ParameterError(f"ell must be >= 1, got {ell!r}")

    def worker(replica: int, stream: rng.Stream) -> float:
        outcome, _, _ = chain_run(ell, d, nu, stream)
        return 1.0 if outcome == "hit0" else 0.0

    samples = np.asarray(run_replicas(worker, reps, seed, threads))
    phat = float(samples.mean())
    se = float(np.sqrt(max(phat * (1.0 - phat), 1.0 / reps) / reps))
    return phat, se


def distance_weights(d: int, hbar: int) -> np.ndarray:
    """Unnormalised merge-distance weights ell*(d-1)^ell, ell = 1..2*hbar-1."""
    if hbar < 1:
        raise DegenerateHeightError(f"hbar must be >= 1, got {hbar!r}")
    ells = np.arange(1, 2 * hbar, dtype=np.float64)
    return ells * (d - 1.0) ** ells


def pair_rate(consts: ModelConst, n: int, hbar: int) -> float:
    """Total unthinned rate of component-joining stub pairs.

    There are d^2/(d-1) * ell*(d-1)^ell (ordered-orientation-doubled)
    pairs at distance ell, each ticking at rate nu/(dn-1).
    """
    weights = distance_weights(consts.d, hbar)
    return (
        consts.nu / (consts.d * n - 1.0) * consts.d**2 / (consts.d - 1.0) * weights.sum()
    )


class TwoPhaseSample:
    """Durations of one merge/approach run: totals per phase and rounds."""

    __slots__ = ("tau_first_total", "tau_second_total", "tau_final", "rounds")

    def __init__(self, tau_first_total: float, tau_second_total: float, rounds: int):
        self.tau_first_total = tau_first_total
        self.tau_second_total = tau_second_total
        self.tau_final = tau_first_total + tau_second_total
        self.rounds = rounds


def two_phase_sample(
    d: int,
    nu: float,
    n: int,
    stream: rng.Stream,
    delta: float = 0.02,
    hbar: int | None = None,
) -> TwoPhaseSample:
    """One run of the two-phase renewal process.

    ``hbar`` defaults to floor(delta*log_d n) and errors out when that
    floor is below 1; pass it explicitly to choose the tree height
    directly (for the moderate n used in experiments the floor route is
    always degenerate, see gamma_rate).
    """
    if d < 3:
        raise ParameterError(f"d must be >= 3, got {d!r}")
    if not nu > 0:
        raise ParameterError("the two-phase model requires nu > 0")
    if hbar is None:
        hbar = toy_height(n, d, delta)
    elif hbar < 1:
        raise DegenerateHeightError(f"hbar must be >= 1, got {hbar!r}")
    consts = ModelConst(d=d, nu=float(nu), beta=np.sqrt(d - 1.0), rho=2.0 * np.sqrt(d - 1.0) / d)
    gamma_pairs = pair_rate(consts, n, hbar)
    cumw = np.cumsum(distance_weights(d, hbar))
    tau1, tau2, rounds = _kernels.two_phase_run(
        d, float(nu), gamma_pairs, cumw, stream.state
    )
    return TwoPhaseSample(float(tau1), float(tau2), int(rounds))


def two_phase_experiment(
    d: int,
    nu: float,
    n: int,
    reps: int,
    seed: int,
    delta: float = 0.02,
    hbar: int | None = None,
    threads: int = 1,
) -> list[TwoPhaseSample]:
    """Independent replicas of :func:`two_phase_sample`."""
    from .runner import run_replicas

    if hbar is None:
        hbar = toy_height(n, d, delta)  # fail fast before fan-out

    def worker(replica: int, stream: rng.Stream) -> TwoPhaseSample:
        return two_phase_sample(d, nu, n, stream, hbar=hbar)

    return run_replicas(worker, reps, seed, threads)
