"""Estimators and gates tying the simulators to the closed forms."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .simulate import simulate_two_walks
from .theta import make_consts, theta


def ks_statistic(samples, reference_cdf) -> float:
    """Sup distance between the sample ECDF and a reference CDF.

    ``reference_cdf`` must accept a numpy array.  The lower deviations are
    evaluated just below each sample point, so a reference with an atom
    exactly on a sample value is handled correctly (all-samples-at-a-
    point-mass gives 0, not 1).
    """
    x = np.sort(np.asarray(samples, dtype=np.float64))
    m = x.size
    if m == 0:
        raise ParameterError("ks_statistic needs at least one sample")
    f_hi = np.asarray(reference_cdf(x), dtype=np.float64)
    f_lo = np.asarray(reference_cdf(np.nextafter(x, -np.inf)), dtype=np.float64)
    i = np.arange(1, m + 1)
    d_plus = np.max(i / m - f_hi)
    d_minus = np.max(f_lo - (i - 1) / m)
    return float(max(d_plus, d_minus, 0.0))


def ks_exponential(samples, rate: float) -> float:
    """KS distance of the samples against Exp(rate)."""
    if rate <= 0:
        raise ParameterError(f"rate must be positive, got {rate!r}")
    return ks_statistic(samples, lambda x: -np.expm1(-rate * np.maximum(x, 0.0)))


def exp_rate_fit(samples, censored=None):
    """Maximum-likelihood exponential rate with a 95% CI: (rate, (lo, hi)).

    The MLE is 1/mean; its relative standard error is 1/sqrt(m), and the
    CI is the plain normal approximation rate*(1 -+ 1.96/sqrt(m)).
    Censored observations are not supported: passing any raises.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise ParameterError("exp_rate_fit needs at least one sample")
    if censored is not None and np.any(np.asarray(censored, dtype=bool)):
        raise ParameterError(
            "exp_rate_fit does not handle censored samples; exclude them first"
        )
    if np.any(x <= 0) or not np.all(np.isfinite(x)):
        raise ParameterError("samples must be positive and finite")
    rate = 1.0 / float(x.mean())
    half = 1.96 / math.sqrt(x.size)
    return rate, (rate * (1.0 - half), rate * (1.0 + half))


@dataclass
class SurvivalCurve:
    grid: np.ndarray
    empirical: np.ndarray
    reference: np.ndarray
    sup_gap: float


def survival_curve(samples, rate: float, grid: np.ndarray | None = None) -> SurvivalCurve:
    """Empirical survival of the samples against exp(-rate*s) on a grid."""
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise ParameterError("survival_curve needs at least one sample")
    if grid is None:
        grid = np.linspace(0.0, float(x.max()), 256)
    grid = np.asarray(grid, dtype=np.float64)
    emp = 1.0 - np.searchsorted(np.sort(x), grid, side="right") / x.size
    ref = np.exp(-rate * grid)
    return SurvivalCurve(
        grid=grid, empirical=emp, reference=ref, sup_gap=float(np.max(np.abs(emp - ref)))
    )


def homogenisation_functional(trace, theta_value: float, n: int, T: float) -> float:
    """Time-change functional comparing discordance mass with O(1-O) mass.

    With alpha = n/(2*theta), returns

        (alpha/n) * int_0^T D_{alpha s} ds - int_0^T O_{alpha s}(1-O_{alpha s}) ds
        = int_d(alpha*T)/n - int_oo(alpha*T)/alpha,

    read off the trace's exact running integrals.  The trace grid must
    contain the time alpha*T.
    """
    if not (T > 0 and n > 0 and theta_value > 0):
        raise ParameterError("need T > 0, n > 0, theta > 0")
    alpha = n / (2.0 * theta_value)
    target = alpha * T
    if trace.times[-1] < target * (1.0 - 1e-12):
        raise ParameterError(
            f"trace horizon {trace.times[-1]} is shorter than alpha*T = {target}"
        )
    k = int(np.argmin(np.abs(trace.times - target)))
    if abs(trace.times[k] - target) > 1e-9 * max(1.0, target):
        raise ParameterError(
            f"trace grid has no point at alpha*T = {target}; nearest is {trace.times[k]}"
        )
    return float(trace.int_d[k] / n - trace.int_oo[k] / alpha)


@dataclass
class HomogenisationReport:
    n: int
    T: float
    theta: float
    values: np.ndarray  # functional value per replica
    mean: float
    se: float


def homogenisation_experiment(
    n: int,
    d: int,
    nu: float,
    u: float,
    T: float,
    reps: int,
    seed: int,
    threads: int = 1,
) -> HomogenisationReport:
    """Replicated homogenisation functional at horizon alpha_n * T."""
    from .runner import run_replicas
    from .simulate import simulate_voter

    th = theta(make_consts(d, nu))
    alpha = n / (2.0 * th)
    horizon = alpha * T

    def worker(replica: int, stream) -> float:
        trace = simulate_voter(n, d, nu, u, horizon, horizon, stream)
        return homogenisation_functional(trace, th, n, T)

    values = np.asarray(run_replicas(worker, reps, seed, threads))
    return HomogenisationReport(
        n=n,
        T=T,
        theta=th,
        values=values,
        mean=float(values.mean()),
        se=float(values.std(ddof=1) / math.sqrt(reps)) if reps > 1 else float("inf"),
    )


def validate_intermediate_window(n: int, s_n: float) -> None:
    """Enforce the intermediate-scale window: s_n in [n^0.3, n^0.7] or 0."""
    if s_n != 0.0 and not (n**0.3 <= s_n <= n**0.7):
        raise ParameterError(
            f"s_n must be 0 or lie in [n^0.3, n^0.7] = "
            f"[{n**0.3:.3g}, {n**0.7:.3g}], got {s_n!r}"
        )


def edge_tail_estimate(
    n: int,
    d: int,
    nu: float,
    s_n: float,
    reps: int,
    seed: int,
    threads: int = 1,
):
    """Fraction of edge-started meeting runs with tau > s_n: (phat, SE).

    The intermediate-window requirement 1 << s_n << n is enforced as
    s_n in [n^0.3, n^0.7]; s_n = 0 is additionally allowed as the
    degenerate diagnostic (tau > 0 fails only for self-loop starts).
    """
    from .runner import run_replicas

    validate_intermediate_window(n, s_n)
    cap = s_n if s_n > 0 else 1e-9

    def worker(replica: int, stream) -> float:
        res = simulate_two_walks(n, d, nu, "edge", stream, t_cap=cap)
        return 1.0 if (res.censored or res.tau > s_n) else 0.0

    flags = np.asarray(run_replicas(worker, reps, seed, threads))
    phat = float(flags.mean())
    se = math.sqrt(max(phat * (1.0 - phat), 1.0 / reps) / reps)
    return phat, se
