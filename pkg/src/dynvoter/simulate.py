"""Joint Markov processes on the rewiring graph.

Three simulators share the graphical-construction randomness layout:

* ``simulate_two_walks`` -- two independent rate-1 walks on one evolving
  graph, run to their meeting time (or a censoring cap);
* ``simulate_voter`` -- the voter model interleaved with rewiring,
  sampled on a time grid together with exact running integrals;
* ``simulate_with_log`` -- records every walk-clock and rewiring-clock
  arrival so that the forward voter configuration and backward
  coalescing walks can be replayed from one source of randomness; their
  pointwise agreement (``duality_check``) is an exact identity.

Walk clocks live on stubs at rate 1/d (aggregate rate n), so a walk-clock
arrival is a uniform stub; the entry records the partner *vertex* of that
stub at the arrival time, which is all both replays need.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, rng
from .errors import ParameterError
from .graph import GraphState, apply_rewire, sample_matching
from .theta import make_consts, theta

CAP_FACTOR = 20.0  # default meeting-time cap: 20 * n/(2*theta)


@dataclass(frozen=True)
class MeetingResult:
    tau: float
    censored: bool
    start_mode: str


@dataclass
class VoterTrace:
    """Grid samples of the voter run plus exact running integrals.

    ``int_d[k]`` and ``int_oo[k]`` hold the exact values of
    int_0^{t_k} D_s ds and int_0^{t_k} O_s(1-O_s) ds (the integrands are
    piecewise constant between events, so these are not quadratures).
    ``consensus_time`` is None when consensus was not reached before the
    horizon; after consensus O is constant and D identically 0.
    """

    n: int
    d: int
    nu: float
    times: np.ndarray
    opinion_density: np.ndarray
    discordance: np.ndarray
    int_d: np.ndarray
    int_oo: np.ndarray
    consensus_time: float | None


def _resolve_start(start, graph: GraphState, stream: rng.Stream):
    if start == "stationary-pair":
        return stream.randbelow(graph.n), stream.randbelow(graph.n)
    if start == "edge":
        s = stream.randbelow(graph.stub_count)
        return s // graph.d, int(graph.match[s]) // graph.d
    if isinstance(start, tuple) and len(start) == 2:
        x, y = int(start[0]), int(start[1])
        if not (0 <= x < graph.n and 0 <= y < graph.n):
            raise ParameterError(f"start vertices must lie in [0, {graph.n})")
        return x, y
    raise ParameterError(
        f"start must be 'stationary-pair', 'edge' or an (x, y) pair, got {start!r}"
    )


def default_t_cap(n: int, d: int, nu: float) -> float:
    return CAP_FACTOR * n / (2.0 * theta(make_consts(d, nu)))


def simulate_two_walks(
    n: int,
    d: int,
    nu: float,
    start,
    stream: rng.Stream,
    t_cap: float | None = None,
    graph: GraphState | None = None,
) -> MeetingResult:
    """Run two walks to their first coincidence; censor at t_cap.

    ``start`` is ``'stationary-pair'`` (independent uniform vertices,
    coincidence allowed and reported as tau = 0), ``'edge'`` (endpoints
    of a uniform edge; a self-loop start also gives tau = 0) or an
    explicit vertex pair.  ``graph`` overrides the initial uniform
    matching, e.g. for fixed small test graphs.
    """
    if nu < 0:
        raise ParameterError(f"nu must be >= 0, got {nu!r}")
    if t_cap is None:
        t_cap = default_t_cap(n, d, nu)
    if not t_cap > 0:
        raise ParameterError(f"t_cap must be positive, got {t_cap!r}")
    g = graph.copy() if graph is not None else sample_matching(n, d, stream)
    mode = start if isinstance(start, str) else "explicit"
    x, y = _resolve_start(start, g, stream)
    tau, met = _kernels.two_walks(g.match, d, float(nu), x, y, float(t_cap), stream.state)
    return MeetingResult(tau=float(tau), censored=not met, start_mode=mode)


def make_grid(horizon: float, grid_step: float) -> np.ndarray:
    """Sampling times 0, step, 2*step, ..., always ending exactly at horizon."""
    if not (horizon > 0 and grid_step > 0):
        raise ParameterError("horizon and grid_step must be positive")
    k = int(math.floor(horizon / grid_step + 1e-9))
    times = np.arange(k + 1, dtype=np.float64) * grid_step
    if times[-1] > horizon:
        times[-1] = horizon
    elif horizon - times[-1] > 1e-9 * max(1.0, horizon):
        times = np.append(times, horizon)
    else:
        times[-1] = horizon
    return times


def simulate_voter(
    n: int,
    d: int,
    nu: float,
    init,
    horizon: float,
    grid_step: float,
    stream: rng.Stream,
    graph: GraphState | None = None,
    grid: np.ndarray | None = None,
) -> VoterTrace:
    """Voter model with rewiring, sampled on a uniform grid.

    ``init`` is either a density in [0, 1] (i.i.d. Bernoulli opinions) or
    an explicit 0/1 array of length n.  The run stops at consensus; the
    remaining grid points are filled with the frozen values.
    """
    if nu < 0:
        raise ParameterError(f"nu must be >= 0, got {nu!r}")
    g = graph.copy() if graph is not None else sample_matching(n, d, stream)
    opin = np.empty(n, dtype=np.int8)
    if isinstance(init, (int, float)) and not isinstance(init, bool):
        u = float(init)
        if not 0.0 <= u <= 1.0:
            raise ParameterError(f"initial density must lie in [0, 1], got {u!r}")
        _kernels.bernoulli_fill(opin, u, stream.state)
    else:
        arr = np.asarray(init)
        if arr.shape != (n,) or not np.isin(arr, (0, 1)).all():
            raise ParameterError("explicit init must be a 0/1 array of length n")
        opin[:] = arr
    if grid is None:
        grid = make_grid(horizon, grid_step)
    else:
        grid = np.asarray(grid, dtype=np.float64)
        if grid.size == 0 or np.any(np.diff(grid) <= 0) or grid[0] < 0 or grid[-1] > horizon:
            raise ParameterError("grid must be increasing inside [0, horizon]")
    out_o = np.empty(grid.size)
    out_d = np.empty(grid.size)
    out_int_d = np.empty(grid.size)
    out_int_oo = np.empty(grid.size)
    cons = _kernels.voter_run(
        g.match, opin, d, float(nu), float(horizon), grid, stream.state,
        out_o, out_d, out_int_d, out_int_oo,
    )
    return VoterTrace(
        n=n,
        d=d,
        nu=nu,
        times=grid,
        opinion_density=out_o,
        discordance=out_d,
        int_d=out_int_d,
        int_oo=out_int_oo,
        consensus_time=None if cons < 0 else float(cons),
    )


WALK_CLOCK = 0
REWIRE_CLOCK = 1


@dataclass
class EventLog:
    """Time-ordered record of all clock arrivals up to a horizon.

    Walk rows (kind 0): ``a`` is the stub, ``b`` the partner vertex of
    that stub at the arrival instant.  Rewire rows (kind 1): ``a`` and
    ``b`` are the two chosen stubs and ``applied`` marks non-no-ops.
    """

    n: int
    d: int
    nu: float
    horizon: float
    times: np.ndarray = field(default_factory=lambda: np.empty(0))
    kinds: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int8))
    a: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    b: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    applied: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=bool))
    final_match: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.times)

    def replay_rewires(self, initial: GraphState) -> GraphState:
        """Re-apply all rewire rows to a copy of ``initial``."""
        g = initial.copy()
        for i in range(len(self)):
            if self.kinds[i] == REWIRE_CLOCK:
                was_applied = apply_rewire(g, int(self.a[i]), int(self.b[i]))
                if was_applied != bool(self.applied[i]):
                    raise ParameterError("log does not replay against this state")
        return g


def simulate_with_log(
    n: int,
    d: int,
    nu: float,
    horizon: float,
    stream: rng.Stream,
    graph: GraphState | None = None,
) -> tuple[GraphState, EventLog]:
    """Generate every arrival up to ``horizon`` and the initial graph.

    Walk clocks: one rate-1/d Poisson clock per stub (aggregate rate n);
    each arrival picks a uniform stub and records its partner vertex in
    the current graph.  Rewire clocks: aggregate rate nu*dn/4 with the
    usual uniform stub pair.  The returned graph is the initial state;
    the log's ``final_match`` snapshot allows exact replay verification.
    """
    if not horizon > 0:
        raise ParameterError(f"horizon must be positive, got {horizon!r}")
    if nu < 0:
        raise ParameterError(f"nu must be >= 0, got {nu!r}")
    initial = graph.copy() if graph is not None else sample_matching(n, d, stream)
    g = initial.copy()
    dn = n * d
    walk_rate = float(n)
    rew_rate = nu * dn / 4.0
    total = walk_rate + rew_rate
    times, kinds, aa, bb, app = [], [], [], [], []
    t = 0.0
    while True:
        t += stream.exponential(total)
        if t > horizon:
            break
        if stream.uniform() * total < walk_rate:
            s = stream.randbelow(dn)
            times.append(t)
            kinds.append(WALK_CLOCK)
            aa.append(s)
            bb.append(int(g.match[s]) // d)
            app.append(True)
        else:
            a = stream.randbelow(dn)
            b = stream.randbelow(dn)
            ok = apply_rewire(g, a, b)
            times.append(t)
            kinds.append(REWIRE_CLOCK)
            aa.append(a)
            bb.append(b)
            app.append(ok)
    log = EventLog(
        n=n,
        d=d,
        nu=nu,
        horizon=horizon,
        times=np.asarray(times, dtype=np.float64),
        kinds=np.asarray(kinds, dtype=np.int8),
        a=np.asarray(aa, dtype=np.int64),
        b=np.asarray(bb, dtype=np.int64),
        applied=np.asarray(app, dtype=bool),
        final_match=g.match.copy(),
    )
    return initial, log


def forward_voter_from_log(xi: np.ndarray, log: EventLog, t: float) -> np.ndarray:
    """Opinion configuration at time t built from the log's walk arrivals.

    A walk arrival on stub s of vertex x makes x copy the opinion of the
    recorded partner vertex.
    """
    if t > log.horizon:
        raise ParameterError(f"t = {t} exceeds the log horizon {log.horizon}")
    eta = np.asarray(xi, dtype=np.int8).copy()
    if eta.shape != (log.n,):
        raise ParameterError(f"xi must have length {log.n}")
    for i in range(len(log)):
        if log.times[i] > t:
            break
        if log.kinds[i] == WALK_CLOCK:
            eta[int(log.a[i]) // log.d] = eta[int(log.b[i])]
    return eta


def backward_walk(log: EventLog, t: float, x: int) -> int:
    """Position at time 0 of the coalescing walk started at x at time t.

    Scans arrivals backwards from t; whenever a walk-clock arrival sits
    on a stub of the current position, the walk moves to the recorded
    partner vertex.
    """
    if t > log.horizon:
        raise ParameterError(f"t = {t} exceeds the log horizon {log.horizon}")
    if not 0 <= x < log.n:
        raise ParameterError(f"x must lie in [0, {log.n})")
    pos = x
    start = np.searchsorted(log.times, t, side="right") - 1
    for i in range(start, -1, -1):
        if log.kinds[i] == WALK_CLOCK and int(log.a[i]) // log.d == pos:
            pos = int(log.b[i])
    return pos


@dataclass(frozen=True)
class DualityReport:
    passed: bool
    mismatches: tuple[int, ...]  # vertices where the two sides differ


def duality_check(
    n: int, d: int, nu: float, init, t: float, stream: rng.Stream
) -> DualityReport:
    """Exact identity check: eta_t(x) == xi(backward position of x), all x.

    Both sides are built from the same event log, so any mismatch is an
    implementation bug, not noise.
    """
    if isinstance(init, (int, float)) and not isinstance(init, bool):
        xi = np.empty(n, dtype=np.int8)
        _kernels.bernoulli_fill(xi, float(init), stream.state)
    else:
        xi = np.asarray(init, dtype=np.int8)
        if xi.shape != (n,):
            raise ParameterError(f"init must have length {n}")
    _, log = simulate_with_log(n, d, nu, t, stream)
    eta = forward_voter_from_log(xi, log, t)
    bad = [x for x in range(n) if eta[x] != xi[backward_walk(log, t, x)]]
    return DualityReport(passed=not bad, mismatches=tuple(bad))


def meeting_experiment(
    n: int,
    d: int,
    nu: float,
    start: str,
    reps: int,
    seed: int,
    threads: int = 1,
    t_cap: float | None = None,
) -> list[MeetingResult]:
    """Independent meeting-time replicas, each on a fresh uniform graph."""
    from .runner import run_replicas

    if t_cap is None:
        t_cap = default_t_cap(n, d, nu)  # evaluate once, not per replica

    def worker(replica: int, stream: rng.Stream) -> MeetingResult:
        return simulate_two_walks(n, d, nu, start, stream, t_cap=t_cap)

    return run_replicas(worker, reps, seed, threads)


def voter_experiment(
    n: int,
    d: int,
    nu: float,
    u: float,
    horizon: float,
    grid_step: float,
    reps: int,
    seed: int,
    threads: int = 1,
) -> list[VoterTrace]:
    """Independent voter-trace replicas, each on a fresh uniform graph."""
    from .runner import run_replicas

    def worker(replica: int, stream: rng.Stream) -> VoterTrace:
        return simulate_voter(n, d, nu, u, horizon, grid_step, stream)

    return run_replicas(worker, reps, seed, threads)


def consensus_time_experiment(
    n: int,
    d: int,
    nu: float,
    u: float,
    reps: int,
    seed: int,
    threads: int = 1,
    horizon_factor: float = 1000.0,
) -> np.ndarray:
    """Samples of tau_consensus / n (exploratory diagnostic, not a gate).

    Runs that somehow fail to reach consensus before horizon_factor * n
    come back as NaN and should be reported separately.
    """
    from .runner import run_replicas

    if not 0.0 < u < 1.0:
        raise ParameterError(f"u must lie in (0, 1), got {u!r}")
    horizon = horizon_factor * n

    def worker(replica: int, stream: rng.Stream) -> float:
        trace = simulate_voter(n, d, nu, u, horizon, horizon, stream)
        if trace.consensus_time is None:
            return math.nan
        return trace.consensus_time / n

    return np.asarray(run_replicas(worker, reps, seed, threads))
