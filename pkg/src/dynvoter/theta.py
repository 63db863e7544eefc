"""Exact evaluation of the diffusion constant theta(d, nu) and relatives.

Two independent random walks on a d-regular tree have a distance process
that is a birth-death chain; letting every edge on the path between the
walks vanish at rate nu adds killing at rate nu*i from distance i.  The
ratio Delta(i) = beta * R(i+1)/R(i) of expected collision local times
satisfies the forward recursion

    Delta(i) = 1 / ((2 + (i+1)*nu)/rho - Delta(i+1)),      i = 0, 1, ...

with beta = sqrt(d-1) and rho = 2*sqrt(d-1)/d, i.e. Delta(0) is the
continued fraction  1/((2+nu)/rho - 1/((2+2*nu)/rho - ...)).  All partial
denominators are >= 2, so the fraction converges (Pringsheim).  The
diffusion constant is

    theta(d, nu) = 1 - Delta(0)/beta,

the escape probability of the killed distance chain from 0, which also
equals 1/(2*R(0)) with R(0) the expected collision local time.

Everything here is a pure function of (d, nu); no state is shared.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

from .errors import DegenerateHeightError, NumericalFailure, ParameterError

DEPTH_CAP = 2**20          # hard limit on backward truncation depth
SERIES_CAP = 1_000_000     # hard limit on series length
_TAIL_STREAK = 5           # consecutive negligible terms ending a series


@dataclass(frozen=True)
class ModelConst:
    """Degree/rewiring-rate pair with the derived spectral constants."""

    d: int
    nu: float
    beta: float
    rho: float


def make_consts(d: int, nu: float) -> ModelConst:
    """Validate (d, nu) and compute beta = sqrt(d-1), rho = 2*sqrt(d-1)/d."""
    if not isinstance(d, int) or isinstance(d, bool) or d < 2:
        raise ParameterError(f"degree d must be an integer >= 2, got {d!r}")
    nu = float(nu)
    if not math.isfinite(nu) or nu < 0:
        raise ParameterError(f"rewiring rate nu must be finite and >= 0, got {nu!r}")
    beta = math.sqrt(d - 1)
    return ModelConst(d=d, nu=nu, beta=beta, rho=2.0 * beta / d)


def _cf_backward(d: int, nu: float, i0: int, tol: float) -> tuple[float, int]:
    """Backward recurrence for Delta(i0), truncating with Delta(K) = 0.

    The truncation depth K is doubled from 64 until two successive
    evaluations differ by less than tol.
    """
    rho = 2.0 * math.sqrt(d - 1) / d
    prev = None
    depth = 64
    while depth <= DEPTH_CAP:
        x = 0.0
        for k in range(depth, 0, -1):
            x = 1.0 / ((2.0 + (i0 + k) * nu) / rho - x)
        if prev is not None and abs(x - prev) < tol:
            return x, depth
        prev = x
        depth *= 2
    raise NumericalFailure(
        f"backward recurrence for Delta did not stabilise within depth {DEPTH_CAP} "
        f"(d={d}, nu={nu}, offset={i0}, tol={tol})"
    )


def _cf_forward(d: int, nu: float, i0: int, tol: float) -> float:
    """Forward evaluation of the same fraction through its convergents.

    Numerators p_k and denominators q_k obey the three-term recurrence
    h_k = b_k h_{k-1} - h_{k-2}; the convergents p_k/q_k increase to the
    limit.  Used as an independent cross-check of the backward route.
    """
    rho = 2.0 * math.sqrt(d - 1) / d
    b1 = (2.0 + (i0 + 1) * nu) / rho
    p_prev, q_prev = 0.0, 1.0
    p_cur, q_cur = 1.0, b1
    c_prev = p_cur / q_cur
    for k in range(2, DEPTH_CAP + 1):
        bk = (2.0 + (i0 + k) * nu) / rho
        p_next = bk * p_cur - p_prev
        q_next = bk * q_cur - q_prev
        c = p_next / q_next
        if k >= 3 and abs(c - c_prev) < tol:
            return c
        c_prev = c
        p_prev, p_cur = p_cur, p_next
        q_prev, q_cur = q_cur, q_next
        if abs(q_cur) > 1e250:  # rescale to dodge overflow; ratios unchanged
            p_prev *= 1e-250
            p_cur *= 1e-250
            q_prev *= 1e-250
            q_cur *= 1e-250
    raise NumericalFailure(
        f"convergents did not stabilise within {DEPTH_CAP} terms "
        f"(d={d}, nu={nu}, offset={i0}, tol={tol})"
    )


@lru_cache(maxsize=None)
def _delta_checked(d: int, nu: float, i0: int, tol: float) -> tuple[float, int]:
    back, depth = _cf_backward(d, nu, i0, tol)
    forward = _cf_forward(d, nu, i0, tol)
    if abs(back - forward) > 10.0 * tol:
        raise NumericalFailure(
            f"backward/forward evaluations disagree: {back!r} vs {forward!r} "
            f"(d={d}, nu={nu}, offset={i0}, tol={tol})"
        )
    return back, depth


def delta_cf(consts: ModelConst, tol: float = 1e-12) -> tuple[float, int]:
    """Evaluate Delta(0) and report the truncation depth used.

    The backward recurrence is cross-checked against the forward
    convergents; disagreement beyond 10*tol raises NumericalFailure.
    """
    if not tol > 0:
        raise ParameterError(f"tol must be positive, got {tol!r}")
    return _delta_checked(consts.d, consts.nu, 0, float(tol))


def cf_residual(consts: ModelConst, tol: float = 1e-12) -> float:
    """Absolute gap between the backward and forward evaluations of Delta(0)."""
    back, _ = _cf_backward(consts.d, consts.nu, 0, tol)
    forward = _cf_forward(consts.d, consts.nu, 0, tol)
    return abs(back - forward)


def theta(consts: ModelConst, tol: float = 1e-12) -> float:
    """Diffusion constant theta = 1 - Delta(0)/beta.

    Equals (d-2)/(d-1) at nu = 0 and increases towards 1 in both nu and d.
    """
    delta0, _ = delta_cf(consts, tol)
    return 1.0 - delta0 / consts.beta


def delta_seq(consts: ModelConst, i_max: int, tol: float = 1e-12) -> list[float]:
    """Delta(i) for i = 0..i_max, each evaluated as its own shifted fraction.

    Because every entry is computed independently, the recursion residual
    |Delta(i) * ((2+(i+1)nu)/rho - Delta(i+1)) - 1| is a meaningful
    consistency check rather than an identity by construction.
    """
    if i_max < 0:
        raise ParameterError(f"i_max must be >= 0, got {i_max!r}")
    if not tol > 0:
        raise ParameterError(f"tol must be positive, got {tol!r}")
    return [
        _delta_checked(consts.d, consts.nu, i, float(tol))[0] for i in range(i_max + 1)
    ]


def meet_prob_q(consts: ModelConst, ell: int, tol: float = 1e-12) -> float:
    """Probability q(ell) that the killed distance chain started at ell hits 0.

    q(0) = 1 and q(ell) = prod_{i<ell} Delta(i)/beta, strictly decreasing
    in ell.
    """
    if ell < 0:
        raise ParameterError(f"ell must be >= 0, got {ell!r}")
    out = 1.0
    for i in range(ell):
        out *= _delta_checked(consts.d, consts.nu, i, float(tol))[0] / consts.beta
    return out


def local_time_R(consts: ModelConst, i: int, tol: float = 1e-12) -> float:
    """Expected collision local time R(i) of the killed distance chain.

    R(0) = 1/(2*theta) and the ratio recursion R(i+1) = R(i)*Delta(i)/beta
    telescopes to R(i) = R(0)*q(i).
    """
    if i < 0:
        raise ParameterError(f"i must be >= 0, got {i!r}")
    r = 1.0 / (2.0 * theta(consts, tol))
    for j in range(i):
        r *= _delta_checked(consts.d, consts.nu, j, float(tol))[0] / consts.beta
    return r


def toy_height(n: int, d: int, delta: float) -> int:
    """Tree height floor(delta * log_d n); errors out when it is below 1."""
    if n < d + 1:
        raise ParameterError(f"n must be >= d+1 = {d + 1}, got {n!r}")
    if not 0 < delta < 1.0 / 48.0:
        raise ParameterError(f"delta must lie in (0, 1/48), got {delta!r}")
    hbar = int(math.floor(delta * math.log(n) / math.log(d)))
    if hbar < 1:
        raise DegenerateHeightError(
            f"floor(delta*log_d n) = {hbar} < 1 for n={n}, d={d}, delta={delta}; "
            f"increase n or pass an explicit height"
        )
    return hbar


def _weighted_meeting_series(consts: ModelConst, tol: float) -> float:
    """S = sum_{ell>=1} ell * prod_{i<ell} beta*Delta(i).

    The factors beta*Delta(i) tend to 0, so the terms decay faster than
    any geometric sequence; summation stops after _TAIL_STREAK consecutive
    terms below 1e-16 times the partial sum.
    """
    total = 0.0
    prod = 1.0
    streak = 0
    for ell in range(1, SERIES_CAP + 1):
        prod *= consts.beta * _delta_checked(consts.d, consts.nu, ell - 1, tol)[0]
        term = ell * prod
        total += term
        if term < 1e-16 * total:
            streak += 1
            if streak >= _TAIL_STREAK:
                return total
        else:
            streak = 0
    raise NumericalFailure(
        f"meeting-weight series did not converge within {SERIES_CAP} terms "
        f"(d={consts.d}, nu={consts.nu})"
    )


def gamma_rate(
    consts: ModelConst,
    n: int,
    delta: float = 0.02,
    hbar: int | None = None,
    tol: float = 1e-12,
) -> tuple[float, int, float]:
    """Rate of the first merge that leads to a meeting, plus its n-free limit.

    Returns ``(gamma_n, hbar, gamma_inf)`` where

        gamma_n   = nu/(dn-1) * d^2/(d-1) * sum_{ell=1}^{2*hbar-1}
                    ell*(d-1)^ell * q(ell),
        gamma_inf = d*nu/(d-1) * sum_{ell>=1} ell * beta^ell *
                    prod_{i<ell} Delta(i)     ( = lim n*gamma_n = 2*theta).

    ``hbar`` defaults to floor(delta*log_d n); pass it explicitly to pick
    the truncation height directly (the delta route needs astronomically
    large n before the floor reaches 1).
    """
    if hbar is None:
        hbar = toy_height(n, consts.d, delta)
    elif hbar < 1:
        raise DegenerateHeightError(f"hbar must be >= 1, got {hbar!r}")
    if n < consts.d + 1:
        raise ParameterError(f"n must be >= d+1 = {consts.d + 1}, got {n!r}")
    d, nu = consts.d, consts.nu
    s_trunc = 0.0
    prod = 1.0
    for ell in range(1, 2 * hbar):
        prod *= _delta_checked(d, nu, ell - 1, tol)[0] / consts.beta
        s_trunc += ell * (d - 1) ** ell * prod
    gamma_n = nu / (d * n - 1.0) * d * d / (d - 1.0) * s_trunc
    if nu == 0.0:
        gamma_inf = 0.0
    else:
        gamma_inf = d * nu / (d - 1.0) * _weighted_meeting_series(consts, tol)
    return gamma_n, hbar, gamma_inf


def identity_residual(consts: ModelConst, tol: float = 1e-12) -> float:
    """|d*nu/(d-1) * S - 2*(1 - Delta(0)/beta)| for nu > 0.

    Both sides are computed from independently evaluated Delta(i), so a
    small residual certifies the whole continued-fraction machinery.  At
    nu = 0 the left side carries the factor nu while the right side stays
    positive, so the identity only makes sense for nu > 0.
    """
    if consts.nu <= 0:
        raise ParameterError("identity_residual requires nu > 0")
    s = _weighted_meeting_series(consts, tol)
    lhs = consts.d * consts.nu / (consts.d - 1.0) * s
    delta0, _ = delta_cf(consts, tol)
    rhs = 2.0 * (1.0 - delta0 / consts.beta)
    return abs(lhs - rhs)


def asymptotic_table(
    d_grid, nu_grid, tol: float = 1e-12
) -> list[dict[str, float]]:
    """Tabulate theta with the combinations used by the limit checks.

    Columns per (d, nu): theta, nu*(1-theta), d*(1-theta) and the
    difference quotient (theta - theta_{d,0})/nu (NaN at nu = 0, where
    theta_{d,0} = (d-2)/(d-1) exactly).
    """
    d_grid = list(d_grid)
    nu_grid = list(nu_grid)
    if not d_grid or not nu_grid:
        raise ParameterError("d_grid and nu_grid must be nonempty")
    rows = []
    for d in d_grid:
        theta0 = (d - 2.0) / (d - 1.0)
        for nu in nu_grid:
            consts = make_consts(d, nu)
            th = theta(consts, tol)
            rows.append(
                {
                    "d": d,
                    "nu": nu,
                    "theta": th,
                    "nu_one_minus_theta": nu * (1.0 - th),
                    "d_one_minus_theta": d * (1.0 - th),
                    "dtheta_dnu": (th - theta0) / nu if nu > 0 else math.nan,
                }
            )
    return rows


@dataclass(frozen=True)
class ThetaBundle:
    """All closed-form constants for one (d, nu) pair."""

    consts: ModelConst
    delta0: float
    theta: float
    delta_seq: tuple[float, ...]
    depth_used: int
    residual: float  # backward-vs-forward gap for Delta(0)


def make_bundle(consts: ModelConst, tol: float = 1e-12, i_max: int = 32) -> ThetaBundle:
    delta0, depth = delta_cf(consts, tol)
    seq = tuple(delta_seq(consts, i_max, tol))
    return ThetaBundle(
        consts=consts,
        delta0=delta0,
        theta=1.0 - delta0 / consts.beta,
        delta_seq=seq,
        depth_used=depth,
        residual=cf_residual(consts, tol),
    )
