"""Fisher-Wright diffusion reference: dB = sqrt(2*theta*B(1-B)) dW.

Euler-Maruyama with clamp-then-absorb boundaries: a step leaving [0, 1]
is clamped to the endpoint and the path is absorbed there (the diffusion
coefficient vanishes at the boundary, so the exact process is absorbed
too; clamping keeps the martingale property up to O(dt)).  The moment
E[B_s(1-B_s)] decays exactly as u(1-u)*exp(-2*theta*s), which is the
closed-form curve the voter heterozygosity is checked against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels, rng
from .errors import ParameterError


@dataclass
class FwPath:
    times: np.ndarray
    values: np.ndarray
    absorbed_at: int | None  # 0, 1 or None


def default_dt(theta: float) -> float:
    return 1e-3 * min(1.0, 1.0 / (2.0 * theta)) if theta > 0 else 1e-3


def fw_simulate(
    theta: float, u: float, T: float, dt: float | None, stream: rng.Stream
) -> FwPath:
    """One Euler-Maruyama path of the Fisher-Wright diffusion on [0, T]."""
    if not 0.0 <= u <= 1.0:
        raise ParameterError(f"u must lie in [0, 1], got {u!r}")
    if theta < 0:
        raise ParameterError(f"theta must be >= 0, got {theta!r}")
    if dt is None:
        dt = default_dt(theta)
    if not (dt > 0 and T > 0):
        raise ParameterError("T and dt must be positive")
    steps = int(math.ceil(T / dt - 1e-9))
    times = np.linspace(0.0, steps * dt, steps + 1)
    values = np.empty(steps + 1)
    absorbed = _kernels.fw_path(2.0 * theta, float(u), float(dt), values, stream.state)
    return FwPath(times=times, values=values, absorbed_at=None if absorbed < 0 else int(absorbed))


def fw_heterozygosity(theta: float, u: float, s: float) -> float:
    """Closed form u(1-u)*exp(-2*theta*s) for E[B_s(1-B_s)]."""
    return u * (1.0 - u) * math.exp(-2.0 * theta * s)


def fw_moment_experiment(
    theta: float,
    u: float,
    sample_times,
    paths: int,
    seed: int,
    dt: float | None = None,
    threads: int = 1,
):
    """Monte Carlo E[B_s(1-B_s)] at the given times: (means, SEs).

    Sample times are snapped onto the Euler grid (dt divides them up to
    rounding), so no interpolation enters the estimate.
    """
    from .runner import run_replicas

    sample_times = np.asarray(sample_times, dtype=np.float64)
    if sample_times.size == 0 or np.any(sample_times < 0):
        raise ParameterError("sample_times must be nonnegative")
    if dt is None:
        dt = default_dt(theta)
    T = float(sample_times.max())
    idx = np.rint(sample_times / dt).astype(np.int64)

    def worker(replica: int, stream: rng.Stream) -> np.ndarray:
        path = fw_simulate(theta, u, T if T > 0 else dt, dt, stream)
        vals = path.values[np.minimum(idx, path.values.size - 1)]
        return vals * (1.0 - vals)

    rows = np.asarray(run_replicas(worker, paths, seed, threads))
    means = rows.mean(axis=0)
    ses = rows.std(axis=0, ddof=1) / math.sqrt(paths)
    return means, ses
