"""Self-contained xoshiro256++ random number generator.

Every stochastic routine in the package draws from this generator rather
than from ``numpy.random``.  Rationale:

* the hot event loops are numba-jitted and need an RNG whose state is a
  plain array that can be passed into ``nopython`` kernels;
* replica streams must be derived from ``(seed, replica)`` alone so that
  results are independent of scheduling and of the numpy version.

Stream derivation: state[0..3] are four outputs of a SplitMix64 sequence
started at ``seed XOR (replica+1) * 0xD2B74407B1CE6E93`` (both reduced
mod 2**64).  Distinct replicas of one seed therefore get well separated
xoshiro256++ states.  This scheme is fixed; regression tests pin it.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_SM_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_STREAM_SALT = np.uint64(0xD2B74407B1CE6E93)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53


@njit(cache=True, nogil=True)
def _splitmix64(z):
    z = z + _SM_GAMMA
    t = z
    t = (t ^ (t >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    t = (t ^ (t >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    t = t ^ (t >> np.uint64(31))
    return z, t


@njit(cache=True, nogil=True)
def seed_state(seed, replica):
    """Return a fresh uint64[4] xoshiro256++ state for (seed, replica)."""
    state = np.empty(4, dtype=np.uint64)
    z = np.uint64(seed) ^ ((np.uint64(replica) + np.uint64(1)) * _STREAM_SALT)
    nonzero = False
    for i in range(4):
        z, out = _splitmix64(z)
        state[i] = out
        if out != np.uint64(0):
            nonzero = True
    if not nonzero:  # all-zero state is the one forbidden xoshiro state
        state[0] = np.uint64(1)
    return state


@njit(cache=True, nogil=True)
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@njit(cache=True, nogil=True)
def next_u64(state):
    """Advance the state in place and return the next 64-bit output."""
    result = _rotl(state[0] + state[3], 23) + state[0]
    t = state[1] << np.uint64(17)
    state[2] ^= state[0]
    state[3] ^= state[1]
    state[1] ^= state[2]
    state[0] ^= state[3]
    state[2] ^= t
    state[3] = _rotl(state[3], 45)
    return result


@njit(cache=True, nogil=True)
def uniform01(state):
    """Uniform double in [0, 1) with 53 random bits."""
    return float(next_u64(state) >> np.uint64(11)) * _INV53


@njit(cache=True, nogil=True)
def exponential(state, rate):
    """Exponential variate with the given rate (rate > 0)."""
    u = uniform01(state)
    return -np.log1p(-u) / rate


@njit(cache=True, nogil=True)
def randbelow(state, n):
    """Unbiased uniform integer in [0, n) for 0 < n <= 2**64 - 1."""
    bound = np.uint64(n)
    threshold = (np.uint64(0) - bound) % bound
    while True:
        r = next_u64(state)
        if r >= threshold:
            return int(r % bound)


@njit(cache=True, nogil=True)
def standard_normal(state):
    """One standard normal variate (Box-Muller, cosine branch)."""
    u1 = 1.0 - uniform01(state)  # in (0, 1], keeps log finite
    u2 = uniform01(state)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


@njit(cache=True, nogil=True)
def shuffle(arr, state):
    """In-place Fisher-Yates shuffle of a 1-d integer array."""
    n = arr.size
    for i in range(n - 1, 0, -1):
        j = randbelow(state, i + 1)
        tmp = arr[i]
        arr[i] = arr[j]
        arr[j] = tmp


class Stream:
    """Thin object wrapper around a raw xoshiro256++ state array.

    Convenient for Python-side call sites; kernels receive ``.state``
    directly.
    """

    __slots__ = ("state",)

    def __init__(self, seed: int, replica: int = 0):
        self.state = seed_state(seed, replica)

    def u64(self) -> int:
        return int(next_u64(self.state))

    def uniform(self) -> float:
        return uniform01(self.state)

    def exponential(self, rate: float) -> float:
        return exponential(self.state, rate)

    def randbelow(self, n: int) -> int:
        return randbelow(self.state, n)

    def normal(self) -> float:
        return standard_normal(self.state)

    def shuffle(self, arr: np.ndarray) -> None:
        shuffle(arr, self.state)
