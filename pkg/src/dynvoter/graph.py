"""Stub-matching multigraph and the edge-rewiring move.

A d-regular multigraph on n vertices is stored as a fixed-point-free
involution ``match`` on the dn stub indices; stub s belongs to vertex
s // d (stub k of vertex x, 1-based, is index x*d + (k-1)).  Self-loops
(two stubs of one vertex matched together) and multi-edges are allowed
and always counted with multiplicity.

The rewiring dynamics runs a single exponential clock at rate nu*dn/4.
At each tick a stub ``a`` and a partner ``b`` are drawn uniformly (and
independently) from all dn stubs; if b == a or b == match[a] the tick is
a no-op, otherwise the two edges at a and b are broken and re-paired as
a<->b, match[a]<->match[b].  Under this scheme a tagged edge survives an
Exp(nu*(dn-2)/dn) time; the per-pair normalisation over dn-1 partners
would give nu*(dn-2)/(dn-1), a relative difference of order 1/dn.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import ParameterError


@dataclass
class GraphState:
    """Evolving multigraph: n, d and the stub involution ``match``."""

    n: int
    d: int
    match: np.ndarray  # int64[n*d], match[match[s]] == s, match[s] != s

    @property
    def stub_count(self) -> int:
        return self.n * self.d

    def vertex_of(self, stub: int) -> int:
        return stub // self.d

    def copy(self) -> "GraphState":
        return GraphState(n=self.n, d=self.d, match=self.match.copy())

    def assert_valid(self) -> None:
        """Raise if ``match`` is not a fixed-point-free involution."""
        dn = self.stub_count
        if self.match.shape != (dn,):
            raise ParameterError(f"match must have shape ({dn},)")
        idx = np.arange(dn)
        if np.any(self.match[self.match] != idx):
            raise ParameterError("match is not an involution")
        if np.any(self.match == idx):
            raise ParameterError("match has a fixed point (self-matched stub)")

    def neighbors(self, x: int):
        """Neighbor vertex of each of x's d stubs (with multiplicity)."""
        base = x * self.d
        return [int(self.match[base + k]) // self.d for k in range(self.d)]

    def dump_lines(self):
        """Debug dump, one line per stub: ``s match[s]`` (not a stable format)."""
        for s in range(self.stub_count):
            yield f"{s} {int(self.match[s])}"


@dataclass(frozen=True)
class RewireEvent:
    """One tick of the rewiring clock; ``applied`` is False for no-ops."""

    time: float
    a: int
    b: int
    applied: bool


def sample_matching(n: int, d: int, stream: rng.Stream) -> GraphState:
    """Uniform perfect matching on the n*d stubs (configuration model)."""
    if n < 2 or d < 1:
        raise ParameterError(f"need n >= 2 and d >= 1, got n={n}, d={d}")
    dn = n * d
    if dn % 2 != 0:
        raise ParameterError(f"n*d must be even, got {n}*{d} = {dn}")
    perm = np.arange(dn, dtype=np.int64)
    stream.shuffle(perm)
    match = np.empty(dn, dtype=np.int64)
    match[perm[0::2]] = perm[1::2]
    match[perm[1::2]] = perm[0::2]
    return GraphState(n=n, d=d, match=match)


def apply_rewire(state: GraphState, a: int, b: int) -> bool:
    """Rewire stubs a and b; returns False when the tick is a no-op."""
    dn = state.stub_count
    if not (0 <= a < dn and 0 <= b < dn):
        raise ParameterError(f"stub indices must lie in [0, {dn}), got {a}, {b}")
    match = state.match
    if a == b or match[a] == b:
        return False
    a2 = match[a]
    b2 = match[b]
    match[a] = b
    match[b] = a
    match[a2] = b2
    match[b2] = a2
    return True


def rewire_total_rate(n: int, d: int, nu: float) -> float:
    """Aggregate tick rate of the rewiring clock: nu * dn / 4."""
    if nu < 0:
        raise ParameterError(f"nu must be >= 0, got {nu!r}")
    return nu * n * d / 4.0


def uniform_edge(state: GraphState, stream: rng.Stream) -> tuple[int, int]:
    """Uniform edge (with multiplicity), as the vertex pair of a uniform stub."""
    s = stream.randbelow(state.stub_count)
    return s // state.d, int(state.match[s]) // state.d


def bfs_distance(state: GraphState, x: int, y: int, cutoff: int) -> float:
    """Graph distance between x and y, or math.inf beyond cutoff/disconnected."""
    if not (0 <= x < state.n and 0 <= y < state.n):
        raise ParameterError(f"vertices must lie in [0, {state.n})")
    if x == y:
        return 0
    dist = {x: 0}
    queue = deque([x])
    while queue:
        v = queue.popleft()
        dv = dist[v]
        if dv >= cutoff:
            continue
        for w in state.neighbors(v):
            if w not in dist:
                if w == y:
                    return dv + 1
                dist[w] = dv + 1
                queue.append(w)
    return float("inf")
