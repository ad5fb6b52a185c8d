"""Inlier selection on the compatibility graph.

Two selectors:

* ``max_kcore``  - vertices whose core number equals the graph degeneracy,
  computed by linear-time bucket peeling (compiled with numba).
* ``max_clique`` - exact branch and bound on bitset adjacency: vertices
  explored under a greedy-coloring upper bound, candidates prefiltered to the
  (best-1)-core, equal-size ties broken by the lexicographically smallest
  vertex set. An optional time budget degrades the result to the best clique
  found so far, flagged ``exact=False``.

``brute_force_max_clique`` is an independent exhaustive oracle for small graphs.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from numba import njit

from .compatgraph import CompatGraph
from .errors import GraphTooLargeError

_BRUTE_FORCE_LIMIT = 25


@dataclass(frozen=True)
class CoreDecomposition:
    """Per-vertex core numbers and their maximum (the degeneracy)."""

    core_number: np.ndarray
    degeneracy: int


@dataclass(frozen=True)
class InlierSelection:
    """Selected vertex subset with provenance.

    ``exact`` is False when a clique search stopped on its time budget.
    ``clique_number`` is set for exact max-clique selections.
    """

    vertices: np.ndarray
    mode: str
    exact: bool = True
    clique_number: int | None = None

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.int64)
        v = np.sort(v)
        v.flags.writeable = False
        object.__setattr__(self, "vertices", v)

    def __len__(self) -> int:
        return self.vertices.shape[0]


@njit(cache=True)
def _peel_kernel(indptr, indices):  # pragma: no cover - exercised via wrapper
    n = indptr.shape[0] - 1
    deg = np.empty(n, np.int64)
    maxdeg = 0
    for v in range(n):
        deg[v] = indptr[v + 1] - indptr[v]
        if deg[v] > maxdeg:
            maxdeg = deg[v]
    # bucket sort vertices by degree
    bin_start = np.zeros(maxdeg + 2, np.int64)
    for v in range(n):
        bin_start[deg[v] + 1] += 1
    for d in range(1, maxdeg + 2):
        bin_start[d] += bin_start[d - 1]
    fill = bin_start[: maxdeg + 1].copy()
    pos = np.empty(n, np.int64)
    vert = np.empty(n, np.int64)
    for v in range(n):
        d = deg[v]
        pos[v] = fill[d]
        vert[fill[d]] = v
        fill[d] += 1
    bucket = bin_start[: maxdeg + 1].copy()
    # peel in nondecreasing effective degree; deg[v] freezes at the core number
    for i in range(n):
        v = vert[i]
        if bucket[deg[v]] <= i:
            bucket[deg[v]] = i + 1
        for k in range(indptr[v], indptr[v + 1]):
            u = indices[k]
            if deg[u] > deg[v]:
                du = deg[u]
                pu = pos[u]
                pw = bucket[du]
                w = vert[pw]
                if u != w:
                    vert[pu] = w
                    vert[pw] = u
                    pos[u] = pw
                    pos[w] = pu
                bucket[du] += 1
                deg[u] -= 1
    return deg, vert


def _core_and_order(graph: CompatGraph) -> tuple[np.ndarray, np.ndarray]:
    if graph.n_vertices == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    core, order = _peel_kernel(graph.indptr, graph.indices)
    return core, order


def core_decomposition(graph: CompatGraph) -> CoreDecomposition:
    """Core number of every vertex via bucket peeling, O(V + E)."""
    core, _ = _core_and_order(graph)
    degeneracy = int(core.max()) if core.size else 0
    core.flags.writeable = False
    return CoreDecomposition(core, degeneracy)


def max_kcore(graph: CompatGraph) -> InlierSelection:
    """Vertices of the maximum k-core: core number equal to the degeneracy."""
    dec = core_decomposition(graph)
    members = np.flatnonzero(dec.core_number == dec.degeneracy)
    return InlierSelection(members, mode="max_kcore", exact=True)


# ---------------------------------------------------------------------------
# maximum clique
# ---------------------------------------------------------------------------


def _adjacency_bits(graph: CompatGraph) -> list[int]:
    bits = [0] * graph.n_vertices
    for i, j in graph.edges:
        bits[i] |= 1 << int(j)
        bits[j] |= 1 << int(i)
    return bits


def _color_order(cand: int, adj: list[int]) -> tuple[list[int], list[int]]:
    """Greedy coloring of the candidate set; returns vertices grouped by color
    class with their (ascending) color numbers. max color bounds the clique size."""
    order: list[int] = []
    colors: list[int] = []
    k = 0
    rest = cand
    while rest:
        k += 1
        avail = rest
        while avail:
            low = avail & -avail
            v = low.bit_length() - 1
            avail &= ~(adj[v] | low)
            rest ^= low
            order.append(v)
            colors.append(k)
    return order, colors


class _Deadline:
    __slots__ = ("at", "expired", "_ticks")

    def __init__(self, time_budget_ms: float | None):
        self.at = None if time_budget_ms is None else time.monotonic() + time_budget_ms / 1000.0
        self.expired = False
        self._ticks = 0

    def check(self) -> bool:
        if self.at is None:
            return False
        self._ticks += 1
        if self._ticks & 0x3FF == 0 and time.monotonic() > self.at:
            self.expired = True
        return self.expired


def _greedy_clique(adj: list[int], order: np.ndarray) -> list[int]:
    """Maximal clique grown along reverse degeneracy order (deterministic seed
    for the branch and bound incumbent)."""
    members: list[int] = []
    mask = 0
    for v in order[::-1]:
        v = int(v)
        if mask & ~adj[v] == 0:
            members.append(v)
            mask |= 1 << v
    return members


def _expand(adj, cand, current, best, deadline):
    order, colors = _color_order(cand, adj)
    for idx in range(len(order) - 1, -1, -1):
        if deadline.check():
            return
        if len(current) + colors[idx] <= len(best[0]):
            return
        v = order[idx]
        current.append(v)
        sub = cand & adj[v]
        if sub:
            _expand(adj, sub, current, best, deadline)
        elif len(current) > len(best[0]):
            best[0] = list(current)
        current.pop()
        cand &= ~(1 << v)


def _exists_clique(adj, cand, need, deadline) -> bool:
    """Decision search: does cand contain a clique of the given size?"""
    if need <= 0:
        return True
    order, colors = _color_order(cand, adj)
    if not order or colors[-1] < need:
        return False
    for idx in range(len(order) - 1, -1, -1):
        if colors[idx] < need:
            return False
        if deadline.check():
            return False
        v = order[idx]
        if _exists_clique(adj, cand & adj[v], need - 1, deadline):
            return True
        cand &= ~(1 << v)
    return False


def _lex_smallest_clique(adj, core, omega, deadline) -> list[int] | None:
    """Lexicographically smallest clique of size omega; None if the deadline hits."""
    cand = 0
    for v, c in enumerate(core):
        if c >= omega - 1:
            cand |= 1 << v
    fixed: list[int] = []
    while len(fixed) < omega:
        rest = cand
        progressed = False
        while rest:
            low = rest & -rest
            v = low.bit_length() - 1
            sub = cand & adj[v] & ~((low << 1) - 1)  # candidates above v only
            if _exists_clique(adj, sub, omega - len(fixed) - 1, deadline):
                fixed.append(v)
                cand = sub
                progressed = True
                break
            if deadline.expired:
                return None
            rest ^= low
        if not progressed:
            return None
    return fixed


def max_clique(graph: CompatGraph, time_budget_ms: float | None = None) -> InlierSelection:
    """Exact maximum clique, or the best clique found within the time budget.

    Exact results report the clique number and are the lexicographically
    smallest maximum clique, so repeated runs are identical.
    """
    n = graph.n_vertices
    if n == 0:
        return InlierSelection(np.zeros(0, dtype=np.int64), mode="max_clique", exact=True, clique_number=0)
    core, order = _core_and_order(graph)
    adj = _adjacency_bits(graph)
    deadline = _Deadline(time_budget_ms)

    best = [_greedy_clique(adj, order)]
    # a strictly larger clique only contains vertices of core >= |best|
    cand = 0
    for v in range(n):
        if core[v] >= len(best[0]):
            cand |= 1 << v
    if cand:
        _expand(adj, cand, [], best, deadline)

    if deadline.expired:
        return InlierSelection(best[0], mode="max_clique", exact=False)
    omega = len(best[0])
    lex = _lex_smallest_clique(adj, core, omega, deadline)
    if lex is None:
        return InlierSelection(best[0], mode="max_clique", exact=False)
    return InlierSelection(lex, mode="max_clique", exact=True, clique_number=omega)


def brute_force_max_clique(graph: CompatGraph) -> InlierSelection:
    """Exhaustive enumeration oracle for graphs of at most 25 vertices."""
    n = graph.n_vertices
    if n > _BRUTE_FORCE_LIMIT:
        raise GraphTooLargeError(f"brute force limited to {_BRUTE_FORCE_LIMIT} vertices, got {n}")
    if n == 0:
        return InlierSelection(np.zeros(0, dtype=np.int64), mode="max_clique", exact=True, clique_number=0)
    adj = _adjacency_bits(graph)
    best: list[list[int]] = [[]]

    def rec(current: list[int], cand: int):
        if len(current) > len(best[0]):
            best[0] = list(current)
        while cand:
            if len(current) + cand.bit_count() <= len(best[0]):
                return
            low = cand & -cand
            v = low.bit_length() - 1
            cand ^= low
            current.append(v)
            rec(current, cand & adj[v])
            current.pop()

    rec([], (1 << n) - 1)
    return InlierSelection(best[0], mode="max_clique", exact=True, clique_number=len(best[0]))
