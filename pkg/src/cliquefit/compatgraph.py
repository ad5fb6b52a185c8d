"""Compatibility graph construction.

One vertex per measurement; for every enumerated size-n subset that passes its
compatibility test, all edges among the subset's members are added (a pair is an
edge if it co-occurred in at least one passing subset). The builder is a pure
function of (measurements, budget): identical inputs give identical graphs.

The number of size-4 subsets explodes with N, so builds may run under a subset
budget: a deterministic uniform sample of distinct subsets. Budgeted graphs are
flagged ``budget_truncated``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import chain, combinations
from typing import Iterator

import numpy as np

from . import invariants
from .errors import TooFewMeasurementsError
from .measurements import (
    Camera2D3D,
    MeasurementSet,
    PointNormalPairs,
    PointPairs,
    RotationSamples,
)

# Exhaustive enumeration is used when C(N, n) is at most this; larger instances
# fall back to a sampled budget of the same size.
DEFAULT_EXHAUSTIVE_LIMIT = 10_000_000

_QUAD_CHUNK = 1_000_000


@dataclass(frozen=True)
class SubsetBudget:
    """Cap on the number of subsets tested. ``max_subsets=None`` means automatic:
    exhaustive up to DEFAULT_EXHAUSTIVE_LIMIT, sampled at that size beyond."""

    max_subsets: int | None = None
    rng_seed: int = 0

    def __post_init__(self):
        if self.max_subsets is not None and self.max_subsets < 1:
            raise ValueError("max_subsets must be >= 1 when bounded")


class CompatGraph:
    """Frozen undirected graph with sorted CSR adjacency.

    ``edges`` is an (E, 2) int array with i < j, lexicographically sorted.
    """

    def __init__(self, n_vertices: int, edges: np.ndarray,
                 budget_truncated: bool = False, n_subsets_tested: int = 0):
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size:
            lo = edges.min(axis=1)
            hi = edges.max(axis=1)
            if np.any(lo == hi):
                raise ValueError("self loops are not allowed")
            if lo.min() < 0 or hi.max() >= n_vertices:
                raise ValueError("edge endpoint out of range")
            edges = np.unique(np.column_stack([lo, hi]), axis=0)
        else:
            edges = edges.reshape(0, 2)
        self.n_vertices = int(n_vertices)
        self.edges = edges
        self.edges.flags.writeable = False
        self.budget_truncated = bool(budget_truncated)
        self.n_subsets_tested = int(n_subsets_tested)
        self._build_adjacency()

    def _build_adjacency(self):
        n = self.n_vertices
        if self.edges.size:
            both = np.concatenate([self.edges, self.edges[:, ::-1]])
            order = np.lexsort((both[:, 1], both[:, 0]))
            both = both[order]
            self.indices = np.ascontiguousarray(both[:, 1])
            counts = np.bincount(both[:, 0], minlength=n)
        else:
            self.indices = np.zeros(0, dtype=np.int64)
            counts = np.zeros(n, dtype=np.int64)
        self.indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(counts, out=self.indptr[1:])
        self.indices.flags.writeable = False
        self.indptr.flags.writeable = False

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    def degree(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def has_edge(self, i: int, j: int) -> bool:
        row = self.neighbors(i)
        k = np.searchsorted(row, j)
        return k < row.size and row[k] == j

    def to_edge_list_text(self) -> str:
        """One '"i j"' line per edge, 0-indexed, i < j, lexicographic order."""
        return "".join(f"{i} {j}\n" for i, j in self.edges)

    @classmethod
    def from_edge_list_text(cls, text: str, n_vertices: int | None = None) -> "CompatGraph":
        pairs = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"line {lineno}: expected 'i j', got {line!r}")
            pairs.append((int(parts[0]), int(parts[1])))
        edges = np.array(pairs, dtype=np.int64).reshape(-1, 2)
        if n_vertices is None:
            n_vertices = int(edges.max()) + 1 if edges.size else 0
        return cls(n_vertices, edges)


# ---------------------------------------------------------------------------
# subset enumeration
# ---------------------------------------------------------------------------


@lru_cache(maxsize=2)
def _all_subsets_cached(n_items: int, arity: int) -> np.ndarray:
    total = math.comb(n_items, arity)
    flat = np.fromiter(
        chain.from_iterable(combinations(range(n_items), arity)),
        dtype=np.int64,
        count=total * arity,
    )
    out = flat.reshape(total, arity)
    out.flags.writeable = False
    return out


def _sample_distinct_ranks(total: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """k distinct integers uniform in [0, total), in draw order (deterministic)."""
    if total <= 2_000_000:
        return rng.choice(total, size=k, replace=False)
    picked = np.zeros(0, dtype=np.int64)
    while picked.size < k:
        draws = rng.integers(0, total, size=max(int((k - picked.size) * 1.3) + 16, 64))
        block = np.concatenate([picked, draws])
        vals, first = np.unique(block, return_index=True)
        block = vals[np.argsort(first)]  # dedupe, preserving draw order
        picked = block
    return picked[:k]


def _unrank_colex(ranks: np.ndarray, n_items: int, arity: int) -> np.ndarray:
    """Map colex ranks to sorted index subsets, vectorized via binomial tables."""
    out = np.empty((ranks.size, arity), dtype=np.int64)
    rem = ranks.astype(np.int64).copy()
    for col, k in enumerate(range(arity, 0, -1)):
        table = np.array([math.comb(c, k) for c in range(n_items + 1)], dtype=np.int64)
        c = np.searchsorted(table, rem, side="right") - 1
        rem -= table[c]
        out[:, col] = c
    return out[:, ::-1]


def subset_array(n_items: int, arity: int, budget: SubsetBudget | None = None) -> np.ndarray:
    """Index subsets as an (M, arity) array.

    Unlimited budget: all C(n_items, arity) subsets in lexicographic order.
    Bounded budget: that many distinct subsets sampled uniformly without
    replacement with the budget's seed, rows sorted lexicographically.
    """
    if arity > n_items:
        raise ValueError(f"arity {arity} exceeds n_items {n_items}")
    budget = budget or SubsetBudget()
    total = math.comb(n_items, arity)
    cap = budget.max_subsets
    if cap is None:
        cap = total if total <= DEFAULT_EXHAUSTIVE_LIMIT else DEFAULT_EXHAUSTIVE_LIMIT
    if cap >= total:
        if arity == 2:
            iu = np.triu_indices(n_items, k=1)
            return np.column_stack([iu[0], iu[1]]).astype(np.int64)
        return _all_subsets_cached(n_items, arity)
    rng = np.random.default_rng(budget.rng_seed)
    ranks = _sample_distinct_ranks(total, cap, rng)
    subs = _unrank_colex(ranks, n_items, arity)
    order = np.lexsort(tuple(subs[:, c] for c in range(arity - 1, -1, -1)))
    return subs[order]


def enumerate_subsets(
    n_items: int, arity: int, budget: SubsetBudget | None = None
) -> Iterator[tuple[int, ...]]:
    """Stream of index subsets; see subset_array for ordering and sampling rules."""
    budget = budget or SubsetBudget()
    total = math.comb(n_items, arity)
    cap = budget.max_subsets
    if cap is None or cap >= total:
        yield from combinations(range(n_items), arity)
        return
    for row in subset_array(n_items, arity, budget):
        yield tuple(int(v) for v in row)


def _is_truncated(n_items: int, arity: int, budget: SubsetBudget | None) -> tuple[int, bool]:
    """Resolved number of subsets to test and whether that truncates the space."""
    total = math.comb(n_items, arity)
    cap = budget.max_subsets if budget else None
    if cap is None:
        cap = total if total <= DEFAULT_EXHAUSTIVE_LIMIT else DEFAULT_EXHAUSTIVE_LIMIT
    return min(cap, total), cap < total


# ---------------------------------------------------------------------------
# graph building
# ---------------------------------------------------------------------------


def _pair_edges(measurements: MeasurementSet, pairs: np.ndarray | None) -> np.ndarray:
    """Edges from pairwise tests, either over all pairs or a sampled pair array."""
    if isinstance(measurements, RotationSamples):
        if pairs is None:
            mask = invariants.pairwise_rotation_compat(measurements.rotations, measurements.beta)
        else:
            flat = measurements.rotations.reshape(len(measurements), 9)
            tr = np.sum(flat[pairs[:, 0]] * flat[pairs[:, 1]], axis=1)
            ang = np.arccos(np.clip((tr - 1.0) / 2.0, -1.0, 1.0))
            ok = ang <= 2.0 * measurements.beta
            return pairs[ok]
    elif isinstance(measurements, PointPairs):
        if pairs is None:
            mask = invariants.pairwise_point_compat(measurements.a, measurements.b, measurements.beta)
        else:
            da = np.linalg.norm(measurements.a[pairs[:, 0]] - measurements.a[pairs[:, 1]], axis=1)
            db = np.linalg.norm(measurements.b[pairs[:, 0]] - measurements.b[pairs[:, 1]], axis=1)
            ok = np.abs(db - da) <= 2.0 * measurements.beta
            return pairs[ok]
    elif isinstance(measurements, PointNormalPairs):
        if pairs is None:
            mask = invariants.pairwise_point_normal_compat(
                measurements.a, measurements.ma, measurements.b, measurements.nb,
                measurements.beta, measurements.beta_normal,
            )
        else:
            i, j = pairs[:, 0], pairs[:, 1]
            da = np.linalg.norm(measurements.a[i] - measurements.a[j], axis=1)
            db = np.linalg.norm(measurements.b[i] - measurements.b[j], axis=1)
            ok = np.abs(db - da) <= 2.0 * measurements.beta
            if 2.0 * measurements.beta_normal < np.pi:
                c_a = np.clip(np.sum(measurements.ma[i] * measurements.ma[j], axis=1), -1.0, 1.0)
                c_b = np.clip(np.sum(measurements.nb[i] * measurements.nb[j], axis=1), -1.0, 1.0)
                cos2b = np.cos(2.0 * measurements.beta_normal)
                normal_ok = (cos2b - c_a * c_b <= 0.0) | (
                    2.0 * cos2b * c_a * c_b + 1.0 - c_a**2 - c_b**2 >= cos2b**2
                )
                ok &= normal_ok
            return pairs[ok]
    else:
        raise TypeError(f"unsupported measurement type {type(measurements).__name__}")
    iu = np.triu_indices(len(measurements), k=1)
    keep = mask[iu]
    return np.column_stack([iu[0][keep], iu[1][keep]]).astype(np.int64)


_QUAD_PAIR_COLS = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]


def _crossratio_edges(measurements: Camera2D3D, quads: np.ndarray) -> np.ndarray:
    """Edges induced by passing 2D-3D quadruples (invariants.test_crossratio_subset).

    A quadruple passes when every inequivalent cross-ratio ordering satisfies its
    interval test and the four pixels are collinear within noise. Per-quadruple
    3D collinearity reuses the residuals of each point against the single TLS
    line fit of the whole 3D set; quadruples off that line or with coincident
    projections cannot certify compatibility and add no edges.
    """
    n = len(measurements)
    vee = invariants.vee_project(measurements.p)
    resid = invariants._line_residuals(measurements.p)
    collinear_pt = resid < invariants.COLLINEARITY_TOL

    def dist_matrix(x):
        sq = np.sum(x * x, axis=1)
        d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
        return np.sqrt(np.clip(d2, 0.0, None))

    vee_dist = dist_matrix(vee)
    pixel_dist = dist_matrix(measurements.y)

    edge_codes: list[np.ndarray] = []
    for start in range(0, quads.shape[0], _QUAD_CHUNK):
        chunk = quads[start:start + _QUAD_CHUNK]
        ok = np.all(collinear_pt[chunk], axis=1)
        ok &= invariants.crossratio_collinear_pixels(measurements.y, chunk, measurements.beta)
        alive = np.flatnonzero(ok)
        for perm in invariants.CROSSRATIO_PAIRINGS:
            if not alive.size:
                break
            reordered = chunk[alive][:, perm]
            tau = invariants.crossratio_values(vee_dist, reordered)
            good = invariants.crossratio_compat(pixel_dist, reordered, tau, measurements.beta)
            alive = alive[good]
        passing = chunk[alive]
        if passing.size:
            for ci, cj in _QUAD_PAIR_COLS:
                edge_codes.append(passing[:, ci] * n + passing[:, cj])
    if not edge_codes:
        return np.zeros((0, 2), dtype=np.int64)
    codes = np.unique(np.concatenate(edge_codes))
    return np.column_stack([codes // n, codes % n])


def build_graph(measurements: MeasurementSet, budget: SubsetBudget | None = None) -> CompatGraph:
    """Compatibility graph of a measurement set.

    Raises TooFewMeasurementsError when N is below the invariant arity; callers
    should then skip pruning and keep every measurement.
    """
    n = len(measurements)
    arity = measurements.arity
    if n < arity:
        raise TooFewMeasurementsError(
            f"need at least {arity} measurements for this invariant, got {n}"
        )
    budget = budget or SubsetBudget()
    n_tested, truncated = _is_truncated(n, arity, budget)

    if isinstance(measurements, Camera2D3D):
        quads = subset_array(n, 4, budget)
        edges = _crossratio_edges(measurements, quads)
    else:
        pairs = None if not truncated else subset_array(n, 2, budget)
        edges = _pair_edges(measurements, pairs)
    return CompatGraph(n, edges, budget_truncated=truncated, n_subsets_tested=n_tested)
