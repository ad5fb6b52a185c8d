"""Estimators that close the loop after pruning.

Closed-form solvers:

* ``horn_registration``          - weighted least-squares rigid alignment of
  point pairs (centroid subtraction + SVD).
* ``point_normal_registration``  - globally optimal weighted alignment of points
  with unit normals; the rotation comes from the SVD of the combined point and
  normal cross-covariance, the translation from point terms only (normals carry
  no translation information).
* ``rotation_mean_chordal``      - weighted chordal mean of rotation samples,
  the non-minimal solver used for robust rotation averaging.

``gnc_tls`` wraps any of them in graduated non-convexity for the truncated
least squares cost sum_i min(r_i^2 / zeta_i^2, c_bar^2): it alternates weighted
refits with closed-form weight updates while the surrogate parameter mu grows.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .errors import DegenerateGeometryError, RankDeficientError
from .geometry import (
    RigidTransform,
    Rotation,
    geodesic_distance,
    geodesic_distance_batch,
    project_to_so3,
)
from .measurements import PointNormalPairs, PointPairs, RotationSamples

MU_FLOOR = 1e-6


def _as_weights(weights: np.ndarray | None, n: int) -> np.ndarray:
    if weights is None:
        return np.ones(n)
    w = np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise ValueError(f"weights must have shape ({n},), got {w.shape}")
    if np.any(w < 0.0) or np.any(w > 1.0):
        raise ValueError("weights must lie in [0, 1]")
    return w


def horn_registration(pairs: PointPairs, weights: np.ndarray | None = None) -> RigidTransform:
    """Weighted least-squares rigid transform aligning a onto b.

    Globally optimal for sum_i w_i ||b_i - R a_i - t||^2. Requires at least three
    positively weighted pairs with non-collinear support.
    """
    w = _as_weights(weights, len(pairs))
    if np.count_nonzero(w > 0.0) < 3:
        raise DegenerateGeometryError("need at least 3 positively weighted pairs")
    sw = w.sum()
    a_bar = (w[:, None] * pairs.a).sum(axis=0) / sw
    b_bar = (w[:, None] * pairs.b).sum(axis=0) / sw
    a_t = pairs.a - a_bar
    b_t = pairs.b - b_bar
    m = (w[:, None] * b_t).T @ a_t
    try:
        r = project_to_so3(m)
    except RankDeficientError as exc:
        raise DegenerateGeometryError(f"degenerate point support: {exc}") from exc
    return RigidTransform(Rotation(r), b_bar - r @ a_bar)


@dataclass(frozen=True)
class PnConfig:
    """Per-pair weighting of the point-with-normal objective.

    ``eta`` scales point terms, ``kappa`` scales normal terms; either may be a
    scalar or a per-pair array. kappa = 0 recovers plain point registration.
    """

    eta: float | np.ndarray = 1.0
    kappa: float | np.ndarray = 1.0

    def resolved(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        eta = np.broadcast_to(np.asarray(self.eta, dtype=float), (n,)).copy()
        kappa = np.broadcast_to(np.asarray(self.kappa, dtype=float), (n,)).copy()
        if np.any(eta <= 0.0):
            raise ValueError("eta must be positive")
        if np.any(kappa < 0.0):
            raise ValueError("kappa must be nonnegative")
        return eta, kappa

    @classmethod
    def from_bounds(cls, beta: float, beta_normal: float, rho: float = 1.0) -> "PnConfig":
        """Noise-normalized weighting: eta = 1/beta^2, kappa = rho/beta_normal^2."""
        return cls(eta=1.0 / beta**2, kappa=rho / beta_normal**2)


def point_normal_registration(
    pairs: PointNormalPairs,
    weights: np.ndarray | None = None,
    cfg: PnConfig | None = None,
) -> RigidTransform:
    """Globally optimal weighted alignment of points with normals.

    Minimizes sum_i w_i (eta_i ||b_i - R a_i - t||^2 + kappa_i ||n_i - R m_i||^2).
    The rotation is the SO(3) projection of
    M = sum_i w_i eta_i b~_i a~_i^T + sum_i w_i kappa_i n_i m_i^T
    and t = b_bar - R a_bar with centers weighted by the point weights only.
    """
    n = len(pairs)
    w = _as_weights(weights, n)
    cfg = cfg or PnConfig()
    eta, kappa = cfg.resolved(n)
    if np.count_nonzero(w > 0.0) < 2:
        raise DegenerateGeometryError("need at least 2 positively weighted pairs")
    we = w * eta
    wk = w * kappa
    swe = we.sum()
    a_bar = (we[:, None] * pairs.a).sum(axis=0) / swe
    b_bar = (we[:, None] * pairs.b).sum(axis=0) / swe
    a_t = pairs.a - a_bar
    b_t = pairs.b - b_bar
    m = (we[:, None] * b_t).T @ a_t + (wk[:, None] * pairs.nb).T @ pairs.ma
    try:
        r = project_to_so3(m)
    except RankDeficientError as exc:
        raise DegenerateGeometryError(f"degenerate point/normal support: {exc}") from exc
    return RigidTransform(Rotation(r), b_bar - r @ a_bar)


def rotation_mean_chordal(
    samples: RotationSamples | np.ndarray, weights: np.ndarray | None = None
) -> Rotation:
    """Weighted chordal mean: argmin_R sum_i w_i ||R - R_i||_F^2."""
    rotations = samples.rotations if isinstance(samples, RotationSamples) else np.asarray(samples)
    w = _as_weights(weights, len(rotations))
    if w.sum() <= 0.0:
        raise DegenerateGeometryError("weights sum to zero")
    s = np.einsum("n,nij->ij", w, rotations)
    try:
        return Rotation(project_to_so3(s))
    except RankDeficientError as exc:
        raise DegenerateGeometryError(f"degenerate rotation sample support: {exc}") from exc


def rotavg_residual(estimate: Rotation | np.ndarray, sample: Rotation | np.ndarray) -> float:
    """Residual of one rotation sample against an estimate: geodesic distance."""
    return geodesic_distance(estimate, sample)


# ---------------------------------------------------------------------------
# graduated non-convexity for truncated least squares
# ---------------------------------------------------------------------------


class GncProblem(Protocol):
    def __len__(self) -> int: ...

    def solve_weighted(self, weights: np.ndarray): ...

    def residuals(self, estimate) -> np.ndarray: ...


@dataclass(frozen=True)
class GncConfig:
    """Tuning of the truncated-least-squares surrogate.

    ``zeta`` is the residual scale at which a measurement stops counting as an
    inlier (scalar or per-measurement); ``c_bar`` the truncation constant.
    """

    zeta: float | np.ndarray
    c_bar: float = 1.0
    mu_update_factor: float = 1.4
    max_iterations: int = 100
    convergence_tol: float = 1e-6

    def __post_init__(self):
        if np.any(np.asarray(self.zeta) <= 0.0):
            raise ValueError("zeta must be positive")
        if self.c_bar <= 0.0:
            raise ValueError("c_bar must be positive")
        if self.mu_update_factor <= 1.0:
            raise ValueError("mu_update_factor must exceed 1")


@dataclass
class GncResult:
    estimate: object
    weights: np.ndarray
    converged: bool
    iterations: int


def tls_cost(residuals: np.ndarray, cfg: GncConfig) -> float:
    """Truncated least squares cost sum_i min(r_i^2 / zeta_i^2, c_bar^2)."""
    z = np.broadcast_to(np.asarray(cfg.zeta, dtype=float), residuals.shape)
    return float(np.sum(np.minimum((residuals / z) ** 2, cfg.c_bar**2)))


def gnc_tls(problem: GncProblem, cfg: GncConfig) -> GncResult:
    """Graduated non-convexity for the TLS cost.

    Starts from the all-ones weighted fit, then alternates the closed-form
    weight update (1 inside the inlier band, 0 outside, the square-root
    interpolation in between) with weighted refits while mu grows by
    ``mu_update_factor``. Non-convergence is reported as a flag, not an error.
    """
    n = len(problem)
    zeta = np.broadcast_to(np.asarray(cfg.zeta, dtype=float), (n,))
    eps2 = (cfg.c_bar * zeta) ** 2
    eps2_bar = float(eps2.mean())

    weights = np.ones(n)
    estimate = problem.solve_weighted(weights)
    r = np.asarray(problem.residuals(estimate), dtype=float)
    max_r2 = float(np.max(r**2)) if n else 0.0
    denom = 2.0 * max_r2 - eps2_bar
    mu = max(eps2_bar / denom, MU_FLOOR) if denom > 0.0 else MU_FLOOR

    converged = False
    iterations = 0
    for iterations in range(1, cfg.max_iterations + 1):
        r2 = r**2
        lo = mu / (mu + 1.0) * eps2
        hi = (mu + 1.0) / mu * eps2
        mid = np.sqrt(eps2 * mu * (mu + 1.0) / np.maximum(r2, 1e-300)) - mu
        new_weights = np.where(r2 <= lo, 1.0, np.where(r2 >= hi, 0.0, mid))
        delta = float(np.max(np.abs(new_weights - weights))) if n else 0.0
        weights = new_weights
        if weights.sum() <= 0.0:
            break
        estimate = problem.solve_weighted(weights)
        r = np.asarray(problem.residuals(estimate), dtype=float)
        mu *= cfg.mu_update_factor
        if delta < cfg.convergence_tol:
            converged = True
            break
    return GncResult(estimate, weights, converged, iterations)


class RotationAveragingProblem:
    """Chordal-mean inner solver with geodesic residuals."""

    def __init__(self, samples: RotationSamples | np.ndarray):
        self.rotations = samples.rotations if isinstance(samples, RotationSamples) else np.asarray(samples)

    def __len__(self) -> int:
        return len(self.rotations)

    def solve_weighted(self, weights: np.ndarray) -> Rotation:
        return rotation_mean_chordal(self.rotations, weights)

    def residuals(self, estimate: Rotation) -> np.ndarray:
        return geodesic_distance_batch(estimate, self.rotations)


class RegistrationProblem:
    """Horn inner solver with point-distance residuals."""

    def __init__(self, pairs: PointPairs):
        self.pairs = pairs

    def __len__(self) -> int:
        return len(self.pairs)

    def solve_weighted(self, weights: np.ndarray) -> RigidTransform:
        return horn_registration(self.pairs, weights)

    def residuals(self, estimate: RigidTransform) -> np.ndarray:
        return np.linalg.norm(self.pairs.b - estimate.apply(self.pairs.a), axis=1)


class PointNormalProblem:
    """Point-with-normal inner solver; residuals combine both terms:
    r_i = sqrt(eta_i ||b_i - R a_i - t||^2 + kappa_i ||n_i - R m_i||^2)."""

    def __init__(self, pairs: PointNormalPairs, cfg: PnConfig | None = None):
        self.pairs = pairs
        self.cfg = cfg or PnConfig()
        self.eta, self.kappa = self.cfg.resolved(len(pairs))

    def __len__(self) -> int:
        return len(self.pairs)

    def solve_weighted(self, weights: np.ndarray) -> RigidTransform:
        return point_normal_registration(self.pairs, weights, self.cfg)

    def residuals(self, estimate: RigidTransform) -> np.ndarray:
        pt = np.sum((self.pairs.b - estimate.apply(self.pairs.a)) ** 2, axis=1)
        nm = np.sum((self.pairs.nb - estimate.rotation.apply(self.pairs.ma)) ** 2, axis=1)
        return np.sqrt(self.eta * pt + self.kappa * nm)
