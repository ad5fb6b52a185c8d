"""Synthetic dataset generators for the Monte Carlo harness.

Each generator is deterministic given the experiment seed and returns the
ground truth, the measurement set, and a boolean inlier mask. Inlier noise is
Gaussian, rejection-sampled until it respects the declared noise bound, so
generated inliers are inliers by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .geometry import (
    RigidTransform,
    Rotation,
    exp_so3,
    random_rotation,
    random_unit_vector,
)
from .measurements import Camera2D3D, PointNormalPairs, PointPairs, RotationSamples

# pinhole used for cross-ratio data; intrinsics cancel in the invariant, so any
# in-view-consistent choice works
IMAGE_W = 640.0
IMAGE_H = 480.0
FOCAL = 500.0
PRINCIPAL = (320.0, 240.0)

# default noise bound multipliers: 5.54 sigma makes exceeding the bound a
# <=1e-6 event for 3D Gaussian noise; the pixel bound for cross-ratio data is
# 2.5 sigma (0.25 px at sigma = 0.1)
BOUND_FACTOR = 5.54
BOUND_FACTOR_CROSSRATIO = 2.5

VALID_PROBLEMS = ("rotavg", "registration", "registration_normals", "crossratio")
VALID_MODES = ("max_clique", "max_kcore", "none")
VALID_SOLVERS = ("gnc", "closed_form")


@dataclass(frozen=True)
class ExperimentSpec:
    """One synthetic experiment configuration."""

    problem: str
    n_measurements: int
    outlier_rate: float
    noise_sigma: float
    noise_bound: float | None = None
    noise_sigma_normal: float | None = None
    noise_bound_normal: float | None = None
    n_runs: int = 1
    rng_seed: int = 0
    mode: str = "max_clique"
    solver: str = "gnc"

    def __post_init__(self):
        if self.problem not in VALID_PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}")
        if not 0.0 <= self.outlier_rate < 1.0:
            raise ValueError("outlier_rate must be in [0, 1)")
        if self.n_measurements < 1:
            raise ValueError("n_measurements must be >= 1")
        if self.n_runs < 1:
            raise ValueError("n_runs must be >= 1")
        if self.mode not in VALID_MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.solver not in VALID_SOLVERS:
            raise ValueError(f"unknown solver {self.solver!r}")

    @property
    def beta(self) -> float:
        if self.noise_bound is not None:
            return self.noise_bound
        if self.noise_sigma <= 0.0:
            raise ValueError("noise_bound is required when noise_sigma is 0")
        factor = BOUND_FACTOR_CROSSRATIO if self.problem == "crossratio" else BOUND_FACTOR
        return factor * self.noise_sigma

    @property
    def beta_normal(self) -> float:
        if self.noise_bound_normal is not None:
            return self.noise_bound_normal
        return self.beta

    @property
    def sigma_normal(self) -> float:
        if self.noise_sigma_normal is not None:
            return self.noise_sigma_normal
        return self.noise_sigma

    def with_seed(self, seed: int) -> "ExperimentSpec":
        return replace(self, rng_seed=seed)


def _inlier_count(n: int, outlier_rate: float) -> int:
    return int(round(n * (1.0 - outlier_rate)))


def _inlier_mask(rng: np.random.Generator, n: int, outlier_rate: float) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    mask[rng.permutation(n)[: _inlier_count(n, outlier_rate)]] = True
    return mask


def _bounded_gaussian(rng: np.random.Generator, n: int, dim: int, sigma: float, bound: float) -> np.ndarray:
    """n rows of N(0, sigma^2 I_dim) resampled until each row norm is <= bound."""
    out = sigma * rng.standard_normal((n, dim))
    bad = np.linalg.norm(out, axis=1) > bound
    while bad.any():
        out[bad] = sigma * rng.standard_normal((int(bad.sum()), dim))
        bad = np.linalg.norm(out, axis=1) > bound
    return out


def _uniform_ball(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    v = random_unit_vector(rng, n)
    return v * radius * rng.uniform(0.0, 1.0, size=n)[:, None] ** (1.0 / 3.0)


def gen_rotavg(spec: ExperimentSpec) -> tuple[Rotation, RotationSamples, np.ndarray]:
    """Rotation samples R_i = R0 Exp(theta_i u_i) with |theta_i| <= beta for
    inliers and uniformly random rotations for outliers."""
    rng = np.random.default_rng(spec.rng_seed)
    beta = spec.beta
    n = spec.n_measurements
    mask = _inlier_mask(rng, n, spec.outlier_rate)
    n_in = int(mask.sum())

    r0 = random_rotation(rng)
    rotations = np.empty((n, 3, 3))
    axes = random_unit_vector(rng, max(n_in, 1)).reshape(max(n_in, 1), 3)
    thetas = _bounded_gaussian(rng, max(n_in, 1), 1, spec.noise_sigma, beta)[:, 0]
    inlier_rots = np.stack([r0 @ exp_so3(t * u) for t, u in zip(thetas, axes)]) if n_in else np.zeros((0, 3, 3))
    rotations[mask] = inlier_rots[:n_in]
    n_out = n - n_in
    if n_out:
        rotations[~mask] = random_rotation(rng, n_out)
    return Rotation(r0), RotationSamples(rotations, beta), mask


def _random_transform(rng: np.random.Generator) -> RigidTransform:
    r = random_rotation(rng)
    t = _uniform_ball(rng, 1, 1.0)[0]
    return RigidTransform(Rotation(r), t)


def gen_registration(
    spec: ExperimentSpec,
    with_normals: bool = False,
    source_points: np.ndarray | None = None,
    source_normals: np.ndarray | None = None,
) -> tuple[RigidTransform, PointPairs | PointNormalPairs, np.ndarray]:
    """Point (or point-with-normal) correspondences under a random transform.

    Source points default to uniform draws in the unit cube; a real cloud may
    be passed instead. Outlier targets are uniform in a radius-5 ball, outlier
    normals uniformly random.
    """
    rng = np.random.default_rng(spec.rng_seed)
    beta = spec.beta
    if source_points is not None:
        a = np.asarray(source_points, dtype=float)
        n = a.shape[0]
    else:
        n = spec.n_measurements
        a = rng.uniform(0.0, 1.0, size=(n, 3))
    mask = _inlier_mask(rng, n, spec.outlier_rate)
    gt = _random_transform(rng)

    b = gt.apply(a) + _bounded_gaussian(rng, n, 3, spec.noise_sigma, beta)
    n_out = int((~mask).sum())
    if n_out:
        b[~mask] = _uniform_ball(rng, n_out, 5.0)
    if not with_normals:
        return gt, PointPairs(a, b, beta), mask

    beta_n = spec.beta_normal
    if source_normals is not None:
        ma = np.asarray(source_normals, dtype=float)
    else:
        ma = random_unit_vector(rng, n)
    nu = _bounded_gaussian(rng, n, 3, spec.sigma_normal, beta_n)
    nb = np.stack([gt.rotation.m @ exp_so3(v) @ m for v, m in zip(nu, ma)])
    if n_out:
        nb[~mask] = random_unit_vector(rng, n_out)
    # renormalize against accumulated round-off
    nb /= np.linalg.norm(nb, axis=1, keepdims=True)
    return gt, PointNormalPairs(a, ma, b, nb, beta, beta_n), mask


def gen_registration_all_to_all(
    n_source: int,
    overlap: float,
    noise_sigma: float,
    noise_bound: float,
    rng_seed: int = 0,
    with_normals: bool = False,
    normal_bound: float | None = None,
) -> tuple[RigidTransform, PointPairs | PointNormalPairs, np.ndarray]:
    """Correspondence-free registration: every source point is paired with every
    retained transformed point. Partial overlap discards a fraction of the
    transformed cloud; a pair is an inlier iff it matches identities."""
    if not 0.0 < overlap <= 1.0:
        raise ValueError("overlap must be in (0, 1]")
    rng = np.random.default_rng(rng_seed)
    a_src = rng.uniform(0.0, 1.0, size=(n_source, 3))
    gt = _random_transform(rng)
    n_keep = int(round(overlap * n_source))
    keep = np.sort(rng.permutation(n_source)[:n_keep])
    b_kept = gt.apply(a_src[keep]) + _bounded_gaussian(rng, n_keep, 3, noise_sigma, noise_bound)

    src_idx = np.repeat(np.arange(n_source), n_keep)
    tgt_idx = np.tile(np.arange(n_keep), n_source)
    a = a_src[src_idx]
    b = b_kept[tgt_idx]
    mask = keep[tgt_idx] == src_idx
    if not with_normals:
        return gt, PointPairs(a, b, noise_bound), mask

    beta_n = normal_bound if normal_bound is not None else noise_bound
    m_src = random_unit_vector(rng, n_source)
    nu = _bounded_gaussian(rng, n_keep, 3, noise_sigma, beta_n)
    n_kept_vec = np.stack([gt.rotation.m @ exp_so3(v) @ m for v, m in zip(nu, m_src[keep])])
    n_kept_vec /= np.linalg.norm(n_kept_vec, axis=1, keepdims=True)
    pairs = PointNormalPairs(a, m_src[src_idx], b, n_kept_vec[tgt_idx], noise_bound, beta_n)
    return gt, pairs, mask


def project_pinhole(p: np.ndarray) -> np.ndarray:
    """Pixel projection of camera-frame points with the harness intrinsics."""
    p = np.asarray(p, dtype=float)
    cx, cy = PRINCIPAL
    u = FOCAL * p[..., 0] / p[..., 2] + cx
    v = FOCAL * p[..., 1] / p[..., 2] + cy
    return np.stack([u, v], axis=-1)


def gen_crossratio(spec: ExperimentSpec) -> tuple[Camera2D3D, np.ndarray]:
    """Collinear 3D points with pixel observations.

    Two random in-view pixels are back-projected at random depths to define a
    3D segment in the camera frame; points are sampled on the segment and
    projected back. Inlier pixels get bounded noise; outliers are replaced by
    uniform image points. The 3D points stay exact (outliers corrupt pixels).
    """
    rng = np.random.default_rng(spec.rng_seed)
    beta = spec.beta
    n = spec.n_measurements
    mask = _inlier_mask(rng, n, spec.outlier_rate)
    cx, cy = PRINCIPAL

    while True:
        px = rng.uniform(0.0, IMAGE_W, size=2)
        py = rng.uniform(0.0, IMAGE_H, size=2)
        if np.hypot(px[1] - px[0], py[1] - py[0]) >= 50.0:  # well-spread segment
            break
    depths = rng.uniform(2.0, 8.0, size=2)
    ends = np.stack(
        [depths * (px - cx) / FOCAL, depths * (py - cy) / FOCAL, depths], axis=1
    )
    t = rng.uniform(0.0, 1.0, size=n)
    p = ends[0] + t[:, None] * (ends[1] - ends[0])

    y = project_pinhole(p)
    y[mask] += _bounded_gaussian(rng, int(mask.sum()), 2, spec.noise_sigma, beta)
    n_out = int((~mask).sum())
    if n_out:
        y[~mask] = np.column_stack(
            [rng.uniform(0.0, IMAGE_W, size=n_out), rng.uniform(0.0, IMAGE_H, size=n_out)]
        )
    return Camera2D3D(p, y, beta), mask


def load_points_file(path: str | Path) -> tuple[np.ndarray, np.ndarray | None]:
    """Whitespace point cloud: rows of 'x y z' or 'x y z nx ny nz'.

    Returns (points, normals-or-None); normals are renormalized.
    """
    rows = []
    width = None
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) not in (3, 6):
            raise ValueError(f"{path}: line {lineno}: expected 3 or 6 columns, got {len(parts)}")
        if width is None:
            width = len(parts)
        elif len(parts) != width:
            raise ValueError(f"{path}: line {lineno}: inconsistent column count")
        try:
            rows.append([float(x) for x in parts])
        except ValueError as exc:
            raise ValueError(f"{path}: line {lineno}: {exc}") from None
    if not rows:
        raise ValueError(f"{path}: no points found")
    data = np.asarray(rows)
    if width == 3:
        return data, None
    normals = data[:, 3:6]
    norms = np.linalg.norm(normals, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ValueError(f"{path}: zero-length normal")
    return data[:, :3], normals / norms
