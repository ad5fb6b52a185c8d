"""Compatibility tests for measurement subsets.

Each test is sound: it passes whenever the subset contains only inliers (noise
within the declared bound), so a failure proves the subset contains at least one
outlier. The pairwise tests (rotations, points, points with normals) take subsets
of size 2; the cross-ratio test takes subsets of size 4.

Scalar functions here are the reference semantics; the ``pairwise_*`` /
``crossratio_*`` batch helpers are the vectorized equivalents consumed by the
graph builder and are tested for exact agreement with the scalar forms.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateSubsetError
from .geometry import Rotation, as_matrix, geodesic_distance

COLLINEARITY_TOL = 1e-6
_DEGENERATE_DIST = 1e-12


def test_rotation_pair(r_i: Rotation | np.ndarray, r_j: Rotation | np.ndarray, beta: float) -> bool:
    """Pair of rotation samples is compatible iff their geodesic distance is <= 2*beta."""
    return geodesic_distance(r_i, r_j) <= 2.0 * beta


def test_point_pair(
    a_i: np.ndarray, a_j: np.ndarray, b_i: np.ndarray, b_j: np.ndarray, beta: float
) -> bool:
    """Pair of point correspondences is compatible iff the two intra-cloud
    distances agree within 2*beta: | ||b_j - b_i|| - ||a_j - a_i|| | <= 2*beta."""
    da = float(np.linalg.norm(np.subtract(a_j, a_i)))
    db = float(np.linalg.norm(np.subtract(b_j, b_i)))
    return abs(db - da) <= 2.0 * beta


def normal_angle_compatible(c_a: float, c_b: float, beta_normal: float) -> bool:
    """Trig-free test of |arccos(c_b) - arccos(c_a)| <= 2*beta_normal.

    Uses cos2b = cos(2*beta_normal) and the identity
    |arccos(c_b) - arccos(c_a)| = arccos(c_a c_b + sqrt((1-c_a^2)(1-c_b^2))).
    Squaring the rearranged inequality is valid only when its right side
    cos2b - c_a c_b is nonnegative; when it is negative the inequality holds
    automatically.  Angle differences never exceed pi, so 2*beta_normal >= pi
    always passes.
    """
    two_beta = 2.0 * beta_normal
    if two_beta >= np.pi:
        return True
    c_a = float(np.clip(c_a, -1.0, 1.0))
    c_b = float(np.clip(c_b, -1.0, 1.0))
    cos2b = np.cos(two_beta)
    if cos2b - c_a * c_b <= 0.0:
        return True
    return 2.0 * cos2b * c_a * c_b + 1.0 - c_a * c_a - c_b * c_b >= cos2b * cos2b


def test_point_normal_pair(
    pair_i: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray],
    pair_j: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray],
    beta: float,
    beta_normal: float | None = None,
) -> bool:
    """Pair of point-with-normal correspondences; each pair is (a, m, b, n).

    Compatible iff the point condition of test_point_pair holds with ``beta`` AND
    the normal dot products m_i.m_j vs n_i.n_j pass normal_angle_compatible with
    ``beta_normal`` (defaults to ``beta``, read in radians).
    """
    a_i, m_i, b_i, n_i = (np.asarray(x, dtype=float) for x in pair_i)
    a_j, m_j, b_j, n_j = (np.asarray(x, dtype=float) for x in pair_j)
    for name, v in (("m_i", m_i), ("n_i", n_i), ("m_j", m_j), ("n_j", n_j)):
        if abs(np.linalg.norm(v) - 1.0) > 1e-9:
            raise ValueError(f"{name} must be a unit vector")
    if beta_normal is None:
        beta_normal = beta
    if not test_point_pair(a_i, a_j, b_i, b_j, beta):
        return False
    return normal_angle_compatible(float(m_i @ m_j), float(n_i @ n_j), beta_normal)


def vee_project(p: np.ndarray) -> np.ndarray:
    """Perspective normalization [p_x/p_z, p_y/p_z] of points with positive depth."""
    p = np.asarray(p, dtype=float)
    return p[..., :2] / p[..., 2:3]


def _line_residuals(points: np.ndarray) -> np.ndarray:
    """Perpendicular distance of each point from the total-least-squares line fit."""
    pts = np.asarray(points, dtype=float)
    center = pts.mean(axis=0)
    centered = pts - center
    # principal direction of the centered cloud
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    direction = vt[0]
    along = centered @ direction
    perp = centered - np.outer(along, direction)
    return np.linalg.norm(perp, axis=1)


def cross_ratio_3d(p1: np.ndarray, p2: np.ndarray, p3: np.ndarray, p4: np.ndarray) -> float:
    """Cross ratio of four collinear 3D points with positive depth.

    tau = (||v1 - v2|| * ||v3 - v4||) / (||v1 - v3|| * ||v2 - v4||) with v_k the
    perspective normalization of p_k. Raises DegenerateSubsetError when the points
    are not collinear (TLS line-fit residual >= 1e-6), a denominator distance is
    below 1e-12, or the points are not distinct.
    """
    pts = np.stack([np.asarray(p, dtype=float) for p in (p1, p2, p3, p4)])
    if np.any(pts[:, 2] <= 0.0):
        raise DegenerateSubsetError("all points must have z > 0")
    if float(_line_residuals(pts).max()) >= COLLINEARITY_TOL:
        raise DegenerateSubsetError("points are not collinear within 1e-6")
    v = vee_project(pts)
    d12 = np.linalg.norm(v[0] - v[1])
    d34 = np.linalg.norm(v[2] - v[3])
    d13 = np.linalg.norm(v[0] - v[2])
    d24 = np.linalg.norm(v[1] - v[3])
    if min(d12, d34, d13, d24) < _DEGENERATE_DIST:
        raise DegenerateSubsetError("coincident points in cross-ratio subset")
    return float((d12 * d34) / (d13 * d24))


def cross_ratio_bounds(
    y1: np.ndarray, y2: np.ndarray, y3: np.ndarray, y4: np.ndarray, beta: float
) -> tuple[float, float]:
    """Interval (L, U) that the true cross ratio must fall in for an inlier quadruple.

    L = ((d12-2b)(d34-2b)) / ((d13+2b)(d24+2b)) and
    U = ((d12+2b)(d34+2b)) / ((d13-2b)(d24-2b)) on pixel distances d_ij.
    A nonpositive factor in L's numerator clamps L to 0; a nonpositive factor in
    U's denominator makes U infinite (the bound is vacuous).
    """
    ys = np.stack([np.asarray(y, dtype=float) for y in (y1, y2, y3, y4)])
    two_b = 2.0 * beta
    d12 = np.linalg.norm(ys[0] - ys[1])
    d34 = np.linalg.norm(ys[2] - ys[3])
    d13 = np.linalg.norm(ys[0] - ys[2])
    d24 = np.linalg.norm(ys[1] - ys[3])
    if d12 - two_b <= 0.0 or d34 - two_b <= 0.0:
        lower = 0.0
    else:
        lower = (d12 - two_b) * (d34 - two_b) / ((d13 + two_b) * (d24 + two_b))
    if d13 - two_b <= 0.0 or d24 - two_b <= 0.0:
        upper = np.inf
    else:
        upper = (d12 + two_b) * (d34 + two_b) / ((d13 - two_b) * (d24 - two_b))
    return float(lower), float(upper)


def test_cross_ratio(
    y1: np.ndarray, y2: np.ndarray, y3: np.ndarray, y4: np.ndarray, tau: float, beta: float
) -> bool:
    """Quadruple of 2D-3D correspondences is compatible iff L < tau < U (strict)."""
    lower, upper = cross_ratio_bounds(y1, y2, y3, y4, beta)
    return lower < tau < upper


# The three inequivalent orderings of four points: each defines a different
# cross ratio over the six pairwise distances, and each must satisfy its own
# interval test for an all-inlier quadruple.
CROSSRATIO_PAIRINGS = ((0, 1, 2, 3), (0, 1, 3, 2), (0, 2, 3, 1))


def pixel_collinearity_gap(pixels: np.ndarray) -> float:
    """Smallest eigenvalue of the 2x2 scatter of pixels: the sum of squared
    perpendicular residuals against the TLS line fit."""
    pts = np.asarray(pixels, dtype=float)
    c = pts - pts.mean(axis=0)
    sxx = float(c[:, 0] @ c[:, 0])
    syy = float(c[:, 1] @ c[:, 1])
    sxy = float(c[:, 0] @ c[:, 1])
    tr = sxx + syy
    det = sxx * syy - sxy * sxy
    return (tr - np.sqrt(max(tr * tr - 4.0 * det, 0.0))) / 2.0


def test_crossratio_subset(p_quad: np.ndarray, y_quad: np.ndarray, beta: float) -> bool:
    """Full compatibility test of one 2D-3D quadruple, as used by the graph builder.

    A quadruple of inliers must satisfy (i) the cross-ratio interval test for
    every inequivalent ordering of the four points (the bound derivation holds
    for any ordering) and (ii) pixel collinearity: projections of collinear 3D
    points are collinear, so with per-pixel noise at most beta the TLS residual
    of the four pixels obeys sum r^2 <= 4 beta^2. Degenerate 3D subsets cannot
    certify compatibility and fail.
    """
    p = np.asarray(p_quad, dtype=float).reshape(4, 3)
    y = np.asarray(y_quad, dtype=float).reshape(4, 2)
    if pixel_collinearity_gap(y) > 4.0 * beta * beta:
        return False
    for perm in CROSSRATIO_PAIRINGS:
        try:
            tau = cross_ratio_3d(*p[list(perm)])
        except DegenerateSubsetError:
            return False
        if not test_cross_ratio(*y[list(perm)], tau, beta):
            return False
    return True


# ---------------------------------------------------------------------------
# vectorized forms used by the graph builder
# ---------------------------------------------------------------------------


def pairwise_rotation_compat(rotations: np.ndarray, beta: float) -> np.ndarray:
    """Boolean (N, N) matrix of test_rotation_pair over all pairs."""
    flat = rotations.reshape(len(rotations), 9)
    traces = flat @ flat.T
    ang = np.arccos(np.clip((traces - 1.0) / 2.0, -1.0, 1.0))
    return ang <= 2.0 * beta


def _pairwise_distances(points: np.ndarray) -> np.ndarray:
    sq = np.sum(points * points, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (points @ points.T)
    return np.sqrt(np.clip(d2, 0.0, None))


def pairwise_point_compat(a: np.ndarray, b: np.ndarray, beta: float) -> np.ndarray:
    """Boolean (N, N) matrix of test_point_pair over all pairs."""
    return np.abs(_pairwise_distances(b) - _pairwise_distances(a)) <= 2.0 * beta


def pairwise_point_normal_compat(
    a: np.ndarray, ma: np.ndarray, b: np.ndarray, nb: np.ndarray, beta: float, beta_normal: float
) -> np.ndarray:
    """Boolean (N, N) matrix of test_point_normal_pair over all pairs."""
    point_ok = pairwise_point_compat(a, b, beta)
    if 2.0 * beta_normal >= np.pi:
        return point_ok
    c_a = np.clip(ma @ ma.T, -1.0, 1.0)
    c_b = np.clip(nb @ nb.T, -1.0, 1.0)
    cos2b = np.cos(2.0 * beta_normal)
    auto_pass = cos2b - c_a * c_b <= 0.0
    squared_ok = 2.0 * cos2b * c_a * c_b + 1.0 - c_a**2 - c_b**2 >= cos2b**2
    return point_ok & (auto_pass | squared_ok)


def crossratio_values(vee_dist: np.ndarray, quads: np.ndarray) -> np.ndarray:
    """Cross ratios for index quadruples given the (N, N) distance matrix of
    perspective-normalized 3D points. Degenerate quadruples yield nan."""
    q0, q1, q2, q3 = quads[:, 0], quads[:, 1], quads[:, 2], quads[:, 3]
    num = vee_dist[q0, q1] * vee_dist[q2, q3]
    den = vee_dist[q0, q2] * vee_dist[q1, q3]
    with np.errstate(divide="ignore", invalid="ignore"):
        tau = np.where(den < _DEGENERATE_DIST, np.nan, num / den)
    return tau


def crossratio_collinear_pixels(y: np.ndarray, quads: np.ndarray, beta: float) -> np.ndarray:
    """Boolean mask of the pixel-collinearity condition per index quadruple."""
    pts = y[quads]  # (M, 4, 2)
    c = pts - pts.mean(axis=1, keepdims=True)
    sxx = np.einsum("mk,mk->m", c[:, :, 0], c[:, :, 0])
    syy = np.einsum("mk,mk->m", c[:, :, 1], c[:, :, 1])
    sxy = np.einsum("mk,mk->m", c[:, :, 0], c[:, :, 1])
    tr = sxx + syy
    det = sxx * syy - sxy * sxy
    lam_min = (tr - np.sqrt(np.clip(tr * tr - 4.0 * det, 0.0, None))) / 2.0
    return lam_min <= 4.0 * beta * beta


def crossratio_compat(
    pixel_dist: np.ndarray, quads: np.ndarray, tau: np.ndarray, beta: float
) -> np.ndarray:
    """Boolean mask of test_cross_ratio for index quadruples, given the (N, N)
    pixel distance matrix. nan cross ratios never pass."""
    q0, q1, q2, q3 = quads[:, 0], quads[:, 1], quads[:, 2], quads[:, 3]
    two_b = 2.0 * beta
    d12 = pixel_dist[q0, q1]
    d34 = pixel_dist[q2, q3]
    d13 = pixel_dist[q0, q2]
    d24 = pixel_dist[q1, q3]
    lower = (d12 - two_b) * (d34 - two_b) / ((d13 + two_b) * (d24 + two_b))
    lower = np.where((d12 - two_b <= 0.0) | (d34 - two_b <= 0.0), 0.0, lower)
    u_num = (d12 + two_b) * (d34 + two_b)
    u_den = (d13 - two_b) * (d24 - two_b)
    with np.errstate(divide="ignore", invalid="ignore"):
        upper = np.where((d13 - two_b <= 0.0) | (d24 - two_b <= 0.0), np.inf, u_num / u_den)
    with np.errstate(invalid="ignore"):
        ok = (lower < tau) & (tau < upper)
    return ok & np.isfinite(tau)
