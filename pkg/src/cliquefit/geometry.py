"""Minimal 3D geometry kernel: SO(3) exp/log, geodesic distance, rigid transforms,
and SVD projection onto SO(3).

Rotations are stored as 3x3 matrices throughout; every public operation is a pure
function and safe for concurrent use. Batch variants operate on stacked (N, 3, 3)
arrays and are used by the graph builder and the estimators.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import RankDeficientError

# Below this angle (radians) exp/log switch to series expansions.
SMALL_ANGLE = 1e-8

_ORTHO_TOL = 1e-9


def _hat(v: np.ndarray) -> np.ndarray:
    """Skew-symmetric matrix such that _hat(v) @ w == cross(v, w)."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def exp_so3(axis_angle: np.ndarray) -> np.ndarray:
    """Rodrigues' formula mapping an axis-angle vector (radians) to a rotation matrix.

    Total function: exp_so3(0) is the identity; angles below SMALL_ANGLE use a
    second-order series, accurate to well under 1e-12.
    """
    v = np.asarray(axis_angle, dtype=float)
    theta = float(np.linalg.norm(v))
    k = _hat(v)
    if theta < SMALL_ANGLE:
        return np.eye(3) + k + 0.5 * (k @ k)
    axis_hat = k / theta
    return (
        np.eye(3)
        + np.sin(theta) * axis_hat
        + (1.0 - np.cos(theta)) * (axis_hat @ axis_hat)
    )


def log_so3(r: "Rotation | np.ndarray") -> np.ndarray:
    """Inverse of exp_so3: axis-angle vector of a rotation matrix, with angle in [0, pi].

    Near the identity a first-order formula is used; near pi the axis is recovered
    from the diagonal of the matrix and its sign fixed against the skew part.
    """
    m = as_matrix(r)
    cos_theta = np.clip((np.trace(m) - 1.0) / 2.0, -1.0, 1.0)
    theta = float(np.arccos(cos_theta))
    w = 0.5 * np.array([m[2, 1] - m[1, 2], m[0, 2] - m[2, 0], m[1, 0] - m[0, 1]])
    if theta < SMALL_ANGLE:
        return w
    if theta > np.pi - 1e-6:
        # axis magnitudes from R = cos(t) I + (1 - cos(t)) u u^T + sin(t) hat(u)
        d = (np.diag(m) - cos_theta) / (1.0 - cos_theta)
        axis = np.sqrt(np.clip(d, 0.0, None))
        # off-diagonal sums (1 - cos(t)) u_i u_j recover relative signs
        i = int(np.argmax(axis))
        j, l = [(1, 2), (0, 2), (0, 1)][i]
        axis[j] = np.copysign(axis[j], m[i, j] + m[j, i])
        axis[l] = np.copysign(axis[l], m[i, l] + m[l, i])
        if axis @ w < 0.0:
            axis = -axis
        return theta * axis / np.linalg.norm(axis)
    return theta / np.sin(theta) * w


def geodesic_distance(r1: "Rotation | np.ndarray", r2: "Rotation | np.ndarray") -> float:
    """Geodesic distance (rotation angle of r1^T r2) in [0, pi].

    The trace argument is clamped to [-1, 1]; floating point can push it out by ~1e-15.
    """
    m1, m2 = as_matrix(r1), as_matrix(r2)
    # trace(m1^T m2) without forming the product
    t = float(np.sum(m1 * m2))
    return float(np.arccos(np.clip((t - 1.0) / 2.0, -1.0, 1.0)))


def geodesic_distance_batch(r: "Rotation | np.ndarray", rotations: np.ndarray) -> np.ndarray:
    """Geodesic distances from one rotation to a stack of rotations (N, 3, 3)."""
    m = as_matrix(r)
    t = np.einsum("ij,nij->n", m, rotations)
    return np.arccos(np.clip((t - 1.0) / 2.0, -1.0, 1.0))


def project_to_so3(m: np.ndarray) -> np.ndarray:
    """Nearest rotation in Frobenius norm: U diag(1, 1, det(U) det(V)) V^T.

    Raises RankDeficientError when the smallest singular value is <= 1e-12,
    which signals degenerate correspondence geometry upstream.
    """
    m = np.asarray(m, dtype=float)
    u, s, vt = np.linalg.svd(m)
    if s[-1] <= 1e-12:
        raise RankDeficientError(f"matrix is rank deficient (sigma_min={s[-1]:.3e})")
    d = np.sign(np.linalg.det(u) * np.linalg.det(vt))
    return u @ np.diag([1.0, 1.0, d]) @ vt


def random_rotation(rng: np.random.Generator, n: int | None = None) -> np.ndarray:
    """Rotation(s) uniform on SO(3), via normalized Gaussian quaternions.

    Returns (3, 3) when n is None, else (n, 3, 3).
    """
    m = 1 if n is None else n
    q = rng.standard_normal((m, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    rot = np.empty((m, 3, 3))
    rot[:, 0, 0] = 1 - 2 * (y * y + z * z)
    rot[:, 0, 1] = 2 * (x * y - w * z)
    rot[:, 0, 2] = 2 * (x * z + w * y)
    rot[:, 1, 0] = 2 * (x * y + w * z)
    rot[:, 1, 1] = 1 - 2 * (x * x + z * z)
    rot[:, 1, 2] = 2 * (y * z - w * x)
    rot[:, 2, 0] = 2 * (x * z - w * y)
    rot[:, 2, 1] = 2 * (y * z + w * x)
    rot[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return rot[0] if n is None else rot


def random_unit_vector(rng: np.random.Generator, n: int | None = None) -> np.ndarray:
    """Unit vector(s) uniform on the sphere: (3,) or (n, 3)."""
    m = 1 if n is None else n
    v = rng.standard_normal((m, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v[0] if n is None else v


def as_matrix(r: "Rotation | np.ndarray") -> np.ndarray:
    """Coerce a Rotation or raw array to a (3, 3) float matrix."""
    if isinstance(r, Rotation):
        return r.m
    return np.asarray(r, dtype=float)


def _check_rotation(m: np.ndarray) -> None:
    if m.shape != (3, 3):
        raise ValueError(f"rotation matrix must be 3x3, got {m.shape}")
    if np.linalg.norm(m.T @ m - np.eye(3)) > _ORTHO_TOL:
        raise ValueError("matrix is not orthonormal within 1e-9")
    if abs(np.linalg.det(m) - 1.0) > _ORTHO_TOL:
        raise ValueError("matrix determinant is not +1 within 1e-9")


@dataclass(frozen=True)
class Rotation:
    """Element of SO(3); the matrix is validated on construction."""

    m: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float)
        _check_rotation(m)
        m.flags.writeable = False
        object.__setattr__(self, "m", m)

    @classmethod
    def identity(cls) -> "Rotation":
        return cls(np.eye(3))

    @classmethod
    def from_axis_angle(cls, axis_angle: np.ndarray) -> "Rotation":
        return cls(exp_so3(axis_angle))

    @classmethod
    def random(cls, rng: np.random.Generator) -> "Rotation":
        return cls(random_rotation(rng))

    def compose(self, other: "Rotation") -> "Rotation":
        return Rotation(self.m @ other.m)

    def inverse(self) -> "Rotation":
        return Rotation(self.m.T)

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.m.T


@dataclass(frozen=True)
class UnitVector3:
    """3-vector with unit norm (within 1e-9)."""

    v: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float)
        if v.shape != (3,):
            raise ValueError(f"expected a 3-vector, got shape {v.shape}")
        if abs(np.linalg.norm(v) - 1.0) > _ORTHO_TOL:
            raise ValueError("vector norm is not 1 within 1e-9")
        v.flags.writeable = False
        object.__setattr__(self, "v", v)


@dataclass(frozen=True)
class RigidTransform:
    """Rigid body transform (R, t) acting as p -> R p + t."""

    rotation: Rotation
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        t = np.asarray(self.translation, dtype=float)
        if t.shape != (3,):
            raise ValueError(f"translation must be a 3-vector, got shape {t.shape}")
        t.flags.writeable = False
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(Rotation.identity(), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        return self.rotation.apply(points) + self.translation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self after other: (self * other)(p) = self(other(p))."""
        return RigidTransform(
            self.rotation.compose(other.rotation),
            self.rotation.apply(other.translation) + self.translation,
        )

    def inverse(self) -> "RigidTransform":
        rot_inv = self.rotation.inverse()
        return RigidTransform(rot_inv, -rot_inv.apply(self.translation))
