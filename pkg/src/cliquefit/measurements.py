"""Tagged measurement collections with their noise bounds.

Four problem families are supported, each with its own record shape:

* ``RotationSamples``    - rotation matrices observed around an unknown rotation
* ``PointPairs``         - 3D point correspondences under an unknown rigid transform
* ``PointNormalPairs``   - point correspondences carrying unit normals
* ``Camera2D3D``         - 3D points (camera-aligned frame, z > 0) with pixel observations

Noise bounds are positive scalars: radians for rotation and normal noise, length
units for points, pixels for image observations. Instances are immutable arrays
and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import _check_rotation

PROBLEM_ROTAVG = "rotavg"
PROBLEM_REGISTRATION = "registration"
PROBLEM_REGISTRATION_NORMALS = "registration_normals"
PROBLEM_CROSSRATIO = "crossratio"


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


def _check_beta(beta: float, name: str = "beta") -> float:
    beta = float(beta)
    if not beta > 0.0:
        raise ValueError(f"{name} must be positive, got {beta}")
    return beta


@dataclass(frozen=True)
class RotationSamples:
    """N rotation matrices (N, 3, 3) with an angular noise bound in radians."""

    rotations: np.ndarray
    beta: float

    problem = PROBLEM_ROTAVG
    arity = 2

    def __post_init__(self):
        r = np.ascontiguousarray(self.rotations, dtype=float)
        if r.ndim != 3 or r.shape[1:] != (3, 3) or r.shape[0] < 1:
            raise ValueError(f"rotations must be (N>=1, 3, 3), got {r.shape}")
        for i in range(r.shape[0]):
            _check_rotation(r[i])
        object.__setattr__(self, "rotations", _freeze(r))
        object.__setattr__(self, "beta", _check_beta(self.beta))

    def __len__(self) -> int:
        return self.rotations.shape[0]


@dataclass(frozen=True)
class PointPairs:
    """Corresponding 3D points a (N, 3) and b (N, 3) with a point noise bound."""

    a: np.ndarray
    b: np.ndarray
    beta: float

    problem = PROBLEM_REGISTRATION
    arity = 2

    def __post_init__(self):
        a = np.ascontiguousarray(self.a, dtype=float)
        b = np.ascontiguousarray(self.b, dtype=float)
        if a.ndim != 2 or a.shape[1] != 3 or a.shape[0] < 1:
            raise ValueError(f"a must be (N>=1, 3), got {a.shape}")
        if b.shape != a.shape:
            raise ValueError(f"a and b shapes differ: {a.shape} vs {b.shape}")
        if not (np.isfinite(a).all() and np.isfinite(b).all()):
            raise ValueError("points must be finite")
        object.__setattr__(self, "a", _freeze(a))
        object.__setattr__(self, "b", _freeze(b))
        object.__setattr__(self, "beta", _check_beta(self.beta))

    def __len__(self) -> int:
        return self.a.shape[0]


@dataclass(frozen=True)
class PointNormalPairs:
    """Point correspondences with unit normals.

    ``ma`` are normals of the source points ``a``; ``nb`` are normals of the target
    points ``b``. ``beta`` bounds point noise (length units) and ``beta_normal``
    bounds angular normal noise (radians); by default the two are equal.
    """

    a: np.ndarray
    ma: np.ndarray
    b: np.ndarray
    nb: np.ndarray
    beta: float
    beta_normal: float | None = None

    problem = PROBLEM_REGISTRATION_NORMALS
    arity = 2

    def __post_init__(self):
        a = np.ascontiguousarray(self.a, dtype=float)
        b = np.ascontiguousarray(self.b, dtype=float)
        ma = np.ascontiguousarray(self.ma, dtype=float)
        nb = np.ascontiguousarray(self.nb, dtype=float)
        if a.ndim != 2 or a.shape[1] != 3 or a.shape[0] < 1:
            raise ValueError(f"a must be (N>=1, 3), got {a.shape}")
        for name, arr in (("b", b), ("ma", ma), ("nb", nb)):
            if arr.shape != a.shape:
                raise ValueError(f"{name} shape {arr.shape} does not match a {a.shape}")
        for name, arr in (("ma", ma), ("nb", nb)):
            if np.max(np.abs(np.linalg.norm(arr, axis=1) - 1.0)) > 1e-9:
                raise ValueError(f"{name} rows must be unit vectors within 1e-9")
        object.__setattr__(self, "a", _freeze(a))
        object.__setattr__(self, "ma", _freeze(ma))
        object.__setattr__(self, "b", _freeze(b))
        object.__setattr__(self, "nb", _freeze(nb))
        object.__setattr__(self, "beta", _check_beta(self.beta))
        bn = self.beta if self.beta_normal is None else self.beta_normal
        object.__setattr__(self, "beta_normal", _check_beta(bn, "beta_normal"))

    def __len__(self) -> int:
        return self.a.shape[0]


@dataclass(frozen=True)
class Camera2D3D:
    """3D points p (N, 3) with pixel observations y (N, 2) and a pixel noise bound.

    Points live in a camera-aligned frame: all p_z must be positive.
    """

    p: np.ndarray
    y: np.ndarray
    beta: float

    problem = PROBLEM_CROSSRATIO
    arity = 4

    def __post_init__(self):
        p = np.ascontiguousarray(self.p, dtype=float)
        y = np.ascontiguousarray(self.y, dtype=float)
        if p.ndim != 2 or p.shape[1] != 3 or p.shape[0] < 1:
            raise ValueError(f"p must be (N>=1, 3), got {p.shape}")
        if y.shape != (p.shape[0], 2):
            raise ValueError(f"y must be (N, 2) matching p, got {y.shape}")
        if np.any(p[:, 2] <= 0.0):
            raise ValueError("all 3D points must have z > 0 (in front of the camera)")
        object.__setattr__(self, "p", _freeze(p))
        object.__setattr__(self, "y", _freeze(y))
        object.__setattr__(self, "beta", _check_beta(self.beta))

    def __len__(self) -> int:
        return self.p.shape[0]


MeasurementSet = RotationSamples | PointPairs | PointNormalPairs | Camera2D3D
