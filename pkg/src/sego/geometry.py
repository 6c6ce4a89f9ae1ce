"""Geometric primitives for a pair of rectified stereo rigs.

Conventions
-----------
All image measurements are calibrated (normalized) coordinates.  The first
rig sits at the origin, so a point ``X`` expressed in its frame projects into

    camera 1, view 1:  X
    camera 1, view 2:  X + b
    camera 2, view 1:  R X + t
    camera 2, view 2:  R X + t + b

with ``b = [1, 0, 0]`` (unit baseline).  ``Pose(R, t)`` always maps the frame
of camera 1 into the frame of camera 2.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import CheiralityError, DegenerateTriangulationError, InvalidInputError

BASELINE = np.array([1.0, 0.0, 0.0])

PARALLEL_TOL = 1e-9


def skew(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


@dataclass(frozen=True)
class Quaternion:
    """Scalar-first quaternion ``a + b i + c j + d k``."""

    a: float
    b: float
    c: float
    d: float

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c, self.d], dtype=float)

    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))

    def normalized(self) -> "Quaternion":
        n = self.norm()
        if not np.isfinite(n) or n == 0.0:
            raise InvalidInputError("cannot normalize a zero or non-finite quaternion")
        return Quaternion(*(self.vector / n))

    def canonical(self) -> "Quaternion":
        """Unit quaternion with the sign fixed so the first nonzero entry is positive."""
        q = self.normalized().vector
        nz = np.flatnonzero(q)
        if q[nz[0]] < 0:
            q = -q
        return Quaternion(*q)

    def to_rotation(self) -> np.ndarray:
        return quat_to_rotation(self)

    @classmethod
    def from_rotation(cls, R) -> "Quaternion":
        return rotation_to_quat(R)

    @classmethod
    def from_axis_angle(cls, axis, angle: float) -> "Quaternion":
        axis = np.asarray(axis, dtype=float)
        axis = axis / np.linalg.norm(axis)
        s = np.sin(angle / 2.0)
        return cls(np.cos(angle / 2.0), *(s * axis))


def quat_rotation_unnormalized(q) -> np.ndarray:
    """Rotation polynomial matrix of a quaternion, scaled by ``|q|^2``.

    Every entry is a homogeneous quadratic in ``(a, b, c, d)``; this is the
    matrix the polynomial solvers substitute for ``R``.
    """
    a, b, c, d = q
    return np.array(
        [
            [a * a + b * b - c * c - d * d, 2 * b * c - 2 * a * d, 2 * b * d + 2 * a * c],
            [2 * b * c + 2 * a * d, a * a - b * b + c * c - d * d, 2 * c * d - 2 * a * b],
            [2 * b * d - 2 * a * c, 2 * c * d + 2 * a * b, a * a - b * b - c * c + d * d],
        ]
    )


def quat_to_rotation(q) -> np.ndarray:
    if isinstance(q, Quaternion):
        q = q.vector
    q = np.asarray(q, dtype=float)
    if q.shape != (4,) or not np.all(np.isfinite(q)):
        raise InvalidInputError("quaternion must be 4 finite numbers")
    n2 = float(q @ q)
    if n2 == 0.0:
        raise InvalidInputError("zero quaternion has no rotation")
    return quat_rotation_unnormalized(q) / n2


def rotation_to_quat(R) -> Quaternion:
    # Shepperd's method: branch on the largest diagonal combination.
    R = np.asarray(R, dtype=float)
    tr = np.trace(R)
    diag = np.array([tr, R[0, 0], R[1, 1], R[2, 2]])
    k = int(np.argmax(diag))
    if k == 0:
        s = np.sqrt(1.0 + tr) * 2.0
        q = [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
    elif k == 1:
        s = np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
        q = [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
    elif k == 2:
        s = np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2.0
        q = [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
    else:
        s = np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2.0
        q = [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
    return Quaternion(*q).canonical()


def rotation_angle(R) -> float:
    """Rotation angle in radians, accurate for tiny angles."""
    R = np.asarray(R, dtype=float)
    s = 0.5 * np.linalg.norm([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    c = 0.5 * (np.trace(R) - 1.0)
    return float(np.arctan2(s, c))


def axis_angle_matrix(axis, angle: float) -> np.ndarray:
    return quat_to_rotation(Quaternion.from_axis_angle(axis, angle))


def so3_exp(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    th = np.linalg.norm(w)
    if th < 1e-12:
        return np.eye(3) + skew(w)
    return axis_angle_matrix(w / th, th)


@dataclass(frozen=True)
class ViewId:
    camera: int
    view: int

    def __post_init__(self):
        if self.camera not in (1, 2) or self.view not in (1, 2):
            raise InvalidInputError(f"camera and view must be 1 or 2, got {self.camera}, {self.view}")

    def offset(self, rig: "StereoRig | None" = None) -> np.ndarray:
        """Translation of this view w.r.t. its stereo camera frame."""
        b = (rig or StereoRig()).baseline
        return b.copy() if self.view == 2 else np.zeros(3)


@dataclass(frozen=True)
class StereoRig:
    baseline: np.ndarray = field(default_factory=lambda: BASELINE.copy())

    def __post_init__(self):
        b = np.asarray(self.baseline, dtype=float)
        if b.shape != (3,) or abs(np.linalg.norm(b) - 1.0) > 1e-12:
            raise InvalidInputError("baseline must be a unit 3-vector")
        object.__setattr__(self, "baseline", b)


@dataclass(frozen=True, eq=False)
class PointObservation:
    x: np.ndarray
    view: ViewId

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).reshape(-1)
        if x.shape == (2,):
            x = np.append(x, 1.0)
        if x.shape != (3,) or not np.all(np.isfinite(x)) or not np.any(x):
            raise InvalidInputError("point observation must be a finite nonzero homogeneous 3-vector")
        if abs(x[2]) > 0:
            x = x / x[2]
        object.__setattr__(self, "x", x)


@dataclass(frozen=True, eq=False)
class LineObservation:
    """Image line ``l . x = 0``; ``endpoints`` optionally holds the observed segment ends."""

    l: np.ndarray
    view: ViewId
    endpoints: np.ndarray | None = None

    def __post_init__(self):
        l = np.asarray(self.l, dtype=float).reshape(-1)
        if l.shape != (3,) or not np.all(np.isfinite(l)):
            raise InvalidInputError("line observation must be a finite 3-vector")
        n = np.hypot(l[0], l[1])
        if n == 0.0:
            raise InvalidInputError("line coefficients (l1, l2) must not both vanish")
        object.__setattr__(self, "l", l / n)
        if self.endpoints is not None:
            e = np.asarray(self.endpoints, dtype=float)
            if e.shape != (2, 2) or not np.all(np.isfinite(e)):
                raise InvalidInputError("endpoints must be two finite image points")
            object.__setattr__(self, "endpoints", e)

    @classmethod
    def through(cls, p, q, view: ViewId) -> "LineObservation":
        """Line through two image points (normalized coordinates), kept as its endpoints."""
        p = np.append(np.asarray(p, dtype=float)[:2], 1.0)
        q = np.append(np.asarray(q, dtype=float)[:2], 1.0)
        return cls(np.cross(p, q), view, np.array([p[:2], q[:2]]))


@dataclass(frozen=True, eq=False)
class Pose:
    R: np.ndarray
    t: np.ndarray
    meta: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "R", np.asarray(self.R, dtype=float).reshape(3, 3))
        object.__setattr__(self, "t", np.asarray(self.t, dtype=float).reshape(3))

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_quaternion(cls, q, t) -> "Pose":
        return cls(quat_to_rotation(q), t)

    @property
    def quaternion(self) -> Quaternion:
        return rotation_to_quat(self.R)

    def inverse(self) -> "Pose":
        return Pose(self.R.T, -self.R.T @ self.t)

    def is_valid(self, tol: float = 1e-10) -> bool:
        return bool(
            np.allclose(self.R.T @ self.R, np.eye(3), atol=tol)
            and abs(np.linalg.det(self.R) - 1.0) < tol
            and np.all(np.isfinite(self.t))
        )

    def scaled(self, baseline_length: float) -> "Pose":
        """Translation expressed in metric units for a rig of the given baseline."""
        return Pose(self.R, self.t * baseline_length)


def view_transform(pose: Pose, view: ViewId, rig: StereoRig | None = None):
    """``(R_v, t_v)`` mapping camera-1 coordinates into the frame of ``view``."""
    off = view.offset(rig)
    if view.camera == 1:
        return np.eye(3), off
    return pose.R, pose.t + off


def project_point(pose: Pose, view: ViewId, X, rig: StereoRig | None = None) -> PointObservation:
    Rv, tv = view_transform(pose, view, rig)
    P = Rv @ np.asarray(X, dtype=float) + tv
    if not P[2] > 0.0:
        raise CheiralityError(f"point has depth {P[2]:.3g} in view {view}")
    return PointObservation(P / P[2], view)


def project_line(pose: Pose, view: ViewId, X1, X2, rig: StereoRig | None = None) -> LineObservation:
    """Image line of the 3D line through ``X1`` and ``X2`` (camera-1 frame)."""
    Rv, tv = view_transform(pose, view, rig)
    P1 = Rv @ np.asarray(X1, dtype=float) + tv
    P2 = Rv @ np.asarray(X2, dtype=float) + tv
    n = np.cross(P1, P2)
    if np.linalg.norm(n[:2]) < PARALLEL_TOL * max(np.linalg.norm(n), 1.0):
        raise DegenerateTriangulationError("line passes through the view's centre")
    ends = np.array([P1[:2] / P1[2], P2[:2] / P2[2]]) if P1[2] > 0 and P2[2] > 0 else None
    return LineObservation(n, view, ends)


def triangulate_point(x_left: PointObservation, x_right: PointObservation, rig: StereoRig | None = None) -> np.ndarray:
    """Midpoint triangulation from the two views of one stereo camera.

    Returns the 3D point in that camera's frame (the frame of its view 1).
    """
    rig = rig or StereoRig()
    if x_left.view.camera != x_right.view.camera or {x_left.view.view, x_right.view.view} != {1, 2}:
        raise InvalidInputError("need observations from view 1 and view 2 of one camera")
    if x_left.view.view == 2:
        x_left, x_right = x_right, x_left
    d1 = np.asarray(x_left.x, dtype=float)
    d2 = np.asarray(x_right.x, dtype=float)
    c2 = -rig.baseline
    n1, n2 = np.linalg.norm(d1), np.linalg.norm(d2)
    if np.linalg.norm(np.cross(d1, d2)) < PARALLEL_TOL * n1 * n2:
        raise DegenerateTriangulationError("rays are parallel (zero disparity)")
    # s1 d1 - s2 d2 = c2 in least squares
    A = np.stack([d1, -d2], axis=1)
    s, *_ = np.linalg.lstsq(A, c2, rcond=None)
    return 0.5 * (s[0] * d1 + (c2 + s[1] * d2))


def triangulate_line(l_left: LineObservation, l_right: LineObservation, rig: StereoRig | None = None):
    """Intersect the back-projected planes of a line seen in both views of a camera.

    Returns ``(X1, X2)`` with ``X2 = X1 + d`` for the unit direction ``d``.
    ``X1`` is the point of the 3D line imaged closest to the principal point
    of the left view, so it sits near the visible part of the line.  When
    that point is not in front of the camera, the point closest to the
    optical axis is used.  Failing that, ``X1`` is the point at a depth equal
    to the line's distance from the camera centre (at least 1) and ``d``
    points away from the camera.
    """
    rig = rig or StereoRig()
    if l_left.view.camera != l_right.view.camera or {l_left.view.view, l_right.view.view} != {1, 2}:
        raise InvalidInputError("need observations from view 1 and view 2 of one camera")
    if l_left.view.view == 2:
        l_left, l_right = l_right, l_left
    n1 = l_left.l / np.linalg.norm(l_left.l)
    n2 = l_right.l / np.linalg.norm(l_right.l)
    d = np.cross(n1, n2)
    nd = np.linalg.norm(d)
    if nd < PARALLEL_TOL:
        raise DegenerateTriangulationError("back-projected planes are parallel")
    d = d / nd
    N = np.stack([n1, n2])
    rhs = np.array([0.0, -n2 @ rig.baseline])
    X1 = N.T @ np.linalg.solve(N @ N.T, rhs)
    # foot of the perpendicular from the principal point to the left image line
    h2 = n1[0] ** 2 + n1[1] ** 2
    x = np.array([-n1[2] * n1[0] / h2, -n1[2] * n1[1] / h2, 1.0])
    den = n2 @ x
    if abs(den) > PARALLEL_TOL:
        lam = -(n2 @ rig.baseline) / den
        if lam > 0:
            P = lam * x
            return P, P + d
    if 1.0 - d[2] ** 2 > 1e-6:
        s = (d[2] * X1[2] - d @ X1) / (1.0 - d[2] ** 2)
        if X1[2] + s * d[2] > 0:
            return X1 + s * d, X1 + s * d + d
    if X1[2] <= 0 and abs(d[2]) > 1e-6:
        d = d * np.sign(d[2])
        X1 = X1 + (max(np.linalg.norm(X1), 1.0) - X1[2]) / d[2] * d
    return X1, X1 + d


def triangulate_segment(l_left: LineObservation, l_right: LineObservation, rig: StereoRig | None = None):
    """3D points imaged at the two observed endpoints of the left-view segment.

    Falls back to :func:`triangulate_line` when the left observation has no
    endpoints or an endpoint ray meets the line behind the camera.
    """
    rig = rig or StereoRig()
    if l_left.view.view == 2:
        l_left, l_right = l_right, l_left
    X1, X2 = triangulate_line(l_left, l_right, rig)
    if l_left.endpoints is None:
        return X1, X2
    n2 = l_right.l / np.linalg.norm(l_right.l)
    out = []
    for e in l_left.endpoints:
        # project the endpoint onto the image line, then back-project onto the right plane
        x = np.append(e, 1.0)
        x[:2] -= (l_left.l @ x) * l_left.l[:2]
        den = n2 @ x
        lam = -(n2 @ rig.baseline) / den if abs(den) > PARALLEL_TOL else -1.0
        if not lam > 0:
            return X1, X2
        out.append(lam * x)
    if np.linalg.norm(out[1] - out[0]) < 1e-9:
        return X1, X2
    return out[0], out[1]


def point_line_distance(P, X1, X2) -> float:
    d = np.asarray(X2, float) - np.asarray(X1, float)
    return float(np.linalg.norm(np.cross(np.asarray(P, float) - X1, d)) / np.linalg.norm(d))


class PoseError(NamedTuple):
    rotation_deg: float
    translation_rel: float
    translation_absolute: bool = False


def pose_errors(est: Pose, gt: Pose) -> PoseError:
    """Angular rotation error (degrees) and relative translation error.

    When the true translation vanishes the absolute error norm is reported and
    ``translation_absolute`` is set.
    """
    rot = np.degrees(rotation_angle(est.R @ gt.R.T))
    dt = float(np.linalg.norm(est.t - gt.t))
    nt = float(np.linalg.norm(gt.t))
    if nt == 0.0:
        return PoseError(float(rot), dt, True)
    return PoseError(float(rot), dt / nt, False)
