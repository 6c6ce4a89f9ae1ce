"""Constraint rows that are linear in the rotation matrix.

Every minimal-solver equation used here has the form

    <A + alpha B, R> + c0 + alpha c1 = 0

with ``<X, R> = sum_ij X_ij R_ij``.  Substituting the quaternion form of
``R`` turns each row into quadratic polynomials in ``(a, b, c, d)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cases import FeatureTriplet, POINT
from .errors import InvalidInputError
from .geometry import StereoRig

# [aa, ab, ac, ad, bb, bc, bd, cc, cd, dd]
QUAT_MONOMIALS = [
    (2, 0, 0, 0), (1, 1, 0, 0), (1, 0, 1, 0), (1, 0, 0, 1), (0, 2, 0, 0),
    (0, 1, 1, 0), (0, 1, 0, 1), (0, 0, 2, 0), (0, 0, 1, 1), (0, 0, 0, 2),
]
# the same monomials with a = 1, as exponents of (b, c, d)
DEHOMOG_MONOMIALS = [m[1:] for m in QUAT_MONOMIALS]


def _rotation_tensor() -> np.ndarray:
    """``T[i, j, k]``: coefficient of monomial ``k`` in entry ``R_ij``."""
    T = np.zeros((3, 3, 10))
    k = {m: i for i, m in enumerate(["aa", "ab", "ac", "ad", "bb", "bc", "bd", "cc", "cd", "dd"])}
    spec = {
        (0, 0): {"aa": 1, "bb": 1, "cc": -1, "dd": -1},
        (0, 1): {"bc": 2, "ad": -2},
        (0, 2): {"bd": 2, "ac": 2},
        (1, 0): {"bc": 2, "ad": 2},
        (1, 1): {"aa": 1, "bb": -1, "cc": 1, "dd": -1},
        (1, 2): {"cd": 2, "ab": -2},
        (2, 0): {"bd": 2, "ac": -2},
        (2, 1): {"cd": 2, "ab": 2},
        (2, 2): {"aa": 1, "bb": -1, "cc": -1, "dd": 1},
    }
    for (i, j), terms in spec.items():
        for name, c in terms.items():
            T[i, j, k[name]] = c
    return T


ROTATION_TENSOR = _rotation_tensor()


@dataclass
class Anchor:
    """The point used to eliminate translation: ``t = alpha u - R S - t0``."""

    S: np.ndarray
    u: np.ndarray
    offset: np.ndarray  # t_{gamma0}: offset of the view observing the anchor in camera 2


@dataclass
class LinearRows:
    A: np.ndarray
    B: np.ndarray
    c0: np.ndarray = field(default=None)
    c1: np.ndarray = field(default=None)

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float).reshape(-1, 3, 3)
        self.B = np.asarray(self.B, dtype=float).reshape(-1, 3, 3)
        n = self.A.shape[0]
        self.c0 = np.zeros(n) if self.c0 is None else np.asarray(self.c0, dtype=float).reshape(n)
        self.c1 = np.zeros(n) if self.c1 is None else np.asarray(self.c1, dtype=float).reshape(n)

    def __len__(self):
        return self.A.shape[0]

    @classmethod
    def stack(cls, parts):
        parts = list(parts)
        return cls(np.concatenate([p.A for p in parts]), np.concatenate([p.B for p in parts]),
                   np.concatenate([p.c0 for p in parts]), np.concatenate([p.c1 for p in parts]))

    def select(self, idx):
        idx = np.asarray(idx)
        return LinearRows(self.A[idx], self.B[idx], self.c0[idx], self.c1[idx])

    def evaluate(self, R, alpha) -> np.ndarray:
        R = np.asarray(R, dtype=float)
        return np.einsum("kij,ij->k", self.A + alpha * self.B, R) + self.c0 + alpha * self.c1

    def scale(self, R, alpha) -> np.ndarray:
        """Magnitude of the individual terms, for scaled residuals."""
        Ra = np.abs(np.asarray(R, dtype=float))
        return (np.einsum("kij,ij->k", np.abs(self.A) + abs(alpha) * np.abs(self.B), Ra)
                + np.abs(self.c0) + abs(alpha) * np.abs(self.c1))

    def quat_coeffs(self):
        """Coefficients on ``QUAT_MONOMIALS`` of the constant and alpha parts: two ``(n, 10)`` arrays."""
        return (np.einsum("kij,ijm->km", self.A, ROTATION_TENSOR),
                np.einsum("kij,ijm->km", self.B, ROTATION_TENSOR))

    @property
    def coefficient_block(self) -> np.ndarray:
        """Rows ``[vec(A), c0, vec(B), c1]``."""
        n = len(self)
        return np.hstack([self.A.reshape(n, 9), self.c0[:, None], self.B.reshape(n, 9), self.c1[:, None]])


def make_anchor(feature: FeatureTriplet, rig: StereoRig | None = None) -> Anchor:
    """Anchor data from a point feature whose main camera is camera 1."""
    if feature.kind != POINT or feature.main_camera != 1:
        raise InvalidInputError("the anchor must be a point whose main camera is camera 1")
    S = feature.triangulate(rig)
    o = feature.other_observation
    return Anchor(S, np.asarray(o.x, dtype=float), o.view.offset(rig))


def scaled_residual(rows: LinearRows, R, alpha) -> np.ndarray:
    s = rows.scale(R, alpha)
    return np.abs(rows.evaluate(R, alpha)) / np.where(s > 0, s, 1.0)
