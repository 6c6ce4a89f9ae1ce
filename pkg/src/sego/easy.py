"""Solvers for the easy cases, both reduced to three quadrics in (b, c, d).

Three lines: the direction of a line triangulated by one camera, rotated
into the other camera, lies in the back-projected plane of its third
observation.  That gives one equation per line that involves only ``R``.
The translation follows linearly.

Single main camera (generalized P3P with points and lines): the first point
is the anchor, ``t = alpha e3 - R S - t0`` in the pre-rotated frame as for
PPSEgo, ``alpha`` is taken from one projection row and substituted into
the other three.
"""
from __future__ import annotations

import numpy as np

from .cases import LINE, POINT, FeatureTriplet
from .constraints import ROTATION_TENSOR, LinearRows, scaled_residual
from .errors import DegenerateInstanceError, InvalidInputError
from .geometry import Pose, StereoRig, point_line_distance, quat_to_rotation
from .poly.quadrics import solve_three_quadrics
from .ppsego import E3, ProjectionSetup, line_projection_rows, point_projection_rows

N_SOLUTIONS = 8
RESIDUAL_TOL = 1e-6
PARALLEL_TOL = 1e-8
COLLINEAR_TOL = 1e-8
RANK_TOL = 1e-8

# QUAT_MONOMIALS -> QUAD_MONOMIALS in (b, c, d) after setting a = 1
_TO_QUAD = [4, 5, 6, 7, 8, 9, 1, 2, 3, 0]
_SQUARES = [0, 4, 7, 9]  # aa, bb, cc, dd


def _quadric(A, c0: float = 0.0) -> np.ndarray:
    """Quadric in (b, c, d) of ``<A, R> + c0 = 0`` for unit ``q = (a, b, c, d) / |q|``, divided by a^2."""
    k = np.einsum("ij,ijm->m", A, ROTATION_TENSOR)
    k[_SQUARES] += c0
    return k[_TO_QUAD]


def _unit(v):
    return v / np.linalg.norm(v)


def _sine(u, v) -> float:
    return float(np.linalg.norm(np.cross(_unit(u), _unit(v))))


def _to_rotation(x) -> np.ndarray:
    return quat_to_rotation(np.array([1.0, x[0], x[1], x[2]]))


# ---------------------------------------------------------------- three lines

def line_direction_rows(features, rig: StereoRig | None = None) -> LinearRows:
    """One rotation-only row per line: ``l2^T R d1 = 0`` or ``d2^T R l1 = 0``."""
    A = []
    for f in features:
        if f.kind != LINE:
            raise InvalidInputError("expected line features")
        X1, X2 = f.triangulate(rig)
        d = _unit(X2 - X1)
        l = f.other_observation.l
        A.append(np.outer(l, d) if f.main_camera == 1 else np.outer(d, l))
    return LinearRows(np.array(A), np.zeros((len(A), 3, 3)))


def line_translation_system(features, R, rig: StereoRig | None = None):
    """``(M, r)`` with ``M t = r``: two incidence equations per line."""
    M, r = [], []
    for f in features:
        Xs = f.triangulate(rig)
        o = f.other_observation
        off = o.view.offset(rig)
        if f.main_camera == 1:
            for X in Xs:
                M.append(o.l)
                r.append(-o.l @ (R @ X + off))
        else:
            m = R @ o.l
            for Y in Xs:
                M.append(m)
                r.append(m @ Y + o.l @ off)
    return np.array(M), np.array(r)


def _check_lines(features, rig):
    dirs = {}
    for f in features:
        X1, X2 = f.triangulate(rig)
        dirs.setdefault(f.main_camera, []).append(X2 - X1)
    for ds in dirs.values():
        if len(ds) == 3 and all(_sine(ds[0], d) < PARALLEL_TOL for d in ds[1:]):
            raise DegenerateInstanceError("three parallel lines")


def solve_lines_canonical(features, label: str, rig: StereoRig | None = None,
                          hidden: int | None = None, condition_check: bool = True,
                          residual_tol: float = RESIDUAL_TOL):
    features = list(features)
    if len(features) != 3 or any(f.kind != LINE for f in features):
        raise InvalidInputError("the line solver needs three line features")
    _check_lines(features, rig)
    rows = line_direction_rows(features, rig)
    Q = [_quadric(A) for A in rows.A]
    sols = solve_three_quadrics(*Q, hidden=hidden, condition_check=condition_check)
    poses, rank_deficient = [], 0
    for x in sols:
        R = _to_rotation(x)
        res = float(np.max(scaled_residual(rows, R, 0.0)))
        if res > residual_tol:
            continue
        M, r = line_translation_system(features, R, rig)
        s = np.linalg.svd(M, compute_uv=False)
        if s[-1] < RANK_TOL * s[0]:
            rank_deficient += 1
            continue
        t = np.linalg.lstsq(M, r, rcond=None)[0]
        poses.append(Pose(R, t, {"residual": res}))
    if not poses and rank_deficient:
        raise DegenerateInstanceError("translation is not determined by the three lines")
    poses.sort(key=lambda p: p.meta["residual"])
    return poses


def solve_three_lines(features, label=None, rig: StereoRig | None = None, **kw):
    """Candidate poses (at most 8) for three line features (S3L or S2L-1L)."""
    from .cases import Route
    from .solve import run_canonical
    return run_canonical(features, label, "episego", rig, expect=(Route.EASY_LINES,), **kw)


# ------------------------------------------------------ single main camera

def _check_gp3p(features, rig):
    pts = [f.triangulate(rig) for f in features if f.kind == POINT]
    lines = [f.triangulate(rig) for f in features if f.kind == LINE]
    scale = max(np.linalg.norm(np.concatenate([np.ravel(p) for p in pts + lines])), 1.0)
    tol = COLLINEAR_TOL * scale
    if len(pts) == 3 and _sine(pts[1] - pts[0], pts[2] - pts[0]) < COLLINEAR_TOL:
        raise DegenerateInstanceError("three points on a line")
    for X1, X2 in lines:
        if any(point_line_distance(P, X1, X2) < tol for P in pts):
            raise DegenerateInstanceError("a point lies on a line feature")
    if len(lines) == 2:
        (A1, A2), (B1, B2) = lines
        if point_line_distance(B1, A1, A2) < tol and point_line_distance(B2, A1, A2) < tol:
            raise DegenerateInstanceError("two features belong to the same 3D line")


def gp3p_rows(features, rig: StereoRig | None = None):
    """Setup and the four projection rows of the non-anchor features."""
    features = list(features)
    if features[0].kind != POINT or any(f.main_camera != 1 for f in features):
        raise InvalidInputError("expected a point first and a single main camera 1")
    setup = ProjectionSetup(features[0], rig)
    parts = [point_projection_rows(f, setup) if f.kind == POINT else line_projection_rows(f, setup)
             for f in features[1:]]
    return LinearRows.stack(parts), setup


def eliminate_alpha(rows: LinearRows):
    """Index of the row used for alpha and the three alpha-free rows.

    With a single main camera the alpha coefficient of every row is the
    constant ``c1``; the row with the largest one is used.
    """
    k = int(np.argmax(np.abs(rows.c1)))
    if abs(rows.c1[k]) < 1e-12 * max(np.max(np.abs(rows.coefficient_block)), 1e-300):
        raise DegenerateInstanceError("depth of the anchor is unconstrained")
    others = [i for i in range(len(rows)) if i != k]
    w = rows.c1[others] / rows.c1[k]
    A = rows.A[others] - w[:, None, None] * rows.A[k]
    c0 = rows.c0[others] - w * rows.c0[k]
    return k, LinearRows(A, np.zeros_like(A), c0)


def solve_gp3p_canonical(features, label: str, rig: StereoRig | None = None,
                         hidden: int | None = None, condition_check: bool = True,
                         residual_tol: float = RESIDUAL_TOL):
    features = list(features)
    if len(features) != 3:
        raise InvalidInputError("need three features")
    _check_gp3p(features, rig)
    rows, setup = gp3p_rows(features, rig)
    k, free = eliminate_alpha(rows)
    Q = [_quadric(A, c) for A, c in zip(free.A, free.c0)]
    sols = solve_three_quadrics(*Q, hidden=hidden, condition_check=condition_check)
    poses = []
    for x in sols:
        Rp = _to_rotation(x)
        alpha = -(np.sum(rows.A[k] * Rp) + rows.c0[k]) / rows.c1[k]
        res = float(np.max(scaled_residual(rows, Rp, alpha)))
        if not np.isfinite(res) or res > residual_tol:
            continue
        tp = alpha * E3 - Rp @ setup.S - setup.t0
        poses.append(Pose(setup.Rt.T @ Rp, setup.Rt.T @ tp, {"alpha": float(alpha), "residual": res}))
    poses.sort(key=lambda p: (p.meta["alpha"] <= 0, p.meta["residual"]))
    return poses


def solve_gp3p_mixed(features, label=None, rig: StereoRig | None = None, **kw):
    """Candidate poses (at most 8) when all features share one main camera."""
    from .cases import Route
    from .solve import run_canonical
    return run_canonical(features, label, "episego", rig, expect=(Route.EASY_GP3P,), **kw)
