"""EpiSEgo: hard cases from epipolar (points) and Pluecker (lines) constraints.

Translation is eliminated through the anchor point, ``t = alpha u - R S - t0``.
With ``a = 1`` the four remaining rows read ``C(b, c, d) [1, alpha]^T = 0``
for a 4x2 matrix of quadratics.  All 2x2 minors of ``C`` vanish at a
solution; the six quartic minors are solved with an elimination template and
the action of ``d``.
"""
from __future__ import annotations

import numpy as np

from .cases import LINE, POINT, FeatureTriplet, HARD_LABELS, classify, canonicalize
from .constraints import (DEHOMOG_MONOMIALS, Anchor, LinearRows, make_anchor, scaled_residual)
from .errors import DegenerateInstanceError, InvalidInputError
from .geometry import Pose, StereoRig, axis_angle_matrix, quat_to_rotation, skew
from .poly.newton import monomial_values_and_grad, newton, recover_collisions
from .poly.polynomial import ProductTable, monomials_of_degree, monomials_up_to, parse_monomial
from .poly.template import IMAG_TOL, EliminationTemplate, eigen_solutions

N_SOLUTIONS = 32
LOW_CONFIDENCE_A = 0.02
RESIDUAL_TOL = 1e-6
RESOLVE_STEP = 1e-4
PRE_ROTATION = axis_angle_matrix(np.array([0.36, 0.48, 0.8]), np.radians(60.0))

BASIS = [parse_monomial(s, "bcd") for s in (
    "1 b b^2 b^3 c c^2 c^3 bc bc^2 b^2c d d^2 d^3 d^4 d^5 bd bd^2 bd^3 bd^4 b^2d b^2d^2 "
    "cd cd^2 cd^3 cd^4 c^2d c^2d^2 c^3d bcd bcd^2 bc^2d b^2cd").split()]
ACTION_VAR = 2  # d
QUARTICS = monomials_up_to(3, 4)
_MINOR = ProductTable(DEHOMOG_MONOMIALS, DEHOMOG_MONOMIALS, QUARTICS)
_PAIRS = [(i, j) for i in range(4) for j in range(i + 1, 4)]


def multiplier_set(mode: str = "upto3"):
    """Monomials the six quartics are multiplied by.

    ``"upto3"``: every monomial of degree at most three (20).
    ``"exact3"``: the ten cubic monomials plus the unmultiplied quartics.
    """
    if mode == "upto3":
        return monomials_up_to(3, 3)
    if mode == "exact3":
        return monomials_of_degree(3, 3) + [(0, 0, 0)]
    raise InvalidInputError(f"unknown multiplier mode {mode!r}")


def build_point_epipolar_rows(feature: FeatureTriplet, anchor: Anchor,
                              rig: StereoRig | None = None) -> LinearRows:
    """Epipolar rows between the non-main view and both main-camera views.

    For observations ``x1`` (camera 1, view beta) and ``x2`` (camera 2, view
    gamma) the epipole is ``e = alpha u - R (S + t_beta) + (t_gamma - t0)`` and
    the constraint is ``x2 . (e x R x1) = 0``.
    """
    if feature.kind != POINT:
        raise InvalidInputError("expected a point feature")
    c1 = sorted((o for o in feature.observations if o.view.camera == 1), key=lambda o: o.view.view)
    c2 = sorted((o for o in feature.observations if o.view.camera == 2), key=lambda o: o.view.view)
    A, B = [], []
    for o1 in c1:
        for o2 in c2:
            x1, x2 = o1.x, o2.x
            p = anchor.S + o1.view.offset(rig)
            delta = o2.view.offset(rig) - anchor.offset
            A.append(np.outer(np.cross(x2, delta), x1) - np.outer(x2, np.cross(p, x1)))
            B.append(np.outer(np.cross(x2, anchor.u), x1))
    return LinearRows(np.array(A), np.array(B))


def line_rows_all(feature: FeatureTriplet, anchor: Anchor, rig: StereoRig | None = None) -> LinearRows:
    """The three raw rows ``[l]x n = 0`` for a line feature."""
    if feature.kind != LINE:
        raise InvalidInputError("expected a line feature")
    X1, X2 = feature.triangulate(rig)
    d = X2 - X1
    d = d / np.linalg.norm(d)
    o = feature.other_observation
    L = skew(o.l)
    A, B = [], []
    if feature.main_camera == 1:
        # n = R((X1 - S) x d) + (alpha u + delta) x R d
        delta = o.view.offset(rig) - anchor.offset
        m = np.cross(X1 - anchor.S, d)
        for k in range(3):
            A.append(np.outer(L[k], m) + np.outer(np.cross(L[k], delta), d))
            B.append(np.outer(np.cross(L[k], anchor.u), d))
    else:
        # n = R^T((X1 - alpha u + t0) x d) + (S + t_beta) x R^T d
        p = anchor.S + o.view.offset(rig)
        m = np.cross(X1 + anchor.offset, d)
        ud = np.cross(anchor.u, d)
        for k in range(3):
            A.append(np.outer(m, L[k]) + np.outer(d, np.cross(L[k], p)))
            B.append(-np.outer(ud, L[k]))
    return LinearRows(np.array(A), np.array(B))


def build_line_pluecker_rows(feature: FeatureTriplet, anchor: Anchor, rig: StereoRig | None = None,
                             keep: int = 2) -> LinearRows:
    """Two of the three rank-2 line rows, those with the largest coefficient norm."""
    rows = line_rows_all(feature, anchor, rig)
    norms = np.linalg.norm(rows.coefficient_block, axis=1)
    return rows.select(np.sort(np.argsort(-norms, kind="stable")[:keep]))


def epipolar_system(features, rig: StereoRig | None = None):
    """Anchor and the four constraint rows for canonically ordered features."""
    features = list(features)
    anchor = make_anchor(features[0], rig)
    parts = []
    for f in features[1:]:
        if f.kind == POINT:
            parts.append(build_point_epipolar_rows(f, anchor, rig))
        else:
            parts.append(build_line_pluecker_rows(f, anchor, rig))
    rows = LinearRows.stack(parts)
    if len(rows) != 4:
        raise InvalidInputError("hard cases give exactly four rows")
    return rows, anchor


def c_matrix(rows: LinearRows) -> np.ndarray:
    """``C[k, j]``: coefficients (on ``DEHOMOG_MONOMIALS``) of row ``k``, column ``j`` of C."""
    c0, c1 = rows.quat_coeffs()
    C = np.stack([c0, c1], axis=1)
    s = np.max(np.abs(C), axis=(1, 2))
    if np.any(s == 0):
        raise DegenerateInstanceError("a constraint row vanishes identically")
    return C / s[:, None, None]


def minors(C) -> list:
    """The six 2x2 minors of C as coefficient vectors on ``QUARTICS``."""
    out = []
    for i, j in _PAIRS:
        g = _MINOR(C[i, 0], C[j, 1]) - _MINOR(C[j, 0], C[i, 1])
        s = np.max(np.abs(g))
        out.append(g / s if s > 0 else g)
    return out


def make_template(mode: str = "upto3") -> EliminationTemplate:
    mult = multiplier_set(mode)
    return EliminationTemplate([QUARTICS] * 6, [mult] * 6, BASIS, ACTION_VAR, name=f"episego-{mode}")


_TEMPLATES = {}


def get_template(label: str, mode: str = "upto3") -> EliminationTemplate:
    """Template compiled on a generic instance of ``label`` (cached)."""
    key = (label, mode)
    if key not in _TEMPLATES:
        from .synth import ScenarioConfig, generate_scene
        rng = np.random.default_rng([7, HARD_LABELS.index(label)])
        T = make_template(mode)
        last = None
        for _ in range(20):
            scene = generate_scene(ScenarioConfig(), label, rng, shuffle=False)
            try:
                rows, _ = epipolar_system(scene.features)
                T.compile(minors(c_matrix(rows)))
                break
            except DegenerateInstanceError as exc:  # pragma: no cover - unlucky sample
                last = exc
        else:  # pragma: no cover
            raise last
        _TEMPLATES[key] = T
    return _TEMPLATES[key]


def _system(C):
    """Residuals and Jacobian of ``C(b,c,d) [1, alpha]`` in ``(b, c, d, alpha)``."""
    def fun(X):
        V, G = monomial_values_and_grad(DEHOMOG_MONOMIALS, X[:, :3])
        alpha = X[:, 3]
        r0 = V @ C[:, 0].T
        r1 = V @ C[:, 1].T
        F = r0 + alpha[:, None] * r1
        J = np.empty(F.shape + (4,))
        J[..., :3] = np.einsum("km,nmv->nkv", C[:, 0], G) + alpha[:, None, None] * np.einsum(
            "km,nmv->nkv", C[:, 1], G)
        J[..., 3] = r1
        return F, J
    return fun


def _alpha_ls(C, bcd):
    V, _ = monomial_values_and_grad(DEHOMOG_MONOMIALS, bcd)
    r0 = V @ C[:, 0].T
    r1 = V @ C[:, 1].T
    den = np.sum(r1 * r1, axis=1)
    return -np.sum(r0 * r1, axis=1) / np.where(den > 0, den, 1.0)


def _dedupe(poses, tol=1e-9):
    out = []
    for p in poses:
        if not any(np.max(np.abs(p.R - q.R)) < tol and np.max(np.abs(p.t - q.t)) < tol * (1 + np.linalg.norm(q.t))
                   for q in out):
            out.append(p)
    return out


def _candidates(rows, T, imag_tol, consistency_tol, polish):
    """Polished ``(b, c, d, alpha)`` candidates and the largest polishing step.

    The step taken by Newton from an eigenvector estimate to a verified root
    measures how well separated the eigenvalues were.
    """
    C = c_matrix(rows)
    sols = eigen_solutions(T.action_matrix(minors(C)), imag_tol, consistency_tol, split_var=0)
    if not sols:
        return np.zeros((0, 4)), 0.0
    bcd = np.array(sols)
    X = np.column_stack([bcd, _alpha_ls(C, bcd)])
    if not polish:
        return X, 0.0
    fun = _system(C)
    Y = newton(fun, X, steps=40)
    F = np.abs(fun(Y)[0]).max(axis=1)
    step = np.abs(Y - X)[:, :3].max(axis=1) / (1 + np.abs(Y[:, :3]).max(axis=1))
    worst = float(step[F < 1e-10].max()) if np.any(F < 1e-10) else 1.0
    return recover_collisions(fun, X, Y), worst


def solve_canonical(features, label: str, rig: StereoRig | None = None, mode: str = "upto3",
                    polish: bool = True, residual_tol: float = RESIDUAL_TOL,
                    imag_tol: float = IMAG_TOL, consistency_tol: float | None = None):
    rows, anchor = epipolar_system(features, rig)
    T = get_template(label, mode)
    X, worst = _candidates(rows, T, imag_tol, consistency_tol, polish)
    batches = [(X, np.eye(3))]
    if polish and worst > RESOLVE_STEP:
        # clustered eigenvalues: solve again in rotated quaternion coordinates,
        # R = R' R0, which moves the roots apart along d
        R0 = PRE_ROTATION
        turned = LinearRows(rows.A @ R0.T, rows.B @ R0.T, rows.c0, rows.c1)
        batches.append((_candidates(turned, T, imag_tol, consistency_tol, polish)[0], R0))
    poses = []
    for X, R0 in batches:
        for b, c, d, alpha in X:
            q = np.array([1.0, b, c, d])
            R = quat_to_rotation(q) @ R0
            res = float(np.max(scaled_residual(rows, R, alpha)))
            if not np.isfinite(res) or res > residual_tol:
                continue
            t = alpha * anchor.u - R @ anchor.S - anchor.offset
            a = 1.0 / np.linalg.norm(q)
            poses.append(Pose(R, t, {"alpha": float(alpha), "residual": res,
                                     "low_confidence": bool(a < LOW_CONFIDENCE_A)}))
    poses.sort(key=lambda p: (p.meta["alpha"] <= 0, p.meta["residual"]))
    return _dedupe(poses)[:N_SOLUTIONS]


def solve_episego(features, label=None, rig: StereoRig | None = None, **kw):
    """All real candidate poses (at most 32) for a hard-case feature set.

    ``features`` may be in any order and either camera assignment; the
    returned poses map camera-1 coordinates to camera-2 coordinates of the
    input as given.
    """
    from .solve import run_canonical
    from .cases import Route
    return run_canonical(features, label, "episego", rig, expect=(Route.HARD_EPISEGO,), **kw)
