"""PPSEgo: hard cases from point and line projection constraints.

Camera 2 is first rotated so that the anchor's observation becomes the
image centre ``e3``; then ``t = alpha e3 - R S - t0`` and every constraint row
is ``D(a, b, c, d) [1, alpha]^T = 0`` with quadratics (plus constants) in the
entries of ``D``.  Eliminating ``alpha`` by row combinations and by the 2x2
minors of ``D``, together with the unit-norm constraint, gives a system with
16 solutions (8 rotations, each with both quaternion signs) solved by the
action of ``a``.
"""
from __future__ import annotations

import numpy as np

from .cases import HARD_LABELS, LINE, POINT, FeatureTriplet, Route
from .constraints import QUAT_MONOMIALS, LinearRows, scaled_residual
from .errors import DegenerateInstanceError, InvalidInputError
from .geometry import Pose, StereoRig, ViewId, axis_angle_matrix, quat_to_rotation
from .poly.newton import monomial_values_and_grad, newton
from .poly.polynomial import ProductTable, parse_monomial
from .poly.template import IMAG_TOL, EliminationTemplate, eigen_solutions

N_SOLUTIONS = 16
RESIDUAL_TOL = 1e-6
RANK_TOL = 1e-9
E3 = np.array([0.0, 0.0, 1.0])

SUPPORT = QUAT_MONOMIALS + [(0, 0, 0, 0)]
_MINOR = ProductTable(SUPPORT, SUPPORT)
QUARTICS = _MINOR.out
_PAIRS = [(i, j) for i in range(4) for j in range(i + 1, 4)]

BASIS_A = [parse_monomial(s, "abcd") for s in
           "1 a a^2 a^3 b b^2 ab a^2b c ac a^2c bc d ad a^2d bd".split()]
BASIS_B = [parse_monomial(s, "abcd") for s in
           "1 a a^2 a^3 a^4 b b^2 ab a^2b c ac a^2c bc d ad a^2d".split()]
CASE_BASIS = {
    "S1P1L-1P": BASIS_A, "S1P1L-1L": BASIS_A,
    "S2P-1L": BASIS_B, "S2P-1P": BASIS_B, "S1P-2L": BASIS_B,
}
ACTION_VAR = 0  # a


def _cascade():
    """Multipliers produced by multiplying by a,b,c,d, then a,b,c, then a,b, then a (with repeats)."""
    steps = [range(4), range(3), range(2), range(1)]
    level = [(0, 0, 0, 0)]
    out = list(level)
    for vars_ in steps:
        level = [tuple(e + (k == v) for k, e in enumerate(m)) for m in level for v in vars_]
        out.extend(level)
    return out


CASCADE = _cascade()  # 65 entries
_PRE_F2 = [parse_monomial(s, "abcd") for s in ("ab", "ac", "b^2", "bc", "c^2")]
_A2 = parse_monomial("a^2", "abcd")
UNIT_NORM = np.array([1.0 if m in ((2, 0, 0, 0), (0, 2, 0, 0), (0, 0, 2, 0), (0, 0, 0, 2)) else 0.0
                      for m in QUAT_MONOMIALS] + [-1.0])


def preprocess_rotation(u_raw) -> np.ndarray:
    """Smallest rotation taking the direction ``u_raw`` to ``[0, 0, 1]``."""
    u = np.asarray(u_raw, dtype=float).reshape(3)
    n = np.linalg.norm(u)
    if not n > 0 or not np.isfinite(n):
        raise InvalidInputError("u_raw must be a finite nonzero vector")
    u = u / n
    axis = np.cross(u, E3)
    s, c = np.linalg.norm(axis), u[2]
    if s < 1e-15:
        return np.eye(3) if c > 0 else np.diag([1.0, -1.0, -1.0])
    return axis_angle_matrix(axis / s, np.arctan2(s, c))


class ProjectionSetup:
    """Anchor data in the pre-rotated camera-2 frame."""

    def __init__(self, anchor: FeatureTriplet, rig: StereoRig | None = None):
        if anchor.kind != POINT or anchor.main_camera != 1:
            raise InvalidInputError("the anchor must be a point whose main camera is camera 1")
        self.rig = rig
        self.S = anchor.triangulate(rig)
        o = anchor.other_observation
        self.Rt = preprocess_rotation(o.x)
        self.view0 = o.view
        self.t0 = self.Rt @ o.view.offset(rig)

    def offset2(self, view: ViewId) -> np.ndarray:
        """Offset of a camera-2 view in the rotated frame."""
        return self.Rt @ view.offset(self.rig)


def _direction_check(feature, direction):
    expected = "1->2" if feature.main_camera == 1 else "2->1"
    if direction is not None and direction != expected:
        raise InvalidInputError(f"feature projects {expected}, not {direction}")


def point_projection_rows(feature: FeatureTriplet, setup: ProjectionSetup, direction=None) -> LinearRows:
    """``y3 pi_k - y_k pi_3 = 0`` (k = 1, 2) for the projection ``pi`` of a triangulated point."""
    if feature.kind != POINT:
        raise InvalidInputError("expected a point feature")
    _direction_check(feature, direction)
    X = feature.triangulate(setup.rig)
    o = feature.other_observation
    A, B, c0, c1 = [], [], [], []
    if feature.main_camera == 1:
        y = setup.Rt @ o.x
        delta = setup.offset2(o.view) - setup.t0
        for k in range(2):
            w = y[2] * np.eye(3)[k] - y[k] * E3
            A.append(np.outer(w, X - setup.S))
            B.append(np.zeros((3, 3)))
            c0.append(w @ delta)
            c1.append(w[2])
    else:
        Xr = setup.Rt @ X
        p = setup.S + o.view.offset(setup.rig)
        for k in range(2):
            w = o.x[2] * np.eye(3)[k] - o.x[k] * E3
            A.append(np.outer(Xr + setup.t0, w))
            B.append(-np.outer(E3, w))
            c0.append(w @ p)
            c1.append(0.0)
    return LinearRows(np.array(A), np.array(B), c0, c1)


def line_projection_rows(feature: FeatureTriplet, setup: ProjectionSetup, direction=None) -> LinearRows:
    """``l . pi(X_j) = 0`` for the two points ``X_1, X_2`` of a triangulated line."""
    if feature.kind != LINE:
        raise InvalidInputError("expected a line feature")
    _direction_check(feature, direction)
    Xs = feature.triangulate(setup.rig)
    o = feature.other_observation
    A, B, c0, c1 = [], [], [], []
    if feature.main_camera == 1:
        l = setup.Rt @ o.l
        delta = setup.offset2(o.view) - setup.t0
        for X in Xs:
            A.append(np.outer(l, X - setup.S))
            B.append(np.zeros((3, 3)))
            c0.append(l @ delta)
            c1.append(l[2])
    else:
        l = o.l
        p = setup.S + o.view.offset(setup.rig)
        for X in Xs:
            A.append(np.outer(setup.Rt @ X + setup.t0, l))
            B.append(-np.outer(E3, l))
            c0.append(l @ p)
            c1.append(0.0)
    return LinearRows(np.array(A), np.array(B), c0, c1)


def projection_system(features, rig: StereoRig | None = None):
    """Setup and the four rows for canonically ordered features."""
    features = list(features)
    setup = ProjectionSetup(features[0], rig)
    parts = [point_projection_rows(f, setup) if f.kind == POINT else line_projection_rows(f, setup)
             for f in features[1:]]
    rows = LinearRows.stack(parts)
    if len(rows) != 4:
        raise InvalidInputError("hard cases give exactly four rows")
    return rows, setup


def d_matrix(rows: LinearRows) -> np.ndarray:
    """``D[k, j]``: coefficients on ``SUPPORT`` of row ``k``, column ``j`` (1 or alpha)."""
    q0, q1 = rows.quat_coeffs()
    D = np.stack([np.column_stack([q0, rows.c0]), np.column_stack([q1, rows.c1])], axis=1)
    s = np.max(np.abs(D), axis=(1, 2))
    if np.any(s == 0):
        raise DegenerateInstanceError("a constraint row vanishes identically")
    return D / s[:, None, None]


def alpha_free(D, tol: float = RANK_TOL) -> np.ndarray:
    """Quadrics free of alpha: combinations of rows annihilating the alpha column."""
    U, s, _ = np.linalg.svd(D[:, 1])
    rank = int(np.sum(s > tol * s[0])) if s[0] > 0 else 0
    f = U[:, rank:].T @ D[:, 0]
    n = np.max(np.abs(f), axis=1)
    if np.any(n == 0):
        raise DegenerateInstanceError("alpha-free equation vanishes")
    return f / n[:, None]


def determinant_quartics(D, tol: float = 1e-10):
    """Nonvanishing 2x2 minors of D on ``QUARTICS``."""
    out = []
    for i, j in _PAIRS:
        g = _MINOR(D[i, 0], D[j, 1]) - _MINOR(D[j, 0], D[i, 1])
        s = np.max(np.abs(g))
        if s > tol:
            out.append(g / s)
    return out


def equation_set(n_free: int, n_quartics: int, extended: bool = False):
    """Supports and the F list ``(equation, premultiplier)``.

    F holds ``f1 a^2``, ``f2 {ab, ac, b^2, bc, c^2}``, ``f1``, ``f2`` and the
    quartics, where ``f1`` stands for each alpha-free quadric and ``f2`` for
    the unit-norm constraint.  ``extended`` also multiplies every ``f1`` by
    ``{ab, ac, b^2, bc, c^2}``.
    """
    supports = [SUPPORT] * n_free + [SUPPORT] + [QUARTICS] * n_quartics
    f2 = n_free
    F = [(i, _A2) for i in range(n_free)]
    F += [(f2, m) for m in _PRE_F2]
    F += [(i, (0, 0, 0, 0)) for i in range(n_free)] + [(f2, (0, 0, 0, 0))]
    F += [(n_free + 1 + j, (0, 0, 0, 0)) for j in range(n_quartics)]
    if extended:
        F += [(i, m) for i in range(n_free) for m in _PRE_F2]
    return supports, F


def make_template(label: str, n_free: int, n_quartics: int, extended: bool = False) -> EliminationTemplate:
    supports, F = equation_set(n_free, n_quartics, extended)
    mults = [[] for _ in supports]
    g_size = 0
    for eq, pre in F:
        for m in CASCADE:
            mults[eq].append(tuple(x + y for x, y in zip(pre, m)))
            g_size += 1
    if g_size != len(CASCADE) * len(F):  # structural self-check
        raise AssertionError("cascade size mismatch")
    T = EliminationTemplate(supports, mults, CASE_BASIS[label], ACTION_VAR,
                            name=f"ppsego-{label}-{n_free}-{n_quartics}{'-ext' if extended else ''}")
    T.g_size = g_size
    T.extended = extended
    return T


def _coefficients(D):
    f = alpha_free(D)
    g = determinant_quartics(D)
    return f, g, list(f) + [UNIT_NORM] + g


_TEMPLATES = {}


def _generic_coefficients(label, n_free, n_quartics, rng):
    from .synth import ScenarioConfig, generate_scene
    for _ in range(50):
        scene = generate_scene(ScenarioConfig(), label, rng, shuffle=False)
        try:
            rows, _ = projection_system(scene.features)
            f, g, coeffs = _coefficients(d_matrix(rows))
        except DegenerateInstanceError:  # pragma: no cover - unlucky sample
            continue
        if len(f) == n_free and len(g) == n_quartics:
            return coeffs
    raise DegenerateInstanceError(f"no generic {label} instance with {n_free} alpha-free equations")


def get_template(label: str, n_free: int, n_quartics: int) -> EliminationTemplate:
    """Template compiled on a generic instance (cached).

    The cascade is used exactly as listed in :func:`equation_set`; when it
    cannot reduce the basis, the extended variant is compiled instead.
    """
    key = (label, n_free, n_quartics)
    if key not in _TEMPLATES:
        rng = np.random.default_rng([11, HARD_LABELS.index(label)])
        coeffs = _generic_coefficients(label, n_free, n_quartics, rng)
        try:
            T = make_template(label, n_free, n_quartics).compile(coeffs)
        except DegenerateInstanceError:
            T = make_template(label, n_free, n_quartics, extended=True).compile(coeffs)
        _TEMPLATES[key] = T
    return _TEMPLATES[key]


def _system(D):
    """Rows ``D(q) [1, alpha]`` and ``|q|^2 - 1`` in ``(a, b, c, d, alpha)``."""
    def fun(X):
        V, G = monomial_values_and_grad(SUPPORT, X[:, :4])
        alpha = X[:, 4]
        r0 = V @ D[:, 0].T
        r1 = V @ D[:, 1].T
        n = len(X)
        F = np.empty((n, 5))
        J = np.zeros((n, 5, 5))
        F[:, :4] = r0 + alpha[:, None] * r1
        J[:, :4, :4] = np.einsum("km,nmv->nkv", D[:, 0], G) + alpha[:, None, None] * np.einsum(
            "km,nmv->nkv", D[:, 1], G)
        J[:, :4, 4] = r1
        F[:, 4] = np.sum(X[:, :4] ** 2, axis=1) - 1.0
        J[:, 4, :4] = 2 * X[:, :4]
        return F, J
    return fun


def _alpha_ls(D, q):
    V, _ = monomial_values_and_grad(SUPPORT, q)
    r0 = V @ D[:, 0].T
    r1 = V @ D[:, 1].T
    den = np.sum(r1 * r1, axis=1)
    return -np.sum(r0 * r1, axis=1) / np.where(den > 0, den, 1.0)


def solve_canonical(features, label: str, rig: StereoRig | None = None, polish: bool = True,
                    residual_tol: float = RESIDUAL_TOL, imag_tol: float = IMAG_TOL,
                    consistency_tol: float | None = None):
    rows, setup = projection_system(features, rig)
    D = d_matrix(rows)
    f, g, coeffs = _coefficients(D)
    T = get_template(label, len(f), len(g))
    sols = eigen_solutions(T.action_matrix(coeffs), imag_tol, consistency_tol)
    if not sols:
        return []
    Q = np.array(sols)
    Q[Q[:, 0] < 0] *= -1
    X = np.column_stack([Q, _alpha_ls(D, Q)])
    if polish:
        X = newton(_system(D), X)
    poses, seen = [], []
    for x in X:
        q, alpha = x[:4], x[4]
        if not np.all(np.isfinite(x)) or np.linalg.norm(q) == 0:
            continue
        q = q / np.linalg.norm(q)
        if q[0] < 0:
            q = -q
        Rp = quat_to_rotation(q)
        res = float(np.max(scaled_residual(rows, Rp, alpha)))
        if res > residual_tol or any(np.max(np.abs(q - s)) < 1e-9 for s in seen):
            continue
        seen.append(q)
        tp = alpha * E3 - Rp @ setup.S - setup.t0
        R = setup.Rt.T @ Rp
        t = setup.Rt.T @ tp
        poses.append(Pose(R, t, {"alpha": float(alpha), "residual": res,
                                 "low_confidence": bool(q[0] < 0.02)}))
    poses.sort(key=lambda p: (p.meta["alpha"] <= 0, p.meta["residual"]))
    return poses[:N_SOLUTIONS]


def solve_ppsego(features, label=None, rig: StereoRig | None = None, **kw):
    """All real candidate poses (at most 16) for a hard-case feature set."""
    from .solve import run_canonical
    return run_canonical(features, label, "ppsego", rig, expect=(Route.HARD_PPSEGO,), **kw)
