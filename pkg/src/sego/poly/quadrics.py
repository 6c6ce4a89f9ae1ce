"""Intersection of three quadrics in three unknowns.

The main path hides one variable, solves the three quadrics linearly for the
three second-degree monomials of the remaining pair and builds a 3x3
polynomial matrix whose determinant is a degree-8 polynomial in the hidden
variable.  The hidden variable is chosen by the condition number of the
quadratic-monomial coefficient matrix.  Systems whose quadratic parts are
linearly dependent are first reduced with the implied linear equations.
"""
from __future__ import annotations

import numpy as np

from ..errors import DegenerateInstanceError, InvalidInputError
from .polynomial import MultiPoly
from .roots import real_roots

# (x^2, xy, xz, y^2, yz, z^2, x, y, z, 1)
QUAD_MONOMIALS = [(2, 0, 0), (1, 1, 0), (1, 0, 1), (0, 2, 0), (0, 1, 1), (0, 0, 2),
                  (1, 0, 0), (0, 1, 0), (0, 0, 1), (0, 0, 0)]
_QIDX = {m: i for i, m in enumerate(QUAD_MONOMIALS)}

SINGULAR_COND = 1e10
VANISH_TOL = 1e-10
_PROBES = (0.3183, -1.2718, 2.0913)
# fixed, generic change of coordinates used when no variable can be hidden
_MIX = np.linalg.qr(np.array([[0.8, -0.3, 0.5], [0.1, 0.9, -0.4], [-0.6, 0.2, 0.7]]))[0]

P_LEN = 9


def _as_coeffs(q) -> np.ndarray:
    if isinstance(q, MultiPoly):
        if q.nvars != 3 or q.degree() > 2:
            raise InvalidInputError("expected a quadric in three unknowns")
        return q.dense(QUAD_MONOMIALS)
    c = np.asarray(q, dtype=float).ravel()
    if c.size != 10:
        raise InvalidInputError("quadric coefficient vector must have 10 entries")
    return c


def quadric_values(Q, X) -> np.ndarray:
    """Evaluate stacked quadrics ``Q`` (k x 10) at points ``X`` (n x 3) -> (n x k)."""
    X = np.atleast_2d(X)
    x, y, z = X[:, 0], X[:, 1], X[:, 2]
    one = np.ones_like(x)
    mons = np.stack([x * x, x * y, x * z, y * y, y * z, z * z, x, y, z, one], axis=1)
    return mons @ np.asarray(Q).T


def quadric_jacobian(Q, X) -> np.ndarray:
    X = np.atleast_2d(X)
    x, y, z = X[:, 0], X[:, 1], X[:, 2]
    zero, one = np.zeros_like(x), np.ones_like(x)
    dx = np.stack([2 * x, y, z, zero, zero, zero, one, zero, zero, zero], axis=1)
    dy = np.stack([zero, x, zero, 2 * y, z, zero, zero, one, zero, zero], axis=1)
    dz = np.stack([zero, zero, x, zero, y, 2 * z, zero, zero, one, zero], axis=1)
    return np.stack([dx @ Q.T, dy @ Q.T, dz @ Q.T], axis=2)  # (n, k, 3)


def scaled_residuals(Q, X) -> np.ndarray:
    """|q_i(x)| divided by the sum of absolute term magnitudes, max over i."""
    X = np.atleast_2d(X)
    x, y, z = X[:, 0], X[:, 1], X[:, 2]
    mons = np.stack([x * x, x * y, x * z, y * y, y * z, z * z, x, y, z, np.ones_like(x)], axis=1)
    num = np.abs(mons @ Q.T)
    den = np.abs(mons) @ np.abs(Q).T
    return np.max(num / np.maximum(den, 1e-300), axis=1)


def newton_polish(Q, X, steps: int = 5) -> np.ndarray:
    """Newton iterations on the square quadric system, keeping improvements only."""
    X = np.array(np.atleast_2d(X), dtype=float)
    res = np.linalg.norm(quadric_values(Q, X), axis=1)
    for _ in range(steps):
        J = quadric_jacobian(Q, X)
        F = quadric_values(Q, X)
        ok = np.abs(np.linalg.det(J)) > 1e-300
        step = np.zeros_like(X)
        if np.any(ok):
            step[ok] = np.linalg.solve(J[ok], F[ok][..., None])[..., 0]
        Xn = X - step
        rn = np.linalg.norm(quadric_values(Q, Xn), axis=1)
        better = np.isfinite(rn) & (rn < res)
        if not np.any(better):
            break
        X[better], res[better] = Xn[better], rn[better]
    return X


# --- polynomials in the hidden variable: fixed-length coefficient arrays (low -> high)

def _pm(a, b):
    return np.convolve(a, b)[:P_LEN]


def _poly(*c):
    out = np.zeros(P_LEN)
    out[: len(c)] = c
    return out


def hidden_matrices(Q, hidden: int):
    """``(A, P)``: quadratic-monomial matrix and the reduced 3x3 polynomial matrix.

    ``P[r, c]`` holds coefficients (lowest degree first) of the linear
    relations ``P(h) @ [y, z, 1] = 0``.
    """
    others = [v for v in range(3) if v != hidden]
    i, j = others

    def mono(*pairs):
        e = [0, 0, 0]
        for v, p in pairs:
            e[v] += p
        return _QIDX[tuple(e)]

    A = Q[:, [mono((i, 2)), mono((i, 1), (j, 1)), mono((j, 2))]]
    B = np.zeros((3, 3, P_LEN))
    B[:, 0, 0] = Q[:, mono((i, 1))]
    B[:, 0, 1] = Q[:, mono((i, 1), (hidden, 1))]
    B[:, 1, 0] = Q[:, mono((j, 1))]
    B[:, 1, 1] = Q[:, mono((j, 1), (hidden, 1))]
    B[:, 2, 0] = Q[:, _QIDX[(0, 0, 0)]]
    B[:, 2, 1] = Q[:, mono((hidden, 1))]
    B[:, 2, 2] = Q[:, mono((hidden, 2))]
    return A, B


def _reduced_matrix(A, B):
    # [y^2, yz, z^2] = P(h) [y, z, 1]
    P = -np.einsum("ij,jkp->ikp", np.linalg.inv(A), B)
    p1, p2, p3 = P
    (p1y, p1z, p11), (p2y, p2z, p21), (p3y, p3z, p31) = p1, p2, p3

    def lin(cyy, cyz, czz, cy, cz, c1):
        # cyy*y^2 + cyz*yz + czz*z^2 + cy*y + cz*z + c1 with the squares substituted
        row = np.empty((3, P_LEN))
        for k, extra in enumerate((cy, cz, c1)):
            row[k] = _pm(cyy, p1[k]) + _pm(cyz, p2[k]) + _pm(czz, p3[k]) + extra
        return row

    zero = np.zeros(P_LEN)
    L1 = lin(p2y, p2z - p1y, -p1z, p21, -p11, zero)
    L2 = lin(-p3y, p2y - p3z, p2z, -p31, p21, zero)
    L3 = lin(
        _pm(p2y, p2y) - _pm(p1y, p3y),
        2 * _pm(p2y, p2z) - _pm(p1y, p3z) - _pm(p1z, p3y),
        _pm(p2z, p2z) - _pm(p1z, p3z),
        2 * _pm(p2y, p21) - _pm(p1y, p31) - _pm(p11, p3y),
        2 * _pm(p2z, p21) - _pm(p1z, p31) - _pm(p11, p3z),
        _pm(p21, p21) - _pm(p11, p31),
    )
    return np.stack([L1, L2, L3])


def _det3(M):
    return (_pm(M[0, 0], _pm(M[1, 1], M[2, 2]) - _pm(M[1, 2], M[2, 1]))
            - _pm(M[0, 1], _pm(M[1, 0], M[2, 2]) - _pm(M[1, 2], M[2, 0]))
            + _pm(M[0, 2], _pm(M[1, 0], M[2, 1]) - _pm(M[1, 1], M[2, 0])))


def _evalm(M, h):
    return np.polynomial.polynomial.polyval(h, M.reshape(-1, P_LEN).T).reshape(3, 3)


def choose_hidden(Q):
    """Condition numbers of the three candidate quadratic-monomial matrices."""
    conds = []
    for k in range(3):
        A, _ = hidden_matrices(Q, k)
        conds.append(np.linalg.cond(A))
    return np.array(conds)


def _solve_hidden(Q, hidden):
    A, B = hidden_matrices(Q, hidden)
    M = _reduced_matrix(A, B)
    # identically singular matrix <=> positive-dimensional intersection
    if all(
        (lambda s: s[-1] <= VANISH_TOL * s[0])(np.linalg.svd(_evalm(M, h), compute_uv=False))
        for h in _PROBES
    ):
        raise DegenerateInstanceError("quadrics intersect in a curve")
    det = _det3(M)
    hs = real_roots(det[::-1])
    out = []
    for h in hs:
        _, s, Vt = np.linalg.svd(_evalm(M, h))
        v = Vt[-1]
        if abs(v[2]) < 1e-12 * np.linalg.norm(v):
            continue
        y, z = v[0] / v[2], v[1] / v[2]
        x = np.empty(3)
        others = [k for k in range(3) if k != hidden]
        x[hidden], x[others[0]], x[others[1]] = h, y, z
        out.append(x)
    return out


def _plane_basis(n):
    n = n / np.linalg.norm(n)
    a = np.eye(3)[np.argmin(np.abs(n))]
    e1 = np.cross(n, a)
    e1 /= np.linalg.norm(e1)
    return np.cross(n, e1), e1


def _compose(Q, x0, E):
    """Quadric ``q(x0 + E s)`` in the parameters ``s`` (E is 3 x k), as a full 3-variable quadric."""
    # quadric as symmetric 4x4 form on homogeneous (x, 1)
    H = np.zeros((4, 4))
    idx = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]
    for c, (i, j) in zip(Q[:6], idx):
        if i == j:
            H[i, i] += c
        else:
            H[i, j] += c / 2
            H[j, i] += c / 2
    H[:3, 3] += Q[6:9] / 2
    H[3, :3] += Q[6:9] / 2
    H[3, 3] += Q[9]
    k = E.shape[1]
    T = np.zeros((4, k + 1))
    T[:3, :k] = E
    T[:3, k] = x0
    T[3, k] = 1.0
    return T.T @ H @ T  # (k+1) x (k+1) form on (s, 1)


def _solve_reduced(Q):
    """Handle systems whose quadratic parts are linearly dependent."""
    Q2 = Q[:, :6]
    U, s, Vt = np.linalg.svd(Q2)
    rank = int(np.sum(s > 1e-10 * max(s[0], 1e-300))) if s[0] > 0 else 0
    W = U.T @ Q  # rows rank.. have (numerically) no quadratic part
    quads, lins = W[:rank], W[rank:, 6:]
    # particular solution and null space of the linear equations
    N, c = lins[:, :3], -lins[:, 3]
    x0 = np.linalg.lstsq(N, c, rcond=None)[0]
    _, sn, Vn = np.linalg.svd(N)
    nrank = int(np.sum(sn > 1e-10 * max(sn[0], 1e-300))) if sn.size else 0
    if nrank < N.shape[0]:
        raise DegenerateInstanceError("linear parts are dependent; intersection is not finite")
    E = Vn[nrank:].T  # 3 x (3 - nrank)
    k = E.shape[1]
    if k == 0:
        return [x0]
    forms = [_compose(q, x0, E) for q in quads]
    if k == 1:
        a, b, c0 = forms[0][0, 0], 2 * forms[0][0, 1], forms[0][1, 1]
        if abs(a) < 1e-14 * max(abs(b), abs(c0), 1e-300):
            if abs(b) < 1e-300:
                raise DegenerateInstanceError("quadric vanishes on the solution line")
            roots = [-c0 / b]
        else:
            roots = real_roots([a, b, c0])
        return [x0 + E[:, 0] * r for r in roots]
    # k == 2: two conics in (s, t); resultant in s
    conics = []
    for F in forms[:2]:
        conics.append((F[0, 0], 2 * F[0, 1], F[1, 1], 2 * F[0, 2], 2 * F[1, 2], F[2, 2]))
    # as polynomials in t: c2 t^2 + c1(s) t + c0(s)
    def coeffs(c):
        ss, st, tt, s1, t1, one = c
        return (_poly(tt), _poly(t1, st), _poly(one, s1, ss))

    (a2, a1, a0), (b2, b1, b0) = coeffs(conics[0]), coeffs(conics[1])
    # Sylvester resultant of two quadratics in t
    res = (_pm(_pm(a2, b0) - _pm(a0, b2), _pm(a2, b0) - _pm(a0, b2))
           - _pm(_pm(a2, b1) - _pm(a1, b2), _pm(a1, b0) - _pm(a0, b1)))
    if np.max(np.abs(res)) < 1e-14:
        raise DegenerateInstanceError("conics share a component")
    out = []
    for sv in real_roots(res[::-1]):
        A2 = np.polynomial.polynomial.polyval(sv, np.stack([a2, a1, a0]).T)
        B2 = np.polynomial.polynomial.polyval(sv, np.stack([b2, b1, b0]).T)
        # eliminate t^2, solve the linear remainder
        lin = A2 * B2[0] - B2 * A2[0]
        if abs(lin[1]) > 1e-12 * max(np.max(np.abs(lin)), 1e-300):
            ts = [-lin[2] / lin[1]]
        else:
            ts = real_roots(A2) if abs(A2[0]) > 0 else real_roots(B2)
        for tv in ts:
            out.append(x0 + E @ np.array([sv, tv]))
    return out


def solve_three_quadrics(q1, q2, q3, hidden: int | None = None, condition_check: bool = True,
                         polish: bool = True):
    """All real common roots of three quadrics in three unknowns.

    Parameters
    ----------
    q1, q2, q3 : MultiPoly or array of 10 coefficients on ``QUAD_MONOMIALS``
    hidden : force the hidden variable (0, 1 or 2) instead of the condition check
    condition_check : hide the variable whose matrix is best conditioned; when
        off, the first variable is hidden unless its matrix is singular.

    Returns
    -------
    list of length-3 arrays (at most 8)
    """
    Q = np.stack([_as_coeffs(q) for q in (q1, q2, q3)])
    if not np.all(np.isfinite(Q)):
        raise InvalidInputError("non-finite quadric coefficients")
    scale = np.max(np.abs(Q), axis=1)
    if np.any(scale == 0):
        raise DegenerateInstanceError("zero quadric")
    Q = Q / scale[:, None]
    s = np.linalg.svd(Q[:, :6], compute_uv=False)
    if s[-1] <= 1e-10 * s[0]:
        sols = _solve_reduced(Q)
    else:
        conds = choose_hidden(Q)
        if hidden is not None:
            if conds[hidden] > SINGULAR_COND:
                raise DegenerateInstanceError(f"variable {hidden} cannot be hidden")
            order = [hidden]
        elif condition_check:
            order = [int(np.argmin(conds))]
        else:
            order = [k for k in range(3) if conds[k] <= SINGULAR_COND][:1]
        if not order or conds[order[0]] > SINGULAR_COND:
            # no variable can be hidden in these coordinates; try a generic rotation
            Qm = _rotate(Q, _MIX)
            conds_m = choose_hidden(Qm)
            k = int(np.argmin(conds_m))
            if conds_m[k] > SINGULAR_COND:
                raise DegenerateInstanceError("all hidden-variable matrices are singular")
            sols = [_MIX @ x for x in _solve_hidden(Qm, k)]
        else:
            sols = _solve_hidden(Q, order[0])
    if not sols:
        return []
    X = np.array(sols, dtype=float)
    if polish:
        X = newton_polish(Q, X)
    return [x for x in X if np.all(np.isfinite(x))]


def _rotate(Q, M):
    """Coefficients of q(M y) for each quadric q."""
    out = []
    for q in Q:
        H = np.zeros((3, 3))
        idx = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]
        for c, (i, j) in zip(q[:6], idx):
            if i == j:
                H[i, i] += c
            else:
                H[i, j] += c / 2
                H[j, i] += c / 2
        Hn = M.T @ H @ M
        g = M.T @ q[6:9]
        out.append([Hn[0, 0], 2 * Hn[0, 1], 2 * Hn[0, 2], Hn[1, 1], 2 * Hn[1, 2], Hn[2, 2],
                    g[0], g[1], g[2], q[9]])
    return np.array(out)
