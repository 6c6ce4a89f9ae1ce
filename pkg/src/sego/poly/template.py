"""Elimination templates, action matrices and eigenvector root extraction.

A template is built once per solver from the *structure* of its input
equations (which monomials each equation may contain and which monomials it
is multiplied by).  Per instance only the numeric coefficients change, so
filling the matrix is a single scatter through precomputed index arrays.

Column order is ``[E | R | B]``: excessive monomials, the *reducible*
monomials ``action * basis`` that fall outside the basis, and the quotient
ring basis itself.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ..errors import DegenerateInstanceError, InvalidInputError, NumericFailureError
from .polynomial import grevlex_key, mono_mul, unit_monomial

PIVOT_TOL = 1e-10
IMAG_TOL = 1e-6
CONSISTENCY_TOL = 1e-4


@dataclass
class TemplateMatrix:
    values: np.ndarray
    columns: list
    n_reducible: int
    n_basis: int

    @property
    def shape(self):
        return self.values.shape

    @property
    def n_excessive(self) -> int:
        return len(self.columns) - self.n_reducible - self.n_basis


@dataclass
class ActionMatrix:
    matrix: np.ndarray
    basis: list
    action_var: int

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def partition_columns(monomials, basis, action_var: int):
    """Split ``monomials`` into ``(E, R, B)`` lists; raises if a needed monomial is missing."""
    basis = [tuple(b) for b in basis]
    nvars = len(basis[0])
    act = unit_monomial(nvars, action_var)
    bset = set(basis)
    R = []
    for b in basis:
        m = mono_mul(act, b)
        if m not in bset and m not in R:
            R.append(m)
    mset = set(monomials)
    missing = [m for m in list(R) + basis if m not in mset]
    if missing:
        raise InvalidInputError(f"template lacks columns {missing[:4]}")
    rset = set(R)
    E = sorted((m for m in mset if m not in rset and m not in bset), key=grevlex_key, reverse=True)
    return E, R, basis


def _equilibrate(M):
    s = np.max(np.abs(M), axis=1)
    s[s == 0] = 1.0
    return M / s[:, None]


def _assemble_action(X_R, R, basis, action_var):
    """Action matrix rows from ``r = X_R @ b`` (reducible monomials in the basis)."""
    nvars = len(basis[0])
    act = unit_monomial(nvars, action_var)
    bidx = {m: i for i, m in enumerate(basis)}
    ridx = {m: i for i, m in enumerate(R)}
    n = len(basis)
    A = np.zeros((n, n))
    for i, b in enumerate(basis):
        m = mono_mul(act, b)
        if m in bidx:
            A[i, bidx[m]] = 1.0
        else:
            A[i] = X_R[ridx[m]]
    return A


def reduce_template(T: TemplateMatrix, action_var: int, basis) -> ActionMatrix:
    """Eliminate the template and build the action matrix of ``action_var``.

    When the non-basis block is square (a compiled template) it is LU
    factorized with partial pivoting; otherwise the excessive columns are
    projected out with a rank-revealing QR and the reducible block is solved
    in least squares.
    """
    basis = [tuple(b) for b in basis]
    nb, nr = T.n_basis, T.n_reducible
    if nb != len(basis):
        raise InvalidInputError("basis size does not match template")
    if [tuple(c) for c in T.columns[-nb:]] != basis:
        raise InvalidInputError("template basis block does not match the declared basis")
    R = [tuple(c) for c in T.columns[len(T.columns) - nb - nr:len(T.columns) - nb]]
    M = _equilibrate(np.asarray(T.values, dtype=float))
    if not np.all(np.isfinite(M)):
        raise NumericFailureError("non-finite template entries")
    ne = M.shape[1] - nb - nr
    N, MB = M[:, : ne + nr], M[:, ne + nr:]
    scale = np.max(np.abs(M)) if M.size else 1.0
    if N.shape[0] == N.shape[1]:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu, piv = scipy.linalg.lu_factor(N, check_finite=False)
        if not np.min(np.abs(np.diag(lu))) > PIVOT_TOL * scale:
            raise DegenerateInstanceError("elimination template is rank deficient")
        X = scipy.linalg.lu_solve((lu, piv), MB, check_finite=False)
        X_R = -X[ne:]
    else:
        ME, MR = N[:, :ne], N[:, ne:]
        if ne:
            Q, Rq, _ = scipy.linalg.qr(ME, pivoting=True)
            d = np.abs(np.diag(Rq))
            rank = int(np.sum(d > PIVOT_TOL * max(d[0], 1e-300))) if d.size else 0
            Z = Q[:, rank:].T
        else:
            Z = np.eye(M.shape[0])
        ZR, ZB = Z @ MR, Z @ MB
        sv = np.linalg.svd(ZR, compute_uv=False)
        if sv.size < nr or sv[-1] < PIVOT_TOL * max(sv[0], 1e-300):
            raise DegenerateInstanceError("reducible monomials cannot be eliminated")
        X_R = -np.linalg.lstsq(ZR, ZB, rcond=None)[0]
    return ActionMatrix(_assemble_action(X_R, R, basis, action_var), basis, action_var)


@dataclass
class EliminationTemplate:
    """Symbolic template: equation supports times multiplier monomials.

    ``supports[i]`` lists the monomials equation ``i`` may contain, in the
    order its coefficient vector uses; ``multipliers[i]`` lists the monomials
    it is multiplied by.  Call :meth:`compile` with one generic instance to
    select an independent row set and a column basis of the excessive block.
    """

    supports: list
    multipliers: list
    basis: list
    action_var: int
    name: str = "template"
    rows: list = field(init=False)
    columns: list = field(init=False)

    def __post_init__(self):
        self.basis = [tuple(b) for b in self.basis]
        self.supports = [[tuple(m) for m in s] for s in self.supports]
        rows, seen = [], set()
        for i, mults in enumerate(self.multipliers):
            for m in mults:
                key = (i, tuple(m))
                if key not in seen:
                    seen.add(key)
                    rows.append(key)
        self.rows = rows
        monos = {mono_mul(m, s) for (i, m) in rows for s in self.supports[i]}
        E, R, B = partition_columns(monos, self.basis, self.action_var)
        self.excessive, self.reducible = E, R
        self.columns = E + R + B
        self._offsets = np.cumsum([0] + [len(s) for s in self.supports])
        self._plan = None
        self._full = self._index_arrays(range(len(self.rows)), self.columns)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def _index_arrays(self, row_ids, columns):
        col = {m: j for j, m in enumerate(columns)}
        ri, ci, si = [], [], []
        for r_new, r in enumerate(row_ids):
            i, m = self.rows[r]
            for k, s in enumerate(self.supports[i]):
                j = col.get(mono_mul(m, s))
                if j is not None:
                    ri.append(r_new)
                    ci.append(j)
                    si.append(self._offsets[i] + k)
        return (np.array(ri, dtype=np.intp), np.array(ci, dtype=np.intp),
                np.array(si, dtype=np.intp), (len(row_ids), len(columns)))

    def _fill(self, coeffs, idx):
        flat = np.concatenate([np.asarray(c, dtype=float).ravel() for c in coeffs])
        if flat.size != self._offsets[-1]:
            raise InvalidInputError("coefficient vectors do not match the equation supports")
        ri, ci, si, shape = idx
        M = np.zeros(shape)
        M[ri, ci] = flat[si]
        return M

    def full_matrix(self, coeffs) -> TemplateMatrix:
        return TemplateMatrix(self._fill(coeffs, self._full), list(self.columns),
                              len(self.reducible), len(self.basis))

    def compile(self, coeffs_sample, tol: float = 1e-9) -> "EliminationTemplate":
        """Choose rows and excessive columns from one generic numeric instance."""
        M = _equilibrate(self._fill(coeffs_sample, self._full))
        ne, nr = len(self.excessive), len(self.reducible)
        ME = M[:, :ne]
        if ne:
            _, Rq, perm = scipy.linalg.qr(ME, mode="economic", pivoting=True)
            d = np.abs(np.diag(Rq))
            rank_e = int(np.sum(d > tol * d[0]))
            e_keep = np.sort(perm[:rank_e])
        else:
            e_keep = np.zeros(0, dtype=np.intp)
        cols = np.concatenate([e_keep, np.arange(ne, ne + nr)])
        sub = M[:, cols]
        _, Rr, rperm = scipy.linalg.qr(sub.T, mode="economic", pivoting=True)
        d = np.abs(np.diag(Rr))
        rank = int(np.sum(d > tol * d[0]))
        if rank < len(cols):
            raise DegenerateInstanceError(
                f"{self.name}: template cannot eliminate the reducible monomials "
                f"(rank {rank} < {len(cols)})"
            )
        row_ids = np.sort(rperm[:rank])
        kept_cols = [self.columns[j] for j in e_keep] + self.reducible + self.basis
        self._plan = (row_ids, kept_cols, len(e_keep), self._index_arrays(row_ids, kept_cols))
        return self

    @property
    def compiled(self) -> bool:
        return self._plan is not None

    @property
    def compiled_shape(self):
        return self._plan[3][3] if self._plan else None

    def matrix(self, coeffs) -> TemplateMatrix:
        if self._plan is None:
            return self.full_matrix(coeffs)
        _, cols, _, idx = self._plan
        return TemplateMatrix(self._fill(coeffs, idx), cols, len(self.reducible), len(self.basis))

    def action_matrix(self, coeffs, fallback: bool = True) -> ActionMatrix:
        """Action matrix for one instance.

        A compiled template is solved by LU on its square block; if that block
        is numerically singular for this instance, the full template is
        reduced instead (when ``fallback`` is set).
        """
        try:
            return reduce_template(self.matrix(coeffs), self.action_var, self.basis)
        except DegenerateInstanceError:
            if self._plan is None or not fallback:
                raise
        return reduce_template(self.full_matrix(coeffs), self.action_var, self.basis)


def _clusters(w, tol):
    """Groups of eigenvalue indices closer than ``tol * (1 + |w|)`` (single linkage)."""
    n = len(w)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(w[i] - w[j]) <= tol * (1.0 + min(abs(w[i]), abs(w[j]))):
                parent[find(i)] = find(j)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def _shift_pairs(basis, var):
    """Index pairs ``(i, j)`` with ``basis[j] = var * basis[i]``."""
    idx = {m: i for i, m in enumerate(basis)}
    step = unit_monomial(len(basis[0]), var)
    return [(i, idx[mono_mul(m, step)]) for i, m in enumerate(basis) if mono_mul(m, step) in idx]


def _split_cluster(M, w, members, pairs, imag_tol):
    """Solution vectors inside the invariant subspace of a cluster of eigenvalues.

    The subspace comes from a reordered real Schur form.  Inside it, the
    multiplication by a second variable is known on the basis monomials whose
    multiples stay in the basis; its eigenvectors separate the solutions.
    """
    c = float(np.mean(w[members].real))
    r = float(np.max(np.abs(w[members] - c))) * (1 + 1e-9) + 1e-14
    sel = np.abs(w - c) <= r
    k = int(np.sum(sel))
    _, Z, sdim = scipy.linalg.schur(M, output="real", sort=lambda x, y: abs(complex(x, y) - c) <= r)
    if sdim != k:
        return None
    Z = Z[:, :k]
    src = np.array([i for i, _ in pairs])
    dst = np.array([j for _, j in pairs])
    Zs = Z[src]
    sv = np.linalg.svd(Zs, compute_uv=False)
    if sv[-1] < 1e-8 * sv[0]:
        return None
    K = np.linalg.lstsq(Zs, Z[dst], rcond=None)[0]
    mu, Y = np.linalg.eig(K)
    out = []
    for m, y in zip(mu, Y.T):
        if abs(m.imag) > imag_tol * (1.0 + abs(m.real)):
            continue
        out.append(Z @ y)
    return out


def eigen_solutions(A: ActionMatrix, imag_tol: float = IMAG_TOL,
                    consistency_tol: float | None = CONSISTENCY_TOL,
                    split_var: int | None = None, cluster_tol: float = 1e-2):
    """Real solutions encoded by the eigenvectors of an action matrix.

    Returns a list of arrays with one value per variable.  The action
    variable is read from the eigenvalue, the others from the degree-one
    basis monomials after normalizing by the coordinate of monomial 1.

    With ``split_var`` set, eigenvalues that lie within ``cluster_tol`` of
    each other are not trusted individually: their common invariant subspace
    is split by multiplication with ``split_var`` instead, and every variable
    is read from the resulting vectors.
    """
    M = np.asarray(A.matrix, dtype=float)
    if not np.all(np.isfinite(M)):
        raise NumericFailureError("non-finite action matrix")
    try:
        w, V = np.linalg.eig(M)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericFailureError(str(exc)) from exc
    basis = [tuple(b) for b in A.basis]
    nvars = len(basis[0])
    idx = {m: i for i, m in enumerate(basis)}
    one = (0,) * nvars
    if one not in idx:
        raise InvalidInputError("basis must contain the monomial 1")
    lin = {}
    for v in range(nvars):
        m = unit_monomial(nvars, v)
        if v != A.action_var and m not in idx:
            raise InvalidInputError(f"variable {v} is not readable from the basis")
        lin[v] = idx.get(m)
    checks = []
    if consistency_tol is not None:
        for m, i in idx.items():
            if sum(m) == 2 and max(m) == 1:
                u, v = [k for k, e in enumerate(m) if e]
                if u != A.action_var and v != A.action_var:
                    checks.append((i, lin[u], lin[v]))

    # (eigenvalue or None, vector) candidates
    cands = []
    if split_var is not None and lin[A.action_var] is not None:
        pairs = _shift_pairs(basis, split_var)
        for members in _clusters(w, cluster_tol):
            vecs = _split_cluster(M, w, members, pairs, imag_tol) if len(members) > 1 else None
            if vecs is None:
                cands.extend((w[k], V[:, k]) for k in members)
            else:
                cands.extend((None, v) for v in vecs)
    else:
        cands = [(w[k], V[:, k]) for k in range(len(w))]

    sols = []
    for lam, vec in cands:
        if lam is not None and abs(lam.imag) > imag_tol * (1.0 + abs(lam.real)):
            continue
        c1 = vec[idx[one]]
        if abs(c1) < 1e-14 * np.max(np.abs(vec)):
            continue
        vec = vec / c1
        if lam is None and np.max(np.abs(vec.imag)) > imag_tol * (1.0 + np.max(np.abs(vec.real))):
            continue
        vec = vec.real
        x = np.empty(nvars)
        for v in range(nvars):
            x[v] = lam.real if (v == A.action_var and lam is not None) else vec[lin[v]]
        ok = True
        for i, iu, iv in checks:
            p = vec[iu] * vec[iv]
            if abs(vec[i] - p) > consistency_tol * (1.0 + abs(p)):
                ok = False
                break
        if ok:
            sols.append(x)
    sols.sort(key=lambda x: x[A.action_var])
    return sols
