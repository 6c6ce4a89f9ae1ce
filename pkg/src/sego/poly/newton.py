"""Batched Newton refinement of candidate roots."""
from __future__ import annotations

import numpy as np


def monomial_values_and_grad(monomials, X):
    """Values ``(n, M)`` and gradients ``(n, M, nvars)`` of monomials at points ``X``."""
    E = np.asarray(monomials, dtype=int)
    X = np.asarray(X, dtype=float)
    V = np.prod(X[:, None, :] ** E[None], axis=-1)
    nv = E.shape[1]
    G = np.zeros(V.shape + (nv,))
    for v in range(nv):
        Ed = E.copy()
        c = Ed[:, v].astype(float)
        Ed[:, v] = np.maximum(Ed[:, v] - 1, 0)
        G[:, :, v] = c * np.prod(X[:, None, :] ** Ed[None], axis=-1)
    return V, G


def newton(fun, X, steps: int = 5, stall: float = 0.9):
    """Gauss-Newton steps on ``fun(X) -> (values (n, m), jacobian (n, m, k))``.

    Each candidate keeps its best iterate by residual norm, so a step can never
    make a candidate worse.  A candidate stops once it has converged or a step
    has failed twice in a row to shrink its residual by ``stall``, so
    near-double roots, which converge only linearly, can take many steps
    without slowing the rest.
    """
    X = np.array(X, dtype=float)
    if X.size == 0:
        return X
    F, J = fun(X)
    best = X.copy()
    fbest = np.linalg.norm(F, axis=1)
    keep = fbest >= 1e-15
    active, Xa, F, J = np.flatnonzero(keep), X[keep], F[keep], J[keep]
    misses = np.zeros(active.size, dtype=int)
    for _ in range(steps):
        if active.size == 0:
            break
        try:
            if J.shape[1] == J.shape[2]:
                dx = np.linalg.solve(J, F[..., None])[..., 0]
            else:
                dx = (np.linalg.pinv(J) @ F[..., None])[..., 0]
        except np.linalg.LinAlgError:
            dx = (np.linalg.pinv(J) @ F[..., None])[..., 0]
        Xa = Xa - dx
        ok = np.all(np.isfinite(Xa), axis=1)
        Xa[~ok] = best[active[~ok]]
        F, J = fun(Xa)
        f = np.linalg.norm(F, axis=1)
        better = f < fbest[active]
        best[active[better]] = Xa[better]
        misses = np.where(f < stall * fbest[active], 0, misses + 1)
        keep = (misses < 2) & (f >= 1e-15)
        fbest[active[better]] = f[better]
        active, Xa, F, J, misses = active[keep], Xa[keep], F[keep], J[keep], misses[keep]
    return best


def deflated_newton(fun, x0, roots, steps: int = 20, shift: float = 1.0, tol: float = 1e-13):
    """Newton on ``F(x) * prod_r (1 / |x - r|^2 + shift)`` from a single start.

    Multiplying by the deflation factor removes already known ``roots`` so
    the iteration can reach a different nearby root.  Returns the point with
    the smallest ``|F|`` seen, or ``None`` if none got below ``tol``.
    """
    x = np.array(x0, dtype=float)
    roots = [np.asarray(r, dtype=float) for r in roots]
    best, fbest = None, np.inf
    for _ in range(steps):
        F, J = fun(x[None])
        F, J = F[0], J[0]
        f = np.linalg.norm(F)
        if f < fbest and all(np.linalg.norm(x - r) > 1e-8 * (1 + np.linalg.norm(r)) for r in roots):
            best, fbest = x.copy(), f
        if f < 1e-15:
            break
        m, grad = 1.0, np.zeros_like(x)
        for r in roots:
            e = x - r
            n2 = float(e @ e)
            if n2 == 0.0:
                return best if fbest < tol else None
            mi = 1.0 / n2 + shift
            grad = grad * mi + m * (-2.0 * e / n2 ** 2)
            m *= mi
        G = m * F
        JG = m * J + np.outer(F, grad)
        try:
            dx = np.linalg.lstsq(JG, G, rcond=None)[0]
        except np.linalg.LinAlgError:  # pragma: no cover
            break
        x = x - dx
        if not np.all(np.isfinite(x)):
            break
    return best if fbest < tol else None


def recover_collisions(fun, starts, polished, tol: float = 1e-8):
    """Deflate roots reached from more than one start.

    When several starts converge to the same root, the extra starts are
    re-run with that root deflated.  Returns the polished points followed by
    any newly found roots.
    """
    polished = np.asarray(polished, dtype=float)
    out = [x for x in polished]
    seen = []
    for i, x in enumerate(polished):
        dup = next((r for r in seen if np.linalg.norm(x - r) <= tol * (1 + np.linalg.norm(r))), None)
        if dup is None:
            seen.append(x)
            continue
        y = deflated_newton(fun, starts[i], [dup])
        if y is not None:
            out.append(y)
            seen.append(y)
    return np.array(out)
