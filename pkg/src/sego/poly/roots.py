"""Real roots of low-degree univariate polynomials."""
from __future__ import annotations

import numpy as np

from ..errors import InvalidInputError
from .template import IMAG_TOL

TRIM_TOL = 1e-14
NEWTON_STEPS = 5


def trim_leading(coeffs, tol: float = TRIM_TOL) -> np.ndarray:
    """Drop leading coefficients that are negligible relative to the largest one."""
    c = np.asarray(coeffs, dtype=float).ravel()
    if c.size == 0 or not np.any(c):
        raise InvalidInputError("polynomial has no nonzero coefficients")
    big = np.max(np.abs(c))
    k = 0
    while abs(c[k]) < tol * big:
        k += 1
    return c[k:]


def companion(coeffs) -> np.ndarray:
    """Companion matrix of a polynomial given highest degree first."""
    c = trim_leading(coeffs)
    n = c.size - 1
    C = np.zeros((n, n))
    if n:
        C[0, :] = -c[1:] / c[0]
        C[np.arange(1, n), np.arange(n - 1)] = 1.0
    return C


def polish(coeffs, x, steps: int = NEWTON_STEPS) -> float:
    """At most ``steps`` Newton iterations, keeping the best iterate."""
    c = np.asarray(coeffs, dtype=float)
    dc = np.polyder(c)
    best, fbest = x, abs(np.polyval(c, x))
    for _ in range(steps):
        d = np.polyval(dc, x)
        if d == 0.0:
            break
        x = x - np.polyval(c, x) / d
        f = abs(np.polyval(c, x))
        if f < fbest:
            best, fbest = x, f
        else:
            break
    return float(best)


def real_roots(coeffs, imag_tol: float = IMAG_TOL) -> np.ndarray:
    """Real roots (ascending) via eigenvalues of the companion matrix.

    ``numpy.linalg.eigvals`` balances the matrix before the QR iteration.
    Roots are polished with a few Newton steps.
    """
    c = trim_leading(coeffs)
    if c.size == 1:
        return np.zeros(0)
    w = np.linalg.eigvals(companion(c))
    keep = np.abs(w.imag) <= imag_tol * (1.0 + np.abs(w.real))
    return np.sort(np.array([polish(c, r) for r in w.real[keep]]))


def roots_deg8(coeffs) -> np.ndarray:
    """Real roots of a polynomial of degree at most eight (9 coefficients, highest first)."""
    c = np.asarray(coeffs, dtype=float).ravel()
    if c.size != 9:
        raise InvalidInputError("expected 9 coefficients")
    return real_roots(c)
