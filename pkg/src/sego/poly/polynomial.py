"""Sparse multivariate polynomials with graded reverse lexicographic term order."""
from __future__ import annotations

from itertools import combinations_with_replacement
from numbers import Number

import numpy as np

from ..errors import InvalidInputError

MAX_DEGREE = 8


def grevlex_key(m):
    """Sort key; larger key means larger monomial in grevlex."""
    return (sum(m), tuple(-e for e in reversed(m)))


def mono_mul(m1, m2):
    return tuple(i + j for i, j in zip(m1, m2))


def mono_divides(m1, m2) -> bool:
    return all(i <= j for i, j in zip(m1, m2))


def unit_monomial(nvars: int, var: int, power: int = 1):
    e = [0] * nvars
    e[var] = power
    return tuple(e)


def monomials_of_degree(nvars: int, degree: int):
    """All monomials of exactly ``degree`` in ``nvars`` variables, grevlex-descending."""
    out = []
    for combo in combinations_with_replacement(range(nvars), degree):
        e = [0] * nvars
        for v in combo:
            e[v] += 1
        out.append(tuple(e))
    return sorted(out, key=grevlex_key, reverse=True)


def monomials_up_to(nvars: int, degree: int):
    out = []
    for d in range(degree, -1, -1):
        out.extend(monomials_of_degree(nvars, d))
    return out


def parse_monomial(text: str, names: str):
    """``parse_monomial("b^2c", "bcd") -> (2, 1, 0)``; ``"1"`` is the unit monomial."""
    e = [0] * len(names)
    text = text.replace("*", "").replace(" ", "")
    if text in ("", "1"):
        return tuple(e)
    i = 0
    while i < len(text):
        v = names.index(text[i])
        i += 1
        p = 1
        if i < len(text) and text[i] == "^":
            j = i + 1
            while j < len(text) and text[j].isdigit():
                j += 1
            p = int(text[i + 1:j])
            i = j
        e[v] += p
    return tuple(e)


class MultiPoly:
    """Polynomial as a mapping ``exponent tuple -> coefficient``.

    Zero coefficients are never stored.  ``names`` only affects printing.
    """

    __slots__ = ("nvars", "terms", "names")

    def __init__(self, terms=None, nvars: int | None = None, names: str | None = None):
        terms = dict(terms or {})
        if nvars is None:
            if not terms:
                raise InvalidInputError("nvars is required for an empty polynomial")
            nvars = len(next(iter(terms)))
        self.nvars = nvars
        self.names = names or "xyzwv"[:nvars]
        self.terms = {}
        for m, c in terms.items():
            m = tuple(int(e) for e in m)
            if len(m) != nvars or min(m, default=0) < 0:
                raise InvalidInputError(f"bad monomial {m} for {nvars} variables")
            if c != 0:
                self.terms[m] = self.terms.get(m, 0.0) + c
        self.terms = {m: c for m, c in self.terms.items() if c != 0}

    @classmethod
    def constant(cls, c, nvars: int, names=None):
        return cls({(0,) * nvars: c}, nvars, names)

    @classmethod
    def variable(cls, i: int, nvars: int, names=None):
        return cls({unit_monomial(nvars, i): 1.0}, nvars, names)

    @classmethod
    def from_dense(cls, coeffs, monomials, names=None):
        monomials = list(monomials)
        return cls(dict(zip(monomials, np.asarray(coeffs, dtype=float))), len(monomials[0]), names)

    def _like(self, terms):
        return MultiPoly(terms, self.nvars, self.names)

    def _coerce(self, other):
        if isinstance(other, MultiPoly):
            if other.nvars != self.nvars:
                raise InvalidInputError("polynomials over different variable sets")
            return other
        if isinstance(other, Number):
            return MultiPoly.constant(other, self.nvars, self.names)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        t = dict(self.terms)
        for m, c in other.terms.items():
            t[m] = t.get(m, 0.0) + c
        return self._like(t)

    __radd__ = __add__

    def __neg__(self):
        return self._like({m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Number):
            return self._like({m: c * other for m, c in self.terms.items()})
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        t = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = mono_mul(m1, m2)
                t[m] = t.get(m, 0.0) + c1 * c2
        return self._like(t)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        out = MultiPoly.constant(1.0, self.nvars, self.names)
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def multiply_monomial(self, m):
        return self._like({mono_mul(k, m): c for k, c in self.terms.items()})

    def degree(self) -> int:
        return max((sum(m) for m in self.terms), default=-1)

    def monomials(self):
        """Monomials in grevlex-descending order."""
        return sorted(self.terms, key=grevlex_key, reverse=True)

    def leading_term(self):
        m = self.monomials()[0]
        return m, self.terms[m]

    def coefficient(self, m) -> float:
        return self.terms.get(tuple(m), 0.0)

    def dense(self, monomials) -> np.ndarray:
        return np.array([self.terms.get(tuple(m), 0.0) for m in monomials])

    def __call__(self, *x):
        x = np.asarray(x[0] if len(x) == 1 else x, dtype=float)
        return float(sum(c * np.prod(x ** np.array(m)) for m, c in self.terms.items()))

    evaluate = __call__

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for m in self.monomials():
            c = self.terms[m]
            mono = "".join(
                (self.names[i] + (f"^{e}" if e > 1 else "")) for i, e in enumerate(m) if e
            )
            parts.append(f"{c:+.6g}" + (f"*{mono}" if mono else ""))
        return " ".join(parts)


def expand_and_multiply(equations, multipliers):
    """Every product ``equation * multiplier``, expanded and collected.

    The output is ordered equation-major, multiplier-minor.
    """
    equations = list(equations)
    if equations:
        nv = equations[0].nvars
        if any(e.nvars != nv for e in equations) or any(len(m) != nv for m in multipliers):
            raise InvalidInputError("inconsistent variable sets")
    return [e.multiply_monomial(tuple(m)) for e in equations for m in multipliers]


class ProductTable:
    """Precomputed index map for multiplying dense polynomials on fixed supports.

    ``table(p, q)`` multiplies coefficient vectors ``p`` (on ``left``) and
    ``q`` (on ``right``) returning coefficients on ``self.out``.  Works on
    stacked leading axes.
    """

    def __init__(self, left, right, out=None):
        self.left = list(left)
        self.right = list(right)
        prods = {mono_mul(a, b) for a in self.left for b in self.right}
        self.out = list(out) if out is not None else sorted(prods, key=grevlex_key, reverse=True)
        index = {m: i for i, m in enumerate(self.out)}
        M = np.zeros((len(self.left) * len(self.right), len(self.out)))
        for i, a in enumerate(self.left):
            for j, b in enumerate(self.right):
                M[i * len(self.right) + j, index[mono_mul(a, b)]] = 1.0
        self.matrix = M

    def __call__(self, p, q):
        p = np.asarray(p)
        q = np.asarray(q)
        outer = p[..., :, None] * q[..., None, :]
        return outer.reshape(outer.shape[:-2] + (-1,)) @ self.matrix


def evaluate_monomials(monomials, x) -> np.ndarray:
    """Evaluate monomials at points ``x`` of shape ``(..., nvars)``."""
    E = np.asarray(monomials, dtype=float)
    x = np.asarray(x, dtype=float)
    return np.prod(x[..., None, :] ** E, axis=-1)
