"""Exact-coefficient Bell polynomials and truncated time-derivative arithmetic.

A :class:`Jet` stores the derivatives ``a^(0), ..., a^(n)`` of a quantity at
one instant.  Products follow Leibniz's rule and compositions with scalar
functions follow Faa di Bruno's formula

    (f o g)^(n) = sum_k f^(k)(g^(0)) B_{n,k}(g^(1), ..., g^(n-k+1)),

with the partial Bell polynomials expanded over integer partitions and their
combinatorial coefficients kept as exact rationals.
"""
from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from math import comb, factorial

import numpy as np


@lru_cache(maxsize=None)
def partitions(n, k, largest=None):
    """Partitions of ``n`` into exactly ``k`` positive parts, non-increasing."""
    if largest is None:
        largest = n
    if k == 0:
        return [()] if n == 0 else []
    out = []
    for first in range(min(n - k + 1, largest), 0, -1):
        for rest in partitions(n - first, k - 1, first):
            out.append((first,) + rest)
    return out


@lru_cache(maxsize=None)
def bell_terms(n, k):
    """Terms of ``B_{n,k}`` as (exact coefficient, multiplicities by part size)."""
    terms = []
    for part in partitions(n, k):
        mult = {}
        for p in part:
            mult[p] = mult.get(p, 0) + 1
        den = 1
        for size, m in mult.items():
            den *= factorial(m) * factorial(size) ** m
        terms.append((Fraction(factorial(n), den), tuple(sorted(mult.items()))))
    return tuple(terms)


def bell_polynomial(n, k, x):
    """Partial Bell polynomial ``B_{n,k}(x_1, x_2, ...)``; ``x[i-1]`` is ``x_i``."""
    if n == 0 and k == 0:
        return 1
    total = 0
    for coef, mult in bell_terms(n, k):
        term = None
        for size, m in mult:
            f = x[size - 1] ** m
            term = f if term is None else term * f
        total = total + (coef if term is None else term * float(coef) if not isinstance(
            term, Fraction) else term * coef)
    return total


class Jet:
    """Time derivatives ``[a^(0), ..., a^(n)]`` of a (field-valued) quantity."""

    __slots__ = ("d",)

    def __init__(self, derivs):
        self.d = [np.asarray(x, dtype=float) if not isinstance(x, (int, float)) else float(x)
                  for x in derivs]

    @classmethod
    def constant(cls, value, order):
        return cls([value] + [0.0] * order)

    @property
    def order(self):
        return len(self.d) - 1

    def _coerce(self, other):
        if isinstance(other, Jet):
            return other
        return Jet.constant(other, self.order)

    def __add__(self, other):
        o = self._coerce(other)
        n = min(self.order, o.order)
        return Jet([self.d[i] + o.d[i] for i in range(n + 1)])

    __radd__ = __add__

    def __neg__(self):
        return Jet([-x for x in self.d])

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet([x * other for x in self.d])
        n = min(self.order, other.order)
        out = []
        for m in range(n + 1):
            acc = 0.0
            for k in range(m + 1):
                acc = acc + comb(m, k) * (self.d[k] * other.d[m - k])
            out.append(acc)
        return Jet(out)

    __rmul__ = __mul__

    def compose(self, fderivs):
        """``f o self`` where ``fderivs(x, n)`` returns ``[f(x), ..., f^(n)(x)]``."""
        n = self.order
        fd = fderivs(self.d[0], n)
        out = [fd[0]]
        for m in range(1, n + 1):
            acc = 0.0
            for k in range(1, m + 1):
                acc = acc + fd[k] * bell_polynomial(m, k, self.d[1:])
            out.append(acc)
        return Jet(out)

    def reciprocal(self):
        return self.compose(lambda x, n: [(-1) ** k * factorial(k) / x ** (k + 1)
                                          for k in range(n + 1)])

    def log(self):
        return self.compose(lambda x, n: [np.log(x)] + [(-1) ** (k - 1) * factorial(k - 1) / x**k
                                                        for k in range(1, n + 1)])

    def exp(self):
        return self.compose(lambda x, n: [np.exp(x)] * (n + 1))

    def power(self, a):
        def fd(x, n):
            out, c = [], 1.0
            for k in range(n + 1):
                out.append(c * x ** (a - k))
                c *= a - k
            return out
        return self.compose(fd)

    def truncate(self, n):
        return Jet(self.d[:n + 1])

    def shift(self):
        """Jet of the time derivative (drops the top order)."""
        return Jet(self.d[1:])
