"""Truncated bivariate Taylor series ("jets") for exact chart derivatives.

A jet of order k stores the Taylor coefficients c_ij of a function of (u, v)
around a base point for all i + j <= k, packed by total degree so that
truncating to a lower order is a prefix slice. Arithmetic propagates the
series exactly up to the operands' common order; ``du``/``dv`` lower the
order by one. Leading array axes broadcast, so one jet can carry many base
points at once.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np


def _size(k: int) -> int:
    return (k + 1) * (k + 2) // 2


@lru_cache(maxsize=None)
def _index(k: int) -> tuple:
    return tuple((d - j, j) for d in range(k + 1) for j in range(d + 1))


def _pos(i: int, j: int) -> int:
    d = i + j
    return d * (d + 1) // 2 + j


@lru_cache(maxsize=None)
def _mul_plan(k: int):
    idx = _index(k)
    Q, R, out = [], [], []
    for p, (i, j) in enumerate(idx):
        for a in range(i + 1):
            for b in range(j + 1):
                Q.append(_pos(a, b))
                R.append(_pos(i - a, j - b))
                out.append(p)
    out = np.asarray(out)
    starts = np.flatnonzero(np.r_[True, out[1:] != out[:-1]])
    return np.asarray(Q), np.asarray(R), starts


@lru_cache(maxsize=None)
def _diff_plan(k: int, axis: int):
    src, fac = [], []
    for (i, j) in _index(k - 1):
        if axis == 0:
            src.append(_pos(i + 1, j))
            fac.append(i + 1)
        else:
            src.append(_pos(i, j + 1))
            fac.append(j + 1)
    return np.asarray(src), np.asarray(fac, dtype=float)


class Jet:
    __slots__ = ("c", "order")
    __array_priority__ = 100

    def __init__(self, coeffs, order: int):
        self.c = np.asarray(coeffs)
        if self.c.dtype.kind != "f":
            self.c = self.c.astype(float)
        self.order = order

    # construction -------------------------------------------------------
    @classmethod
    def variable(cls, base, axis: int, order: int) -> "Jet":
        base = np.asarray(base)
        dtype = base.dtype if base.dtype.kind == "f" else float
        c = np.zeros(base.shape + (_size(order),), dtype=dtype)
        c[..., 0] = base
        if order >= 1:
            c[..., 1 + axis] = 1.0
        return cls(c, order)

    @classmethod
    def constant(cls, value, order: int, shape=(), dtype=None) -> "Jet":
        if dtype is None:
            dtype = np.result_type(value, float)
        c = np.zeros(np.broadcast_shapes(np.shape(value), shape) + (_size(order),),
                     dtype=dtype)
        c[..., 0] = value
        return cls(c, order)

    @property
    def value(self) -> np.ndarray:
        return self.c[..., 0]

    def derivative(self, i: int, j: int) -> np.ndarray:
        """Partial derivative d^i/du^i d^j/dv^j at the base point."""
        if i + j > self.order:
            raise ValueError("derivative beyond jet order")
        return self.c[..., _pos(i, j)] * math.factorial(i) * math.factorial(j)

    def truncate(self, k: int) -> "Jet":
        if k > self.order:
            raise ValueError("cannot raise jet order")
        return Jet(self.c[..., :_size(k)], k)

    # arithmetic ---------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Jet):
            k = min(self.order, other.order)
            return self.c[..., :_size(k)], other.c[..., :_size(k)], k
        return self.c, other, None

    def __add__(self, other):
        if isinstance(other, Jet):
            a, b, k = self._coerce(other)
            return Jet(a + b, k)
        c = self.c.copy()
        c[..., 0] = c[..., 0] + other
        return Jet(c, self.order)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.c, self.order)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.c * np.asarray(other)[..., None], self.order)
        a, b, k = self._coerce(other)
        Q, R, starts = _mul_plan(k)
        prod = a[..., Q] * b[..., R]
        return Jet(np.add.reduceat(prod, starts, axis=-1), k)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return self * (1.0 / np.asarray(other))
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, n):
        if isinstance(n, int) and n >= 0:
            out = Jet.constant(1.0, self.order, self.c.shape[:-1], self.c.dtype)
            for _ in range(n):
                out = out * self
            return out
        a = self.value
        return self._compose([_falling(n, m) * a ** (n - m)
                              for m in range(self.order + 1)])

    def _compose(self, derivs) -> "Jet":
        """g(self) given g's derivatives at the base value (Horner form)."""
        k = self.order
        x = Jet(self.c.copy(), k)
        x.c[..., 0] = 0.0
        out = Jet.constant(derivs[k] / math.factorial(k), k, self.c.shape[:-1],
                           self.c.dtype)
        for m in range(k - 1, -1, -1):
            out = out * x + derivs[m] / math.factorial(m)
        return out

    def reciprocal(self) -> "Jet":
        a = self.value
        return self._compose([(-1) ** m * math.factorial(m) / a ** (m + 1)
                              for m in range(self.order + 1)])

    def sqrt(self) -> "Jet":
        return self ** 0.5

    def sin(self) -> "Jet":
        a = self.value
        cyc = [np.sin(a), np.cos(a), -np.sin(a), -np.cos(a)]
        return self._compose([cyc[m % 4] for m in range(self.order + 1)])

    def cos(self) -> "Jet":
        a = self.value
        cyc = [np.cos(a), -np.sin(a), -np.cos(a), np.sin(a)]
        return self._compose([cyc[m % 4] for m in range(self.order + 1)])

    def exp(self) -> "Jet":
        e = np.exp(self.value)
        return self._compose([e] * (self.order + 1))

    # calculus -----------------------------------------------------------
    def d(self, axis: int) -> "Jet":
        if self.order < 1:
            raise ValueError("cannot differentiate an order-0 jet")
        src, fac = _diff_plan(self.order, axis)
        return Jet(self.c[..., src] * fac, self.order - 1)

    def du(self) -> "Jet":
        return self.d(0)

    def dv(self) -> "Jet":
        return self.d(1)


def _falling(n, m) -> float:
    out = 1.0
    for i in range(m):
        out *= n - i
    return out


# elementwise helpers usable on floats, arrays and jets alike
def sin(x):
    return x.sin() if isinstance(x, Jet) else np.sin(x)


def cos(x):
    return x.cos() if isinstance(x, Jet) else np.cos(x)


def exp(x):
    return x.exp() if isinstance(x, Jet) else np.exp(x)


def sqrt(x):
    return x.sqrt() if isinstance(x, Jet) else np.sqrt(x)
