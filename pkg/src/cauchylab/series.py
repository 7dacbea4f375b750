"""Truncated Taylor series in ``v`` with array-valued coefficients.

Used to restrict the field equation to the backward cone order by order: a
quantity ``q(u, v)`` is carried as ``sum_k c_k(u) v**k`` up to a fixed order.
"""

from __future__ import annotations

import math

import numpy as np


class Series:
    __slots__ = ("c",)

    def __init__(self, coeffs):
        self.c = np.asarray(coeffs, dtype=float)

    @property
    def order(self) -> int:
        return self.c.shape[0] - 1

    @classmethod
    def const(cls, value, order, like=None):
        value = np.asarray(value, dtype=float)
        c = np.zeros((order + 1,) + value.shape)
        c[0] = value
        return cls(c)

    @classmethod
    def variable(cls, order, shift=0.0):
        """The series of ``v + shift``."""
        shift = np.asarray(shift, dtype=float)
        c = np.zeros((order + 1,) + shift.shape)
        c[0] = shift
        if order >= 1:
            c[1] = 1.0
        return cls(c)

    def _coerce(self, other):
        if isinstance(other, Series):
            return other
        return Series.const(np.broadcast_to(other, self.c.shape[1:]), self.order)

    def __add__(self, other):
        other = self._coerce(other)
        return Series(self.c + other.c)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        return Series(self.c - other.c)

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __neg__(self):
        return Series(-self.c)

    def __mul__(self, other):
        if not isinstance(other, Series):
            return Series(self.c * np.asarray(other, dtype=float))
        m = self.order
        a, b = np.broadcast_arrays(self.c, other.c)
        out = np.zeros_like(a)
        for k in range(m + 1):
            for j in range(k + 1):
                out[k] = out[k] + a[j] * b[k - j]
        return Series(out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Series):
            return Series(self.c / np.asarray(other, dtype=float))
        return self * other.power(-1.0)

    def __pow__(self, n):
        if isinstance(n, (int, np.integer)) and n >= 0:
            out = Series.const(np.ones(self.c.shape[1:]), self.order)
            for _ in range(int(n)):
                out = out * self
            return out
        return self.power(float(n))

    def power(self, alpha: float) -> "Series":
        """``self**alpha`` for a series with nonzero constant term."""
        f = self.c
        if np.any(f[0] == 0):
            raise ZeroDivisionError("power of a series with vanishing constant term")
        g = np.zeros_like(f)
        g[0] = f[0] ** alpha
        for k in range(1, self.order + 1):
            acc = np.zeros_like(f[0])
            for j in range(1, k + 1):
                acc = acc + ((alpha + 1.0) * j - k) * f[j] * g[k - j]
            g[k] = acc / (k * f[0])
        return Series(g)

    def sincos(self):
        f = self.c
        s = np.zeros_like(f)
        c = np.zeros_like(f)
        s[0], c[0] = np.sin(f[0]), np.cos(f[0])
        for k in range(1, self.order + 1):
            acc_s = np.zeros_like(f[0])
            acc_c = np.zeros_like(f[0])
            for j in range(1, k + 1):
                acc_s = acc_s + j * f[j] * c[k - j]
                acc_c = acc_c + j * f[j] * s[k - j]
            s[k] = acc_s / k
            c[k] = -acc_c / k
        return Series(s), Series(c)

    def sin(self):
        return self.sincos()[0]

    def cos(self):
        return self.sincos()[1]

    def compose(self, derivs) -> "Series":
        """``g(self)`` given ``derivs[n] = g^(n)(self.c[0])`` for n <= order."""
        dx = Series(self.c.copy())
        dx.c[0] = 0.0
        out = Series.const(np.asarray(derivs[0], dtype=float) * np.ones(self.c.shape[1:]), self.order)
        term = Series.const(np.ones(self.c.shape[1:]), self.order)
        for n in range(1, self.order + 1):
            term = term * dx
            out = out + term * (np.asarray(derivs[n], dtype=float) / math.factorial(n))
        return out

    def dv(self) -> "Series":
        """Derivative in v, keeping the order (top coefficient becomes 0)."""
        out = np.zeros_like(self.c)
        for k in range(1, self.order + 1):
            out[k - 1] = k * self.c[k]
        return Series(out)

    def truncate(self, order: int) -> "Series":
        return Series(self.c[: order + 1])

    def derivatives(self) -> np.ndarray:
        """``d^k/dv^k`` at ``v = 0`` for every k."""
        fact = np.array([math.factorial(k) for k in range(self.order + 1)], dtype=float)
        return self.c * fact.reshape((-1,) + (1,) * (self.c.ndim - 1))
