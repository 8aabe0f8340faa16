"""First-order jets: a value together with its gradient at a point.

Downstream code is written against a small scalar protocol (+, -, *, /,
integer and real powers, sqrt, exp, log, sin, cos, abs) so the same routine
can run on floats or on :class:`Jet` scalars held in numpy object arrays.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError


class Jet:
    """Scalar value plus exact first partials."""

    __slots__ = ("val", "der")

    def __init__(self, val, der):
        self.val = float(val)
        self.der = np.asarray(der, dtype=float)

    @classmethod
    def constant(cls, val, n: int) -> "Jet":
        return cls(val, np.zeros(n))

    @classmethod
    def variable(cls, val, k: int, n: int) -> "Jet":
        d = np.zeros(n)
        d[k] = 1.0
        return cls(val, d)

    @property
    def partials(self) -> np.ndarray:
        return self.der

    @property
    def value(self) -> float:
        return self.val

    def __repr__(self) -> str:
        return f"Jet({self.val!r}, {self.der.tolist()!r})"

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        if isinstance(other, Jet):
            return Jet(self.val + other.val, self.der + other.der)
        return Jet(self.val + other, self.der)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        if isinstance(other, Jet):
            return Jet(self.val - other.val, self.der - other.der)
        return Jet(self.val - other, self.der)

    def __rsub__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        return Jet(other - self.val, -self.der)

    def __neg__(self):
        return Jet(-self.val, -self.der)

    def __pos__(self):
        return self

    def __mul__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        if isinstance(other, Jet):
            return Jet(self.val * other.val, self.val * other.der + other.val * self.der)
        return Jet(self.val * other, self.der * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        if isinstance(other, Jet):
            if other.val == 0.0:
                raise DomainError("division by zero")
            q = self.val / other.val
            return Jet(q, (self.der - q * other.der) / other.val)
        if other == 0:
            raise DomainError("division by zero")
        return Jet(self.val / other, self.der / other)

    def __rtruediv__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        if self.val == 0.0:
            raise DomainError("division by zero")
        q = other / self.val
        return Jet(q, -q / self.val * self.der)

    def __pow__(self, e):
        if isinstance(e, Jet):
            raise DomainError("exponent must be a constant")
        return power(self, e)

    def __abs__(self):
        return fabs(self)

    # comparisons act on the value only; used for pivoting and sign tests
    def __lt__(self, other):
        return self.val < value_of(other)

    def __gt__(self, other):
        return self.val > value_of(other)

    def __le__(self, other):
        return self.val <= value_of(other)

    def __ge__(self, other):
        return self.val >= value_of(other)

    def __float__(self):
        return self.val


def value_of(x) -> float:
    return x.val if isinstance(x, Jet) else float(x)


def _chain(u, f, df):
    """Apply a scalar function with derivative df at u.val."""
    if isinstance(u, Jet):
        return Jet(f, df * u.der)
    return f


def sqrt(u):
    v = value_of(u)
    if v < 0.0:
        raise DomainError(f"sqrt of negative value {v!r}")
    s = math.sqrt(v)
    if isinstance(u, Jet):
        if s == 0.0:
            raise DomainError("sqrt is not differentiable at 0")
        return Jet(s, u.der / (2.0 * s))
    return s


def exp(u):
    v = value_of(u)
    try:
        e = math.exp(v)
    except OverflowError as exc:
        raise DomainError(f"exp overflow at {v!r}") from exc
    return _chain(u, e, e)


def log(u):
    v = value_of(u)
    if v <= 0.0:
        raise DomainError(f"log of non-positive value {v!r}")
    return _chain(u, math.log(v), 1.0 / v)


def sin(u):
    v = value_of(u)
    return _chain(u, math.sin(v), math.cos(v))


def cos(u):
    v = value_of(u)
    return _chain(u, math.cos(v), -math.sin(v))


def fabs(u):
    v = value_of(u)
    if isinstance(u, Jet):
        if v == 0.0:
            raise DomainError("abs is not differentiable at 0")
        return Jet(abs(v), math.copysign(1.0, v) * u.der)
    return abs(v)


def power(u, e: float):
    """u**e for a constant exponent e."""
    v = value_of(u)
    e = float(e)
    if e == 0.0:
        return _chain(u, 1.0, 0.0)
    if e == 1.0:
        return u
    integral = e.is_integer()
    if v == 0.0 and e < 0:
        raise DomainError("zero raised to a negative power")
    if v < 0.0 and not integral:
        raise DomainError(f"negative base {v!r} with non-integer exponent {e!r}")
    if v == 0.0 and e < 1.0 and isinstance(u, Jet):
        raise DomainError(f"power {e!r} is not differentiable at 0")
    try:
        if integral and abs(e) <= 64:
            k = int(e)
            pv = float(v ** k)
            if not isinstance(u, Jet):
                return pv
            dv = k * v ** (k - 1)
        else:
            pv = v ** e
            if not isinstance(u, Jet):
                return pv
            dv = e * v ** (e - 1.0)
    except (OverflowError, ZeroDivisionError) as exc:
        raise DomainError(str(exc)) from exc
    return Jet(pv, dv * u.der)


FUNCTIONS = {
    "sin": sin,
    "cos": cos,
    "exp": exp,
    "log": log,
    "sqrt": sqrt,
    "abs": fabs,
}


# object-array helpers ------------------------------------------------------

def lift(val, der) -> np.ndarray:
    """Pack value array (shape S) and derivative array (shape S + (n,)) into Jets."""
    val = np.asarray(val, dtype=float)
    der = np.asarray(der, dtype=float)
    out = np.empty(val.shape, dtype=object)
    for idx in np.ndindex(val.shape):
        out[idx] = Jet(val[idx], der[idx])
    return out


def split(arr, n: int | None = None):
    """Inverse of :func:`lift`; plain numbers get zero derivatives."""
    arr = np.asarray(arr, dtype=object)
    if n is None:
        for x in arr.flat:
            if isinstance(x, Jet):
                n = x.der.shape[0]
                break
        else:
            n = 0
    val = np.empty(arr.shape)
    der = np.zeros(arr.shape + (n,))
    for idx in np.ndindex(arr.shape):
        x = arr[idx]
        if isinstance(x, Jet):
            val[idx] = x.val
            der[idx] = x.der
        else:
            val[idx] = float(x)
    return val, der


def values(arr) -> np.ndarray:
    arr = np.asarray(arr, dtype=object)
    out = np.empty(arr.shape)
    for idx in np.ndindex(arr.shape):
        out[idx] = value_of(arr[idx])
    return out
