"""Forward-mode dual numbers over numpy arrays.

A :class:`Dual` holds a value and a short tuple of partial derivatives (one
per seed direction, at most two in practice).  Components may themselves be
duals, which gives exact second derivatives by nesting; components may also
be plain floats so that constant seeds broadcast for free.
"""

import numpy as np

from .errors import DomainError


def real(x):
    """Strip every dual layer and return the underlying value."""
    while isinstance(x, Dual):
        x = x.val
    return x


def _is_zero(g):
    return not isinstance(g, (Dual, np.ndarray)) and g == 0


def _scale(f, g):
    if _is_zero(g):
        return 0.0
    return f * g


def _add(a, b):
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    return a + b


class Dual:
    __slots__ = ("val", "grad")

    def __init__(self, val, grad):
        self.val = val
        self.grad = tuple(grad)

    @classmethod
    def const(cls, val, n):
        return cls(val, (0.0,) * n)

    def _lift(self, other):
        if isinstance(other, Dual):
            return other
        return Dual(other, (0.0,) * len(self.grad))

    def __add__(self, other):
        o = self._lift(other)
        return Dual(self.val + o.val, tuple(_add(a, b) for a, b in zip(self.grad, o.grad)))

    __radd__ = __add__

    def __neg__(self):
        return Dual(-self.val, tuple(0.0 if _is_zero(g) else -g for g in self.grad))

    def __pos__(self):
        return self

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, Dual):
            return Dual(self.val * other, tuple(_scale(other, g) for g in self.grad))
        grad = tuple(_add(_scale(self.val, b), _scale(other.val, a)) for a, b in zip(self.grad, other.grad))
        return Dual(self.val * other.val, grad)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._lift(other)
        check_nonzero(o.val, "division by zero")
        q = self.val / o.val
        inv = 1.0 / o.val
        grad = tuple(_add(_scale(inv, a), _scale(-q * inv, b)) for a, b in zip(self.grad, o.grad))
        return Dual(q, grad)

    def __rtruediv__(self, other):
        return self._lift(other) / self

    def __pow__(self, n):
        if not isinstance(n, (int, np.integer)):
            raise TypeError("dual numbers support integer exponents only")
        check_power(self.val, n)
        if n == 0:
            return Dual(_ones_like(self.val), (0.0,) * len(self.grad))
        fprime = n * ipow(self.val, n - 1)
        return Dual(ipow(self.val, n), tuple(_scale(fprime, g) for g in self.grad))

    def _chain(self, value, deriv):
        return Dual(value, tuple(_scale(deriv, g) for g in self.grad))

    def sin(self):
        return self._chain(sin(self.val), cos(self.val))

    def cos(self):
        return self._chain(cos(self.val), -sin(self.val))

    def exp(self):
        e = exp(self.val)
        return self._chain(e, e)

    def sqrt(self):
        r = real(self.val)
        if np.any(np.asarray(r) <= 0):
            raise DomainError("sqrt is not differentiable at or below 0")
        s = sqrt(self.val)
        return self._chain(s, 0.5 / s)

    def abs(self):
        return self._chain(absolute(self.val), np.sign(real(self.val)))

    def __repr__(self):
        return f"Dual({self.val!r}, {self.grad!r})"


def _ones_like(v):
    if isinstance(v, Dual):
        return Dual(_ones_like(v.val), (0.0,) * len(v.grad))
    return np.ones_like(v, dtype=float) if isinstance(v, np.ndarray) else 1.0


def check_nonzero(v, msg):
    if np.any(np.asarray(real(v)) == 0):
        raise DomainError(msg)


def check_power(v, n):
    r = np.asarray(real(v))
    if n <= 0 and np.any(r == 0):
        raise DomainError("0^0 is undefined" if n == 0 else "division by zero in negative power")


def ipow(x, n):
    if isinstance(x, Dual):
        return x ** n
    check_power(x, n)
    if n < 0:
        return 1.0 / np.power(np.asarray(x, dtype=float), -n)
    return np.power(x, n) if isinstance(x, np.ndarray) else float(x) ** n


def sin(x):
    return x.sin() if isinstance(x, Dual) else np.sin(x)


def cos(x):
    return x.cos() if isinstance(x, Dual) else np.cos(x)


def exp(x):
    return x.exp() if isinstance(x, Dual) else np.exp(x)


def sqrt(x):
    if isinstance(x, Dual):
        return x.sqrt()
    if np.any(np.asarray(x) < 0):
        raise DomainError("sqrt of a negative number")
    return np.sqrt(x)


def absolute(x):
    return x.abs() if isinstance(x, Dual) else np.abs(x)


def where(cond, a, b):
    """Elementwise select that understands nested duals."""
    if isinstance(a, Dual) or isinstance(b, Dual):
        n = len(a.grad) if isinstance(a, Dual) else len(b.grad)
        a = a if isinstance(a, Dual) else Dual.const(a, n)
        b = b if isinstance(b, Dual) else Dual.const(b, n)
        return Dual(where(cond, a.val, b.val), tuple(where(cond, x, y) for x, y in zip(a.grad, b.grad)))
    return np.where(cond, a, b)


def seed(values, nested=False):
    """Bind independent variables as duals.

    ``values`` is a list of arrays (one per parameter).  With ``nested`` the
    result carries exact second derivatives: the outer layer differentiates
    once, and every outer component is itself a dual in the same directions.
    """
    k = len(values)
    out = []
    for i, v in enumerate(values):
        unit = tuple(1.0 if j == i else 0.0 for j in range(k))
        if nested:
            out.append(Dual(Dual(v, unit), unit))
        else:
            out.append(Dual(v, unit))
    return out
