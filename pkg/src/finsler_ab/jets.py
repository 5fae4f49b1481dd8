"""Truncated Taylor (jet) arithmetic.

A :class:`Jet` carries the raw derivatives ``f(t0), f'(t0), ..., f^(K)(t0)``
of a scalar function along a single parameter ``t``.  Coefficients are *not*
factorial scaled.  Coefficients may themselves be jets, which gives nested
(multi-parameter) derivatives without a separate multivariate engine.

Module-level :func:`exp`, :func:`log`, :func:`sqrt` and :func:`power` accept
plain floats and jets alike, so model formulas can be written once and
evaluated either way.
"""

from __future__ import annotations

import math
from itertools import combinations_with_replacement, permutations
from typing import Callable, Sequence

import numpy as np

MAX_ORDER = 5
SINGULAR_FLOOR = 1e-300

_BINOM = [[math.comb(k, j) for j in range(k + 1)] for k in range(MAX_ORDER + 2)]


class JetError(ArithmeticError):
    pass


class SingularJetError(JetError):
    pass


class JetDomainError(JetError, ValueError):
    pass


def scalar_part(x) -> float:
    """Innermost constant term of a (possibly nested) jet."""
    while isinstance(x, Jet):
        x = x.coeffs[0]
    return float(x)


class Jet:
    """Raw derivatives of a scalar function along one parameter."""

    __slots__ = ("coeffs", "depth")
    __array_priority__ = 1000

    def __init__(self, coeffs: Sequence, depth: int | None = None):
        coeffs = tuple(coeffs)
        if not 1 <= len(coeffs) <= MAX_ORDER + 1:
            raise ValueError(f"jet order must be in [0, {MAX_ORDER}], got {len(coeffs) - 1}")
        if depth is None:
            depth = 1 + max((c.depth for c in coeffs if isinstance(c, Jet)), default=0)
        self.coeffs = coeffs
        self.depth = depth

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @property
    def value(self):
        return self.coeffs[0]

    @classmethod
    def constant(cls, v, order: int) -> Jet:
        zero = v * 0 if isinstance(v, Jet) else 0.0
        return cls((v,) + (zero,) * order)

    @classmethod
    def variable(cls, v, order: int, slope=1.0) -> Jet:
        """Jet of ``t -> v + slope*t``."""
        if order == 0:
            return cls((v,))
        zero = v * 0 if isinstance(v, Jet) else 0.0
        return cls((v, slope) + (zero,) * (order - 1))

    def __repr__(self):
        return f"Jet({list(self.coeffs)!r})"

    def __len__(self):
        return len(self.coeffs)

    def __getitem__(self, k):
        return self.coeffs[k]

    # -- coercion --------------------------------------------------------

    def _coerce(self, other) -> Jet | None:
        if isinstance(other, Jet):
            if other.depth == self.depth:
                if other.order != self.order:
                    raise ValueError(f"jet order mismatch: {self.order} vs {other.order}")
                return other
            if other.depth > self.depth:
                return None
            # shallower jet acts as a constant in our coefficient ring
            return Jet.constant(other, self.order)
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Jet.constant(float(other) if self.depth == 1 else other, self.order)
        return None

    # -- arithmetic -------------------------------------------------------

    def __neg__(self):
        return Jet(tuple(-c for c in self.coeffs), self.depth)

    def __pos__(self):
        return self

    def __add__(self, other):
        if not isinstance(other, Jet):
            if isinstance(other, (int, float, np.floating, np.integer)):
                return Jet((self.coeffs[0] + other,) + self.coeffs[1:], self.depth)
            return NotImplemented
        o = self._coerce(other)
        if o is None:
            return other.__add__(self)
        return Jet(tuple(a + b for a, b in zip(self.coeffs, o.coeffs)), self.depth)

    __radd__ = __add__

    def __sub__(self, other):
        if not isinstance(other, Jet):
            if isinstance(other, (int, float, np.floating, np.integer)):
                return Jet((self.coeffs[0] - other,) + self.coeffs[1:], self.depth)
            return NotImplemented
        o = self._coerce(other)
        if o is None:
            return (-other).__add__(self)
        return Jet(tuple(a - b for a, b in zip(self.coeffs, o.coeffs)), self.depth)

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            if isinstance(other, (int, float, np.floating, np.integer)):
                return Jet(tuple(c * other for c in self.coeffs), self.depth)
            return NotImplemented
        o = self._coerce(other)
        if o is None:
            return other.__mul__(self)
        a, b = self.coeffs, o.coeffs
        out = []
        for k in range(len(a)):
            row = _BINOM[k]
            acc = a[0] * b[k]
            for j in range(1, k + 1):
                acc = acc + row[j] * a[j] * b[k - j]
            out.append(acc)
        return Jet(out, self.depth)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            if isinstance(other, (int, float, np.floating, np.integer)):
                if abs(other) < SINGULAR_FLOOR:
                    raise SingularJetError(f"division by {other!r}")
                return Jet(tuple(c / other for c in self.coeffs), self.depth)
            return NotImplemented
        o = self._coerce(other)
        if o is None:
            return other.__rtruediv__(self)
        return _divide(self.coeffs, o.coeffs, self.depth)

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return _divide(o.coeffs, self.coeffs, self.depth)

    def __pow__(self, r):
        if isinstance(r, int) and 0 <= r <= 8:
            out = self * 0 + 1.0
            for _ in range(r):
                out = out * self
            return out
        if isinstance(r, int) and -8 <= r < 0:
            return 1.0 / self ** (-r)
        if isinstance(r, (float, int)):
            return self.power(float(r))
        return exp(log(self) * r)

    def __rpow__(self, base):
        return exp(self * math.log(base))

    # -- elementary functions ---------------------------------------------

    def exp(self) -> Jet:
        a = self.coeffs
        h = [exp(a[0])]
        for k in range(1, len(a)):
            row = _BINOM[k - 1]
            acc = a[1] * h[k - 1]
            for j in range(1, k):
                acc = acc + row[j] * a[j + 1] * h[k - 1 - j]
            h.append(acc)
        return Jet(h, self.depth)

    def log(self) -> Jet:
        a = self.coeffs
        v = scalar_part(self)
        if not v > 0:
            raise JetDomainError(f"log of non-positive value {v!r}")
        h = [log(a[0])]
        for k in range(1, len(a)):
            row = _BINOM[k - 1]
            acc = a[k]
            for j in range(1, k):
                acc = acc - row[j] * a[j] * h[k - j]
            h.append(acc / a[0])
        return Jet(h, self.depth)

    def power(self, r: float) -> Jet:
        a = self.coeffs
        v = scalar_part(self)
        if abs(v) < SINGULAR_FLOOR:
            raise SingularJetError(f"power {r} of vanishing value {v!r}")
        if v < 0 and not float(r).is_integer():
            raise JetDomainError(f"non-integer power {r} of negative value {v!r}")
        h = [power(a[0], r)]
        for k in range(1, len(a)):
            row = _BINOM[k - 1]
            acc = r * a[1] * h[k - 1]
            for j in range(1, k):
                acc = acc + row[j] * (r * a[j + 1] * h[k - 1 - j] - a[j] * h[k - j])
            h.append(acc / a[0])
        return Jet(h, self.depth)

    def sqrt(self) -> Jet:
        v = scalar_part(self)
        if not v > 0:
            raise JetDomainError(f"sqrt of non-positive value {v!r}")
        return self.power(0.5)

    def compose(self, derivs: Sequence[float]) -> Jet:
        """Apply ``g`` given its raw derivatives at the scalar part of ``self``.

        Exact as long as ``derivs`` reaches the nilpotency index of the
        non-constant part.
        """
        base = scalar_part(self)
        dev = self - base
        out = dev * 0 + derivs[0]
        term = dev * 0 + 1.0
        for m in range(1, len(derivs)):
            term = term * dev
            out = out + term * (derivs[m] / math.factorial(m))
        return out

    def derivatives(self) -> list[float]:
        return [scalar_part(c) for c in self.coeffs]


def _divide(a, b, depth) -> Jet:
    if abs(scalar_part(b[0])) < SINGULAR_FLOOR:
        raise SingularJetError(f"division by jet with value {scalar_part(b[0])!r}")
    h = []
    for k in range(len(a)):
        row = _BINOM[k]
        acc = a[k]
        for j in range(1, k + 1):
            acc = acc - row[j] * b[j] * h[k - j]
        h.append(acc / b[0])
    return Jet(h, depth)


def exp(x):
    if isinstance(x, Jet):
        return x.exp()
    return math.exp(x)


def log(x):
    if isinstance(x, Jet):
        return x.log()
    if not x > 0:
        raise JetDomainError(f"log of non-positive value {x!r}")
    return math.log(x)


def sqrt(x):
    if isinstance(x, Jet):
        return x.sqrt()
    if x < 0:
        raise JetDomainError(f"sqrt of negative value {x!r}")
    return math.sqrt(x)


def power(x, r):
    if isinstance(x, Jet):
        return x.power(r)
    return x**r


def jet_arith(a: Jet, b: Jet, op: str) -> Jet:
    ops = {"add": Jet.__add__, "sub": Jet.__sub__, "mul": Jet.__mul__, "div": Jet.__truediv__}
    if a.order != b.order:
        raise ValueError(f"jet order mismatch: {a.order} vs {b.order}")
    return ops[op](a, b)


def jet_elementary(a: Jet, fn: str, r: float | None = None) -> Jet:
    if fn == "pow":
        return a.power(r)
    return {"exp": a.exp, "ln": a.log, "log": a.log, "sqrt": a.sqrt}[fn]()


# -- directional and mixed derivatives -------------------------------------


def directional_derivatives(
    f: Callable[[list], object], point: Sequence[float], direction: Sequence[float], order: int
) -> list[float]:
    """``d^k/dt^k f(point + t*direction)`` at ``t = 0`` for ``k = 0..order``."""
    if order > MAX_ORDER:
        raise ValueError(f"order {order} exceeds {MAX_ORDER}")
    args = [Jet.variable(float(p), order, float(d)) for p, d in zip(point, direction)]
    out = f(args)
    if not isinstance(out, Jet):
        return [float(out)] + [0.0] * order
    return out.derivatives()


def directional_jets(f, point, direction, order):
    """Like :func:`directional_derivatives` but returns ``f``'s raw output (may be a sequence of jets)."""
    args = [Jet.variable(float(p), order, float(d)) for p, d in zip(point, direction)]
    return f(args)


def _polarize(nth_derivative: Callable[[np.ndarray], object], dirs: Sequence[np.ndarray]):
    # T(v1..vk) = 1/(k! 2^(k-1)) sum_{eps2..epsk} eps2..epsk p(v1 + sum eps_i v_i)
    k = len(dirs)
    if k == 1:
        return nth_derivative(dirs[0])
    total = None
    for signs in np.ndindex(*(2,) * (k - 1)):
        eps = [1 - 2 * b for b in signs]
        v = dirs[0] + sum(e * d for e, d in zip(eps, dirs[1:]))
        p = nth_derivative(v)
        w = float(np.prod(eps))
        total = p * w if total is None else total + p * w
    return total / (math.factorial(k) * 2 ** (k - 1))


def mixed_partial(f: Callable[[list], object], point: Sequence[float], dirs: Sequence[Sequence[float]]) -> float:
    """Mixed derivative ``D^k f(point)[d1, ..., dk]`` for ``k <= 4`` by polarization."""
    k = len(dirs)
    if not 1 <= k <= 4:
        raise ValueError("mixed_partial supports 1 to 4 directions")
    dirs = [np.asarray(d, dtype=float) for d in dirs]
    if all(np.array_equal(d, dirs[0]) for d in dirs[1:]):
        return directional_derivatives(f, point, dirs[0], k)[k]
    return float(_polarize(lambda v: directional_derivatives(f, point, v, k)[k], dirs))


def symmetric_derivative_tensor(
    f: Callable[[list], Sequence], point: Sequence[float], order: int, n_out: int
) -> np.ndarray:
    """All ``order``-th partials of a vector-valued ``f`` over the inputs.

    Returns an array of shape ``(n_out,) + (m,)*order`` (``m`` = input
    dimension) filled by symmetry from the independent index tuples.
    """
    m = len(point)
    eye = np.eye(m)
    out = np.zeros((n_out,) + (m,) * order)

    def nth(v):
        res = directional_jets(f, point, v, order)
        return np.array([r[order] if isinstance(r, Jet) else 0.0 for r in res])

    for idx in combinations_with_replacement(range(m), order):
        dirs = [eye[i] for i in idx]
        if len(set(idx)) == 1:
            val = nth(dirs[0])
        else:
            val = _polarize(nth, dirs)
        for perm in set(permutations(idx)):
            out[(slice(None),) + perm] = val
    return out

