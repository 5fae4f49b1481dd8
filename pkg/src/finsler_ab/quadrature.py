"""Adaptive Simpson quadrature."""

from __future__ import annotations

import math
from typing import Callable


class QuadratureError(ArithmeticError):
    def __init__(self, message: str, estimate: float, error: float):
        super().__init__(f"{message} (estimate {estimate!r}, error bound {error:.3g})")
        self.estimate = estimate
        self.error = error


def _finite(f):
    def g(t):
        try:
            v = float(f(t))
        except (ZeroDivisionError, OverflowError, ValueError) as exc:
            raise QuadratureError(f"integrand failed at {t!r}: {exc}", math.nan, math.inf) from None
        if not math.isfinite(v):
            raise QuadratureError(f"integrand not finite at {t!r}", math.nan, math.inf)
        return v

    return g


def adaptive_simpson(f: Callable[[float], float], a: float, b: float, tol: float = 1e-10, max_depth: int = 48):
    """Integrate ``f`` over ``[a, b]``; returns ``(value, error_estimate)``.

    Each accepted panel uses the Richardson-corrected Simpson value, the
    panel tolerance halves on each split.  Raises :class:`QuadratureError`
    when ``max_depth`` is hit before the tolerance is met.
    """
    if a == b:
        return 0.0, 0.0
    f = _finite(f)
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) * (fa + 4 * fm + fb) / 6
    total, err, ok = 0.0, 0.0, True
    # explicit stack instead of recursion
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        lo, hi, flo, fmid, fhi, s, eps, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        left = (mid - lo) * (flo + 4 * flm + fmid) / 6
        right = (hi - mid) * (fmid + 4 * frm + fhi) / 6
        delta = left + right - s
        if abs(delta) <= 15 * eps or depth >= max_depth:
            if abs(delta) > 15 * eps:
                ok = False
            total += left + right + delta / 15
            err += abs(delta) / 15
            continue
        stack.append((mid, hi, fmid, frm, fhi, right, 0.5 * eps, depth + 1))
        stack.append((lo, mid, flo, flm, fmid, left, 0.5 * eps, depth + 1))
    if not ok or not math.isfinite(total):
        raise QuadratureError("adaptive Simpson did not converge", sign * total, err)
    return sign * total, err
