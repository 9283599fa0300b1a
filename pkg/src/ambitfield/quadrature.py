"""Adaptive Simpson quadrature for piecewise-smooth integrands."""

from __future__ import annotations

import numpy as np


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""

    def __init__(self, message: str, *, estimate, error: float):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


def _norm(x) -> float:
    return float(np.max(np.abs(x))) if np.ndim(x) else abs(x)


def adaptive_simpson(f, a: float, b: float, tol: float, *, max_depth: int = 48):
    """Integrate ``f`` over ``[a, b]`` to absolute tolerance ``tol``.

    ``f`` may return a float or a 1-d array (integrated componentwise, the
    error is measured in the max norm). Returns ``(value, error_estimate)``.
    The integrand should be smooth on ``[a, b]``; split at known kinks
    before calling.
    """
    if b <= a:
        return 0.0 * f(a), 0.0
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    total = 0.0 * whole
    err_total = 0.0
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        lo, hi, flo, fmid, fhi, est, eps, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        fl = f(0.5 * (lo + mid))
        fr = f(0.5 * (mid + hi))
        left = (mid - lo) / 6.0 * (flo + 4.0 * fl + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4.0 * fr + fhi)
        diff = left + right - est
        err = _norm(diff) / 15.0
        if err <= eps or depth >= max_depth or hi - lo < 1e-15 * max(1.0, abs(lo)):
            total = total + left + right + diff / 15.0
            err_total += err
            continue
        stack.append((lo, mid, flo, fl, fmid, left, 0.5 * eps, depth + 1))
        stack.append((mid, hi, fmid, fr, fhi, right, 0.5 * eps, depth + 1))
    return total, err_total


def integrate_pieces(f, breakpoints, tol: float, *, strict: bool = True):
    """Integrate ``f`` over consecutive ``breakpoints`` with a shared budget.

    The tolerance is split between pieces in proportion to their length.
    With ``strict`` a :class:`QuadratureError` is raised when the summed
    error estimate exceeds ``tol``.
    """
    pts = np.unique(np.asarray(breakpoints, dtype=float))
    if pts.size < 2:
        return 0.0, 0.0
    span = pts[-1] - pts[0]
    total = None
    err = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        val, e = adaptive_simpson(f, float(lo), float(hi), tol * (hi - lo) / span)
        total = val if total is None else total + val
        err += e
    if strict and err > tol:
        raise QuadratureError(
            f"quadrature error estimate {err:.3g} exceeds tolerance {tol:.3g}", estimate=total, error=err
        )
    return total, err
