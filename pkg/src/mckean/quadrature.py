"""Numerical primitives: cumulative Simpson rules, bracketed root finding,
golden-section refinement.

The rate construction integrates a chain of functions where each integrand
is built pointwise from the previous cumulative integral.  Everything here
works on explicit point sets so that chain can be evaluated with one level
of dyadic refinement per stage and no hidden interpolation.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

_INV_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def refine(points: np.ndarray) -> np.ndarray:
    """Insert the midpoint of every consecutive pair of points."""
    points = np.asarray(points, dtype=float)
    out = np.empty(2 * len(points) - 1)
    out[0::2] = points
    out[1::2] = 0.5 * (points[:-1] + points[1:])
    return out


def cumulative_simpson(node_vals: np.ndarray, mid_vals: np.ndarray,
                       points: np.ndarray) -> np.ndarray:
    """Cumulative integral over ``points`` from per-cell Simpson rules.

    ``node_vals`` holds integrand values at ``points`` and ``mid_vals`` at
    cell midpoints.  Returns F with F[0] = 0 and F[k] = integral up to
    points[k].  Exact for cubics on each cell.
    """
    widths = np.diff(points)
    segments = widths / 6.0 * (node_vals[:-1] + 4.0 * mid_vals + node_vals[1:])
    out = np.empty(len(points))
    out[0] = 0.0
    np.cumsum(segments, out=out[1:])
    return out


def integrate_adaptive(fn: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                       tol: float, max_doublings: int = 20) -> float:
    """Adaptive composite Simpson on [a, b] with absolute tolerance ``tol``.

    Doubles the panel count until two successive composite rules agree to
    tol (Richardson estimate), then returns the finer value.
    """
    if b < a:
        raise ValueError("integration bounds out of order")
    if b == a:
        return 0.0
    n = 8
    prev = _composite_simpson(fn, a, b, n)
    for _ in range(max_doublings):
        n *= 2
        cur = _composite_simpson(fn, a, b, n)
        if not np.isfinite(cur):
            raise ArithmeticError("non-finite value in adaptive quadrature")
        if abs(cur - prev) <= 15.0 * tol:
            return cur
        prev = cur
    raise ArithmeticError(f"quadrature failed to reach tol={tol} on [{a}, {b}]")


def _composite_simpson(fn, a: float, b: float, n: int) -> float:
    x = np.linspace(a, b, n + 1)
    y = fn(x)
    h = (b - a) / n
    return h / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum())


def bisect_root(fn: Callable[[float], float], lo: float, hi: float,
                tol: float = 1e-9, max_iter: int = 200) -> float:
    """Root of a continuous scalar function on a sign-changing bracket."""
    flo, fhi = fn(lo), fn(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise ValueError(f"no sign change on bracket [{lo}, {hi}]")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fmid = fn(mid)
        if fmid == 0.0 or (hi - lo) <= tol:
            return mid
        if np.sign(fmid) == np.sign(flo):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def golden_max(fn: Callable[[float], float], lo: float, hi: float,
               tol: float = 1e-10, max_iter: int = 200) -> tuple[float, float]:
    """Golden-section maximisation of fn on [lo, hi]; returns (argmax, max).

    Exact for unimodal fn on the bracket; used to polish a grid argmax, so
    the bracket is already a single grid cell wide.
    """
    a, b = float(lo), float(hi)
    x1 = b - _INV_GOLDEN * (b - a)
    x2 = a + _INV_GOLDEN * (b - a)
    f1, f2 = fn(x1), fn(x2)
    for _ in range(max_iter):
        if (b - a) <= tol:
            break
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INV_GOLDEN * (b - a)
            f2 = fn(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - _INV_GOLDEN * (b - a)
            f1 = fn(x1)
    xm = 0.5 * (a + b)
    fm = fn(xm)
    candidates = [(fm, xm), (f1, x1), (f2, x2)]
    best = max(candidates)
    return best[1], best[0]


def golden_min(fn: Callable[[float], float], lo: float, hi: float,
               tol: float = 1e-10) -> tuple[float, float]:
    """Golden-section minimisation; returns (argmin, min)."""
    x, neg = golden_max(lambda s: -fn(s), lo, hi, tol=tol)
    return x, -neg
