"""Weighted least-absolute-deviation line fits with a bounded slope.

The objective

    J(a, c) = sum_i w_i * |y_i - c - a * (x_i - origin)|,   a in [-1, 1]

is minimized exactly in c for fixed a (a weighted median) and the
profile J*(a) = min_c J(a, c), which is convex and piecewise linear, is
minimized over the slope interval by golden-section search.  Endpoint
slopes are checked explicitly so a binding bound is returned as exactly
-1.0 or 1.0.
"""

from __future__ import annotations

import numpy as np

from ._validation import check_vector
from .exceptions import InputError

_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0
_SLOPE_TOL = 1e-10
_MAX_ITER = 500


def weighted_median(values, weights) -> float:
    """Lower weighted median: smallest v with cumulative weight >= half.

    Weights must be positive; ties in values resolve to the first of the
    tied block, which keeps the result deterministic.
    """
    v = check_vector(values, "values")
    w = check_vector(weights, "weights")
    if w.size != v.size:
        raise InputError("values and weights must have equal length")
    if np.any(w <= 0.0):
        raise InputError("weights must be strictly positive")
    order = np.argsort(v, kind="stable")
    cw = np.cumsum(w[order])
    idx = int(np.searchsorted(cw, 0.5 * cw[-1], side="left"))
    return float(v[order[idx]])


def l1_line_fit(x, y, weights, origin: float = 0.0) -> tuple[float, float]:
    """Minimize sum w |y - c - a (x - origin)| over a in [-1, 1] and c.

    Returns (slope, level).  The level is the fitted value at the origin.
    """
    x = check_vector(x, "x")
    y = check_vector(y, "y")
    w = check_vector(weights, "weights")
    if not (x.size == y.size == w.size):
        raise InputError("x, y and weights must have equal length")
    if np.any(w <= 0.0):
        raise InputError("weights must be strictly positive")

    d = x - float(origin)

    def level_at(a: float) -> float:
        return _median_sorted(y - a * d, w)

    def objective(a: float) -> float:
        r = y - a * d
        return float(np.dot(w, np.abs(r - _median_sorted(r, w))))

    lo, hi = -1.0, 1.0
    c1 = hi - _INVPHI * (hi - lo)
    c2 = lo + _INVPHI * (hi - lo)
    f1, f2 = objective(c1), objective(c2)
    it = 0
    while hi - lo > _SLOPE_TOL and it < _MAX_ITER:
        if f1 <= f2:
            hi, c2, f2 = c2, c1, f1
            c1 = hi - _INVPHI * (hi - lo)
            f1 = objective(c1)
        else:
            lo, c1, f1 = c1, c2, f2
            c2 = lo + _INVPHI * (hi - lo)
            f2 = objective(c2)
        it += 1

    best_a = 0.5 * (lo + hi)
    best_f = objective(best_a)
    # a binding slope constraint must come back as the exact endpoint
    for endpoint in (-1.0, 1.0):
        f_end = objective(endpoint)
        if f_end < best_f:
            best_a, best_f = endpoint, f_end
    return best_a, level_at(best_a)


def _median_sorted(v: np.ndarray, w: np.ndarray) -> float:
    order = np.argsort(v, kind="stable")
    cw = np.cumsum(w[order])
    idx = int(np.searchsorted(cw, 0.5 * cw[-1], side="left"))
    return float(v[order[idx]])
