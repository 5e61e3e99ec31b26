"""Parametric tail-line extrapolation on the Laplace scale.

After both variables are mapped to standard Laplace margins, the tail
relationship is summarized by a line with slope bounded by 1:

    y_hat(x) = Q_Y( F_L( slope * xstar + intercept * xstar**exponent ) )

with xstar the transformed query.  The sub-linear exponent is kept at
zero during estimation (the intercept then absorbs the constant term),
so fitting reduces to an L1 line fit over the transformed tail points.
A both-sided model splits the sample at the median of the predictor,
fits one tail line per side (the lower side through reflection), and
delegates the central region to a user-supplied bulk smoother.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from ._validation import check_paired, check_vector, resolve_tail_count
from .exceptions import InputError, InsufficientDataError
from .forest import RandomForestBaseline, _as_univariate
from .l1fit import l1_line_fit
from .marginal import MarginalTransform, fit_marginal, laplace_quantile


@dataclass(frozen=True)
class ProgressionParams:
    """Tail line on the Laplace scale.

    The slope lives in [-1, 1] and the exponent in [0, 1); a slope at
    the boundary forces the exponent to zero, otherwise the sub-linear
    term would dominate the bound.
    """

    slope: float
    exponent: float
    intercept: float

    def __post_init__(self):
        if not -1.0 <= self.slope <= 1.0:
            raise InputError(f"slope must be in [-1, 1], got {self.slope}")
        if not 0.0 <= self.exponent < 1.0:
            raise InputError(f"exponent must be in [0, 1), got {self.exponent}")
        if abs(self.slope) == 1.0 and self.exponent != 0.0:
            raise InputError("exponent must be 0 when the slope is at the bound")


def fit_tail_line(xstar, ystar, threshold: float) -> ProgressionParams:
    """L1 line through the transformed points above a transformed threshold.

    Minimizes sum |ystar_i - a * xstar_i - b| over the points with
    xstar_i > threshold, subject to a in [-1, 1]; the exponent of the
    returned parameters is always zero.
    """
    xstar, ystar = check_paired(xstar, ystar, "xstar", "ystar")
    mask = xstar > float(threshold)
    m = int(np.count_nonzero(mask))
    if m < 8:
        raise InsufficientDataError(
            f"only {m} transformed points above the threshold, need at least 8"
        )
    slope, intercept = l1_line_fit(
        xstar[mask], ystar[mask], np.ones(m), origin=0.0
    )
    return ProgressionParams(slope=slope, exponent=0.0, intercept=intercept)


def progression_predict(x, transform_x: MarginalTransform,
                        transform_y: MarginalTransform,
                        params: ProgressionParams):
    """Evaluate the tail-line model at x (original scale in, original out)."""
    scalar = np.ndim(x) == 0
    xstar = np.atleast_1d(transform_x.to_laplace(x))
    if params.exponent > 0.0:
        if np.any(xstar <= 0.0):
            raise InputError(
                "a positive exponent requires transformed queries above 0"
            )
        shifted = params.slope * xstar + params.intercept * xstar**params.exponent
    else:
        shifted = params.slope * xstar + params.intercept
    out = transform_y.from_laplace(shifted)
    return float(out[0]) if scalar else out


class BothSidedProgression:
    """Piecewise model: tail lines on both sides, bulk smoother between.

    The predictor axis is split in three regions by the transformed tail
    thresholds of the two conditioned halves.  Predictions above the
    upper boundary use the upper tail line, below the lower boundary the
    reflected lower tail line, and the bulk callable in between.  The
    pieces are fitted separately, so no continuity is enforced at the
    boundaries.
    """

    def __init__(self, split_point: float,
                 transform_x_upper: MarginalTransform,
                 transform_y_upper: MarginalTransform,
                 params_upper: ProgressionParams,
                 transform_x_lower: MarginalTransform,
                 transform_y_lower: MarginalTransform,
                 params_lower: ProgressionParams,
                 bulk_predict):
        self.split_point = split_point
        self.transform_x_upper = transform_x_upper
        self.transform_y_upper = transform_y_upper
        self.params_upper = params_upper
        self.transform_x_lower = transform_x_lower
        self.transform_y_lower = transform_y_lower
        self.params_lower = params_lower
        self.bulk_predict = bulk_predict
        self.upper_boundary = float(transform_x_upper.upper.threshold)
        self.lower_boundary = float(-transform_x_lower.upper.threshold)

    def predict(self, x):
        scalar = np.ndim(x) == 0
        xq = check_vector(np.atleast_1d(np.asarray(x, dtype=np.float64)), "x")
        out = np.empty_like(xq)
        up = xq > self.upper_boundary
        lo = xq < self.lower_boundary
        mid = ~(up | lo)
        if np.any(up):
            out[up] = progression_predict(
                xq[up], self.transform_x_upper, self.transform_y_upper,
                self.params_upper,
            )
        if np.any(lo):
            out[lo] = progression_predict(
                -xq[lo], self.transform_x_lower, self.transform_y_lower,
                self.params_lower,
            )
        if np.any(mid):
            out[mid] = np.asarray(self.bulk_predict(xq[mid]), dtype=np.float64)
        return float(out[0]) if scalar else out


def fit_both_sided(x, y, k=None, bulk_predict=None) -> BothSidedProgression:
    """Fit tail lines on both sides of the median of x.

    Each half keeps its own marginal fits with the same tail count k, so
    the usable k is bounded by a quarter of the half-sample size.  The
    lower half is reflected (x -> -x) and reuses the upper-tail fit.

    ``bulk_predict`` covers the central region; when omitted, the model
    falls back to the overall median of y there.
    """
    x, y = check_paired(x, y)
    k = resolve_tail_count(k, x.size)
    split_point = float(np.median(x))
    up_mask = x > split_point
    lo_mask = ~up_mask

    if bulk_predict is None:
        center = float(np.median(y))
        bulk_predict = lambda q: np.full(np.shape(q), center)

    tx_up, ty_up, params_up = _fit_side(x[up_mask], y[up_mask], k)
    tx_lo, ty_lo, params_lo = _fit_side(-x[lo_mask], y[lo_mask], k)
    return BothSidedProgression(
        split_point=split_point,
        transform_x_upper=tx_up,
        transform_y_upper=ty_up,
        params_upper=params_up,
        transform_x_lower=tx_lo,
        transform_y_lower=ty_lo,
        params_lower=params_lo,
        bulk_predict=bulk_predict,
    )


def _fit_side(x_side: np.ndarray, y_side: np.ndarray, k: int):
    if x_side.size < 4 * k + 1:
        raise InsufficientDataError(
            f"side sample of {x_side.size} points cannot support k={k}; "
            "reduce k below a quarter of the half-sample size"
        )
    tx = fit_marginal(x_side, k)
    ty = fit_marginal(y_side, k)
    xstar = tx.to_laplace(x_side)
    ystar = ty.to_laplace(y_side)
    threshold = laplace_quantile(1.0 - k / x_side.size)
    params = fit_tail_line(xstar, ystar, threshold)
    return tx, ty, params


class ParametricProgressionRegressor(BaseEstimator, RegressorMixin):
    """Both-sided tail-line model with a plain forest for the bulk.

    Parameters
    ----------
    k : int or None
        Tail count per marginal fit; the default n // 10 is resolved on
        the full sample and reused on each conditioned half.
    n_trees, min_leaf, subsample_fraction, max_depth, seed
        Controls for the bulk forest.
    """

    def __init__(self, k=None, n_trees=500, min_leaf=5, subsample_fraction=0.5,
                 max_depth=None, seed=0):
        self.k = k
        self.n_trees = n_trees
        self.min_leaf = min_leaf
        self.subsample_fraction = subsample_fraction
        self.max_depth = max_depth
        self.seed = seed

    def fit(self, X, y):
        x = _as_univariate(X)
        x, y = check_paired(x, y)
        self.k_ = resolve_tail_count(self.k, x.size)
        self.bulk_ = RandomForestBaseline(
            n_trees=self.n_trees,
            min_leaf=self.min_leaf,
            subsample_fraction=self.subsample_fraction,
            max_depth=self.max_depth,
            seed=self.seed,
        ).fit(x, y)
        self.model_ = fit_both_sided(x, y, self.k_, self.bulk_.predict)
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        if not hasattr(self, "model_"):
            raise InputError("estimator is not fitted")
        return self.model_.predict(_as_univariate(X))
