"""Semi-parametric marginal model and the Laplace-scale transform.

The distribution of a sample is modelled with its empirical CDF between
the k-th smallest and k-th largest observations and generalized Pareto
tails beyond them.  Observations are then mapped to a common standard
Laplace scale, where tail relationships between variables become linear
and can be fitted with robust line estimates.

Writing l and u for the two thresholds (the k-th and (n-k)-th order
statistics) and tau0 = 1 - k/n, the fitted CDF is

    F(x) = w_l * (1 + g_l (l - x) / s_l)^(-1/g_l)            x <= l
    F(x) = (1/n) * #{i : Y_i <= x}                           l < x <= u
    F(x) = 1 - w_u * (1 + g_u (x - u) / s_u)^(-1/g_u)        x > u

with branch weights w_l = #{Y_i <= l}/n and w_u = #{Y_i > u}/n.  Both
equal k/n when the sample is free of ties at the thresholds; with ties
the tied points are excluded from the exceedances and absorbed into the
weights, which keeps the three branches continuous.  Tail evaluations
are carried out on the log scale so that deep extrapolations of the
quantile map stay accurate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import (
    check_matrix,
    check_probability,
    check_vector,
    resolve_tail_count,
)
from .exceptions import (
    DegenerateDataError,
    InputError,
    InsufficientDataError,
    InternalError,
)
from .gpd import GpdParams, _log_survival, fit_gpd

_LOG2 = math.log(2.0)


def laplace_cdf(x):
    """Standard Laplace distribution function."""
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(over="ignore"):
        out = np.where(x < 0.0, 0.5 * np.exp(x), 1.0 - 0.5 * np.exp(-x))
    return float(out) if out.ndim == 0 else out


def laplace_quantile(p):
    """Standard Laplace quantile function on (0, 1)."""
    p = check_probability(p, "p")
    out = np.where(p < 0.5, np.log(2.0 * p), -np.log(2.0 * (1.0 - p)))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class TailFit:
    """One fitted tail of a marginal model.

    ``k`` is the number of order statistics defining the threshold;
    ``n_exceedances`` is the number of strictly positive exceedances the
    GPD was actually fitted to, which is k - 1 on the lower side because
    the threshold itself carries no excess, and smaller on either side
    when the sample is tied at the threshold.  ``weight`` is the branch
    probability mass: #{x > u}/n above, #{x <= l}/n below, both k/n in
    the untied case.
    """

    side: str
    threshold: float
    k: int
    n: int
    n_exceedances: int
    weight: float
    params: GpdParams

    @property
    def tau0(self) -> float:
        return 1.0 - self.k / self.n


class MarginalTransform:
    """Fitted marginal distribution with empirical bulk and GPD tails."""

    def __init__(self, sorted_sample: np.ndarray, lower: TailFit, upper: TailFit):
        self.sorted_sample = sorted_sample
        self.lower = lower
        self.upper = upper
        self.n = int(sorted_sample.size)
        self.k = int(upper.k)

    # --- probability scale -------------------------------------------------

    def cdf(self, x):
        x_arr, scalar = _as_array(x, "x")
        n = self.n
        lo_t, up_t = self.lower.threshold, self.upper.threshold
        out = np.empty_like(x_arr)

        up = x_arr > up_t
        lo = x_arr <= lo_t
        mid = ~(up | lo)
        if np.any(up):
            log_sf = _log_survival(x_arr[up] - up_t, self.upper.params)
            out[up] = 1.0 - self.upper.weight * np.exp(log_sf)
        if np.any(lo):
            log_sf = _log_survival(lo_t - x_arr[lo], self.lower.params)
            out[lo] = self.lower.weight * np.exp(log_sf)
        if np.any(mid):
            ranks = np.searchsorted(self.sorted_sample, x_arr[mid], side="right")
            out[mid] = ranks / n
        return float(out[0]) if scalar else out

    def quantile(self, p):
        p_arr = check_probability(p, "p")
        scalar = np.ndim(p) == 0
        p_arr = np.atleast_1d(np.asarray(p_arr, dtype=np.float64))
        n = self.n
        w_up, w_lo = self.upper.weight, self.lower.weight
        out = np.empty_like(p_arr)

        up = p_arr > 1.0 - w_up
        lo = p_arr < w_lo
        mid = ~(up | lo)
        if np.any(up):
            log_sf = np.log1p(-p_arr[up]) - math.log(w_up)
            out[up] = self.upper.threshold + _gpd_quantile_from_log_sf(
                log_sf, self.upper.params
            )
        if np.any(lo):
            log_sf = np.log(p_arr[lo]) - math.log(w_lo)
            out[lo] = self.lower.threshold - _gpd_quantile_from_log_sf(
                log_sf, self.lower.params
            )
        if np.any(mid):
            # right-continuous generalized inverse of the empirical CDF;
            # the fuzz keeps n*p at integer values from rounding upward
            idx = np.ceil(n * p_arr[mid] - 1e-9).astype(np.int64)
            idx = np.clip(idx, 1, n)
            out[mid] = self.sorted_sample[idx - 1]
        return float(out[0]) if scalar else out

    # --- Laplace scale -----------------------------------------------------

    def to_laplace(self, x):
        """Map data values to the standard Laplace scale via Q_L(F(x))."""
        x_arr, scalar = _as_array(x, "x")
        n = self.n
        out = np.empty_like(x_arr)

        up = x_arr > self.upper.threshold
        lo = x_arr <= self.lower.threshold
        mid = ~(up | lo)
        if np.any(up):
            # survival = w_u * gpd_sf, so Q_L = -log(2 * survival)
            log_sf = _log_survival(x_arr[up] - self.upper.threshold, self.upper.params)
            out[up] = -(_LOG2 + math.log(self.upper.weight) + log_sf)
        if np.any(lo):
            log_sf = _log_survival(self.lower.threshold - x_arr[lo], self.lower.params)
            out[lo] = _LOG2 + math.log(self.lower.weight) + log_sf
        if np.any(mid):
            ranks = np.searchsorted(self.sorted_sample, x_arr[mid], side="right")
            out[mid] = laplace_quantile(ranks / n)
        return float(out[0]) if scalar else out

    def from_laplace(self, z):
        """Inverse of :meth:`to_laplace`: quantile(F_L(z)), tail-stable."""
        z_arr, scalar = _as_array(z, "z")
        log_w_up = math.log(self.upper.weight)
        log_w_lo = math.log(self.lower.weight)
        out = np.empty_like(z_arr)

        # log of the survival (z >= 0) or the CDF (z < 0) without forming
        # 1 - p, so deep tail values invert exactly
        neg = z_arr < 0.0
        pos = ~neg

        if np.any(pos):
            zp = z_arr[pos]
            log_s = -zp - _LOG2
            res = np.empty_like(zp)
            up = log_s < log_w_up
            if np.any(up):
                res[up] = self.upper.threshold + _gpd_quantile_from_log_sf(
                    log_s[up] - log_w_up, self.upper.params
                )
            if np.any(~up):
                p = -np.expm1(log_s[~up])
                res[~up] = self._bulk_quantile(p)
            out[pos] = res
        if np.any(neg):
            zn = z_arr[neg]
            log_p = zn - _LOG2
            res = np.empty_like(zn)
            lo = log_p < log_w_lo
            if np.any(lo):
                res[lo] = self.lower.threshold - _gpd_quantile_from_log_sf(
                    log_p[lo] - log_w_lo, self.lower.params
                )
            if np.any(~lo):
                res[~lo] = self._bulk_quantile(np.exp(log_p[~lo]))
            out[neg] = res
        return float(out[0]) if scalar else out

    def _bulk_quantile(self, p: np.ndarray) -> np.ndarray:
        idx = np.ceil(self.n * p - 1e-9).astype(np.int64)
        idx = np.clip(idx, 1, self.n)
        return self.sorted_sample[idx - 1]


def _gpd_quantile_from_log_sf(log_sf, params: GpdParams):
    """GPD quantile expressed through the log survival level."""
    if params.gamma < 1e-8:
        return -params.sigma * log_sf
    return params.sigma / params.gamma * np.expm1(-params.gamma * log_sf)


def _as_array(x, name: str):
    scalar = np.ndim(x) == 0
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains NaN or infinite values")
    return arr, scalar


def fit_marginal(sample, k=None) -> MarginalTransform:
    """Fit the semi-parametric marginal model to a sample.

    Parameters
    ----------
    sample : array-like
        One-dimensional sample, all values finite.
    k : int, optional
        Number of order statistics per tail.  Defaults to n // 10 and
        must satisfy 8 <= k < n / 4.

    Returns
    -------
    MarginalTransform

    Raises
    ------
    InputError
        On malformed input or an out-of-range k.
    DegenerateDataError
        If the two thresholds coincide, i.e. the sample is too discrete
        for the bulk/tail split.
    InsufficientDataError
        If a tail has fewer than 8 strictly positive exceedances after
        threshold ties are excluded.
    """
    y = check_vector(sample, "sample", min_len=2)
    n = y.size
    k = resolve_tail_count(k, n)
    xs = np.sort(y)

    lower_t = xs[k - 1]
    upper_t = xs[n - k - 1]
    if lower_t >= upper_t:
        raise DegenerateDataError("tail thresholds coincide; sample too discrete")

    # ties at a threshold are excluded from the exceedances and absorbed
    # into the branch weight, keeping the fitted CDF continuous
    n_above = n - int(np.searchsorted(xs, upper_t, side="right"))
    n_at_or_below = int(np.searchsorted(xs, lower_t, side="right"))
    n_below = int(np.searchsorted(xs, lower_t, side="left"))
    upper_exc = xs[n - n_above :] - upper_t
    lower_exc = lower_t - xs[:n_below]
    for side, exc in (("upper", upper_exc), ("lower", lower_exc)):
        if exc.size < 8:
            raise InsufficientDataError(
                f"{side} tail has {exc.size} strictly positive exceedances, "
                "need at least 8; increase k"
            )

    upper = TailFit(
        side="upper",
        threshold=float(upper_t),
        k=k,
        n=n,
        n_exceedances=int(upper_exc.size),
        weight=n_above / n,
        params=fit_gpd(upper_exc),
    )
    lower = TailFit(
        side="lower",
        threshold=float(lower_t),
        k=k,
        n=n,
        n_exceedances=int(lower_exc.size),
        weight=n_at_or_below / n,
        params=fit_gpd(lower_exc),
    )
    tx = MarginalTransform(sorted_sample=xs, lower=lower, upper=upper)

    # continuity across the three branches must hold by construction
    if abs(tx.cdf(float(upper_t)) - (1.0 - upper.weight)) > 1e-12:
        raise InternalError("CDF discontinuous at the upper threshold")
    if abs(tx.cdf(float(lower_t)) - lower.weight) > 1e-12:
        raise InternalError("CDF discontinuous at the lower threshold")
    return tx


class LaplaceMarginalTransformer(BaseEstimator, TransformerMixin):
    """Column-wise marginal fit plus Laplace-scale transform.

    Each column of X gets its own :class:`MarginalTransform`; transform
    maps columns to the Laplace scale and inverse_transform maps back.
    """

    def __init__(self, k=None):
        self.k = k

    def fit(self, X, y=None):
        X = check_matrix(X)
        self.n_features_in_ = X.shape[1]
        self.transforms_ = [fit_marginal(X[:, j], self.k) for j in range(X.shape[1])]
        return self

    def transform(self, X):
        X = self._check_fitted_shape(X)
        return np.column_stack(
            [self.transforms_[j].to_laplace(X[:, j]) for j in range(X.shape[1])]
        )

    def inverse_transform(self, Z):
        Z = self._check_fitted_shape(Z)
        return np.column_stack(
            [self.transforms_[j].from_laplace(Z[:, j]) for j in range(Z.shape[1])]
        )

    def _check_fitted_shape(self, X):
        if not hasattr(self, "transforms_"):
            raise InputError("transformer is not fitted")
        X = check_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise InputError(
                f"expected {self.n_features_in_} columns, got {X.shape[1]}"
            )
        return X
