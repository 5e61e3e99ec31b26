"""Regression forest for one predictor and the localized median smoother.

Trees are grown on the sorted predictor with exact variance-reduction
splits, so every node is a contiguous range of the sorted subsample and
a leaf is just an index slice.  The forest induces localizing weights

    w_i(x0) = (1/B) * sum_b  1{i in leaf_b(x0)} / |leaf_b(x0)|

which are averaged over trees and sum to one.  Queries beyond the
training range land in the outermost leaf of every tree, hence the
weights are constant there; local line fits therefore continue linearly
outside the range, and this module makes that exact by solving at the
clipped query and extending the fitted line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from ._validation import check_paired, check_vector, resolve_tail_count
from .exceptions import DegenerateDataError, InputError, InsufficientDataError
from .l1fit import l1_line_fit, weighted_median
from .marginal import fit_marginal

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0
# interval width 2 * INVPHI**52 < 1e-10, the slope tolerance
_GOLDEN_STEPS = 52
_CHUNK = 512


@dataclass(frozen=True)
class ForestConfig:
    """Forest hyperparameters; subsampling is without replacement."""

    n_trees: int = 500
    min_leaf: int = 5
    subsample_fraction: float = 0.5
    max_depth: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise InputError(f"n_trees must be positive, got {self.n_trees}")
        if self.min_leaf < 1:
            raise InputError(f"min_leaf must be positive, got {self.min_leaf}")
        if not 0.0 < self.subsample_fraction <= 1.0:
            raise InputError(
                f"subsample_fraction must be in (0, 1], got {self.subsample_fraction}"
            )
        if self.max_depth is not None and self.max_depth < 1:
            raise InputError(f"max_depth must be positive, got {self.max_depth}")


@dataclass
class _Tree:
    indices: np.ndarray  # training-row ids of the subsample, sorted by x
    split: np.ndarray  # split value per node, NaN at leaves
    left: np.ndarray  # child ids, -1 at leaves
    right: np.ndarray
    lo: np.ndarray  # node range [lo, hi) into `indices`
    hi: np.ndarray


@dataclass
class LocalLinearFit:
    """Local L1 line at a query point: level is the value at the query."""

    slope: float
    level: float


def _grow_tree(xs: np.ndarray, ys: np.ndarray, indices: np.ndarray,
               min_leaf: int, max_depth) -> _Tree:
    m = xs.size
    cum1 = np.concatenate(([0.0], np.cumsum(ys)))
    cum2 = np.concatenate(([0.0], np.cumsum(ys * ys)))
    split, left, right, lo_l, hi_l = [], [], [], [], []
    stack = [(0, m, 0, -1, False)]
    while stack:
        lo, hi, depth, parent, is_right = stack.pop()
        node = len(split)
        split.append(np.nan)
        left.append(-1)
        right.append(-1)
        lo_l.append(lo)
        hi_l.append(hi)
        if parent >= 0:
            if is_right:
                right[parent] = node
            else:
                left[parent] = node

        size = hi - lo
        if size < 2 * min_leaf or (max_depth is not None and depth >= max_depth):
            continue
        if xs[hi - 1] <= xs[lo]:
            continue  # no distinct split point available
        total2 = cum2[hi] - cum2[lo]
        node_sse = total2 - (cum1[hi] - cum1[lo]) ** 2 / size
        if node_sse <= 1e-12 * max(1.0, total2):
            continue  # node is pure in y

        b = np.arange(lo + min_leaf, hi - min_leaf + 1)
        valid = xs[b - 1] < xs[b]
        if not valid.any():
            continue
        n_left = b - lo
        n_right = hi - b
        s_left = cum1[b] - cum1[lo]
        s_right = cum1[hi] - cum1[b]
        score = (cum2[b] - cum2[lo] - s_left * s_left / n_left) + (
            cum2[hi] - cum2[b] - s_right * s_right / n_right
        )
        score = np.where(valid, score, np.inf)
        # argmin takes the first optimum, i.e. the smallest split value
        bb = int(b[int(np.argmin(score))])
        split[node] = 0.5 * (xs[bb - 1] + xs[bb])
        stack.append((bb, hi, depth + 1, node, True))
        stack.append((lo, bb, depth + 1, node, False))

    return _Tree(
        indices=indices,
        split=np.asarray(split, dtype=np.float64),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        lo=np.asarray(lo_l, dtype=np.int32),
        hi=np.asarray(hi_l, dtype=np.int32),
    )


def _leaf_ranges(tree: _Tree, q: np.ndarray):
    """Leaf slice [lo, hi) of each query under one tree."""
    node = np.zeros(q.size, dtype=np.int32)
    while True:
        internal = tree.left[node] >= 0
        if not internal.any():
            break
        cur = node[internal]
        go_left = q[internal] <= tree.split[cur]
        node[internal] = np.where(go_left, tree.left[cur], tree.right[cur])
    return tree.lo[node], tree.hi[node]


class ForestModel:
    """Fitted forest over one predictor; exposes localizing weights."""

    def __init__(self, x: np.ndarray, y: np.ndarray, config: ForestConfig,
                 trees: list[_Tree]):
        self.x = x
        self.y = y
        self.config = config
        self.trees = trees
        self.n = int(x.size)
        self.min_x = float(np.min(x))
        self.max_x = float(np.max(x))

    def weights(self, x0: float) -> np.ndarray:
        """Localizing weights at a single query; nonnegative, sum to 1."""
        return self._weights_batch(np.asarray([float(x0)]))[0]

    def _weights_batch(self, q: np.ndarray) -> np.ndarray:
        nq = q.size
        w = np.zeros((nq, self.n))
        for tree in self.trees:
            lo, hi = _leaf_ranges(tree, q)
            key = lo.astype(np.int64) * (tree.indices.size + 1) + hi
            uniq, inverse = np.unique(key, return_inverse=True)
            for t, kk in enumerate(uniq):
                l = int(kk // (tree.indices.size + 1))
                h = int(kk % (tree.indices.size + 1))
                rows = np.nonzero(inverse == t)[0]
                cols = tree.indices[l:h]
                w[np.ix_(rows, cols)] += 1.0 / (h - l)
        w /= len(self.trees)
        return w

    def weighted_means(self, q: np.ndarray) -> np.ndarray:
        """Plain forest prediction: weighted mean of y at each query."""
        out = np.empty(q.size)
        for start in range(0, q.size, _CHUNK):
            block = q[start : start + _CHUNK]
            out[start : start + _CHUNK] = self._weights_batch(block) @ self.y
        return out

    def line_fits(self, q: np.ndarray):
        """Local L1 lines (slope in [-1, 1], level at the query).

        Queries beyond the training range are solved at the clipped
        query and extended along the fitted slope, which is exact
        because the weights do not change past the range.
        """
        q = np.asarray(q, dtype=np.float64)
        q_eff = np.clip(q, self.min_x, self.max_x)
        slope = np.empty(q.size)
        level = np.empty(q.size)
        for start in range(0, q.size, _CHUNK):
            sl = slice(start, start + _CHUNK)
            a, c = self._line_fits_chunk(q_eff[sl])
            slope[sl] = a
            level[sl] = c + (q[sl] - q_eff[sl]) * a
        return slope, level

    def wls_lines(self, q: np.ndarray):
        """Local weighted least-squares lines (level at the query)."""
        q = np.asarray(q, dtype=np.float64)
        q_eff = np.clip(q, self.min_x, self.max_x)
        slope = np.empty(q.size)
        level = np.empty(q.size)
        for start in range(0, q.size, _CHUNK):
            sl = slice(start, start + _CHUNK)
            w = self._weights_batch(q_eff[sl])
            s_x = w @ self.x
            s_y = w @ self.y
            s_xx = w @ (self.x * self.x)
            s_xy = w @ (self.x * self.y)
            var = s_xx - s_x * s_x
            scale = max(1.0, float(np.max(np.abs(self.x))) ** 2)
            if np.any(var <= 1e-12 * scale):
                raise DegenerateDataError(
                    "local design is singular: no predictor spread in the "
                    "weighted neighborhood"
                )
            a = (s_xy - s_x * s_y) / var
            slope[sl] = a
            level[sl] = s_y - a * (s_x - q[sl])
        return slope, level

    def _line_fits_chunk(self, q: np.ndarray):
        w = self._weights_batch(q)
        rows, cols = np.nonzero(w)
        counts = np.bincount(rows, minlength=q.size)
        smax = int(counts.max())
        nq = q.size
        pos = np.arange(rows.size) - np.repeat(
            np.concatenate(([0], np.cumsum(counts)[:-1])), counts
        )
        D = np.zeros((nq, smax))
        Y = np.zeros((nq, smax))
        W = np.zeros((nq, smax))
        D[rows, pos] = self.x[cols] - q[rows]
        Y[rows, pos] = self.y[cols]
        W[rows, pos] = w[rows, cols]
        a, c = _batched_l1(D, Y, W)
        # no predictor spread under the weights: fall back to a flat fit
        spread = D.max(axis=1) - D.min(axis=1)
        flat = spread <= 0.0
        if flat.any():
            a[flat] = 0.0
            c[flat] = [_row_median(Y[i], W[i]) for i in np.nonzero(flat)[0]]
        return a, c


def _row_median(y: np.ndarray, w: np.ndarray) -> float:
    keep = w > 0.0
    return weighted_median(y[keep], w[keep])


def _batched_l1(D: np.ndarray, Y: np.ndarray, W: np.ndarray):
    """Golden-section over the slope, exact weighted-median level per row.

    Rows are padded with zero weight; a padded cell can never be picked
    as the median because the first cell whose cumulative weight crosses
    half the total always carries positive weight.
    """
    nq = D.shape[0]
    half = 0.5 * W.sum(axis=1)
    rows = np.arange(nq)

    def med_obj(a):
        r = Y - a[:, None] * D
        order = np.argsort(r, axis=1, kind="stable")
        r_sorted = np.take_along_axis(r, order, axis=1)
        w_sorted = np.take_along_axis(W, order, axis=1)
        cw = np.cumsum(w_sorted, axis=1)
        idx = (cw < half[:, None]).sum(axis=1)
        med = r_sorted[rows, idx]
        obj = np.einsum("ij,ij->i", W, np.abs(r - med[:, None]))
        return med, obj

    lo = np.full(nq, -1.0)
    hi = np.full(nq, 1.0)
    c1 = hi - _INVPHI * (hi - lo)
    c2 = lo + _INVPHI * (hi - lo)
    _, f1 = med_obj(c1)
    _, f2 = med_obj(c2)
    for _ in range(_GOLDEN_STEPS):
        take_low = f1 <= f2
        hi = np.where(take_low, c2, hi)
        lo = np.where(take_low, lo, c1)
        width = hi - lo
        c1 = hi - _INVPHI * width
        c2 = lo + _INVPHI * width
        a_eval = np.where(take_low, c1, c2)
        _, f_eval = med_obj(a_eval)
        f1, f2 = (
            np.where(take_low, f_eval, f2),
            np.where(take_low, f1, f_eval),
        )

    a_best = 0.5 * (lo + hi)
    med_best, f_best = med_obj(a_best)
    # binding slope bounds come back as the exact endpoint
    for endpoint in (-1.0, 1.0):
        a_end = np.full(nq, endpoint)
        med_end, f_end = med_obj(a_end)
        better = f_end < f_best
        a_best = np.where(better, a_end, a_best)
        med_best = np.where(better, med_end, med_best)
        f_best = np.where(better, f_end, f_best)
    return a_best, med_best


def fit_forest(x, y, config: ForestConfig | None = None) -> ForestModel:
    """Grow a subsampled regression forest on one predictor."""
    x, y = check_paired(x, y)
    if config is None:
        config = ForestConfig()
    n = x.size
    if n < 2 * config.min_leaf:
        raise InsufficientDataError(
            f"need at least {2 * config.min_leaf} points for min_leaf="
            f"{config.min_leaf}, got {n}"
        )
    m = min(n, int(math.ceil(config.subsample_fraction * n)))
    seeds = np.random.SeedSequence(config.seed).spawn(config.n_trees)
    trees = []
    for child in seeds:
        rng = np.random.default_rng(child)
        picked = np.sort(rng.choice(n, size=m, replace=False))
        order = np.argsort(x[picked], kind="stable")
        indices = picked[order]
        trees.append(
            _grow_tree(x[indices], y[indices], indices, config.min_leaf,
                       config.max_depth)
        )
    return ForestModel(x=x, y=y, config=config, trees=trees)


def local_linear_median(x0: float, weights, x, y) -> LocalLinearFit:
    """Solve the weighted L1 line at one query given localizing weights.

    Needs at least two distinct x values with positive weight; a flat
    weighted design leaves the slope unidentified and is rejected.
    """
    x = check_vector(x, "x")
    y = check_vector(y, "y")
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != x.shape:
        raise InputError("weights must match x in length")
    if np.any(w < 0.0) or not np.all(np.isfinite(w)):
        raise InputError("weights must be nonnegative and finite")
    keep = w > 0.0
    if not keep.any():
        raise InputError("all weights are zero; empty support")
    xs, ys, ws = x[keep], y[keep], w[keep]
    if xs.max() == xs.min():
        raise DegenerateDataError(
            "all positively-weighted x values are equal; slope unidentified"
        )
    a, c = l1_line_fit(xs, ys, ws, origin=float(x0))
    return LocalLinearFit(slope=float(a), level=float(c))


def _as_univariate(X, name: str = "X") -> np.ndarray:
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    return check_vector(arr, name)


class ForestProgressionRegressor(BaseEstimator, RegressorMixin):
    """Forest-localized median regression on the Laplace scale.

    Both the predictor and the response are mapped to a standard Laplace
    scale through semi-parametric marginal fits (empirical bulk, GPD
    tails).  On that scale a forest-weighted L1 local line with slope
    bounded by 1 is solved at each query; the fitted level is mapped
    back through the response quantile function.  Beyond the training
    range the transformed fit continues linearly, which is what makes
    the method extrapolate along the tail rather than flatten out.

    Parameters
    ----------
    k : int or None
        Order statistics per tail for the marginal fits (default n // 10).
    n_trees, min_leaf, subsample_fraction, max_depth, seed
        Forest controls, see :class:`ForestConfig`.
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
        self.transform_x_ = fit_marginal(x, self.k_)
        self.transform_y_ = fit_marginal(y, self.k_)
        xstar = self.transform_x_.to_laplace(x)
        ystar = self.transform_y_.to_laplace(y)
        self.forest_ = fit_forest(xstar, ystar, self._forest_config())
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        self._check_fitted()
        x = _as_univariate(X)
        z = self.transform_x_.to_laplace(x)
        _, level = self.forest_.line_fits(z)
        return self.transform_y_.from_laplace(level)

    def laplace_line(self, X):
        """Local slope and level on the Laplace scale (diagnostics)."""
        self._check_fitted()
        x = _as_univariate(X)
        z = self.transform_x_.to_laplace(x)
        return self.forest_.line_fits(z)

    def _forest_config(self) -> ForestConfig:
        return ForestConfig(
            n_trees=self.n_trees,
            min_leaf=self.min_leaf,
            subsample_fraction=self.subsample_fraction,
            max_depth=self.max_depth,
            seed=self.seed,
        )

    def _check_fitted(self):
        if not hasattr(self, "forest_"):
            raise InputError("estimator is not fitted")


class RandomForestBaseline(BaseEstimator, RegressorMixin):
    """Plain forest on the original scale: weighted-mean predictions.

    Extrapolates as a constant beyond the training range, which is the
    failure mode the progression estimators are built to avoid.
    """

    def __init__(self, n_trees=500, min_leaf=5, subsample_fraction=0.5,
                 max_depth=None, seed=0):
        self.n_trees = n_trees
        self.min_leaf = min_leaf
        self.subsample_fraction = subsample_fraction
        self.max_depth = max_depth
        self.seed = seed

    def fit(self, X, y):
        x = _as_univariate(X)
        x, y = check_paired(x, y)
        self.forest_ = fit_forest(
            x,
            y,
            ForestConfig(
                n_trees=self.n_trees,
                min_leaf=self.min_leaf,
                subsample_fraction=self.subsample_fraction,
                max_depth=self.max_depth,
                seed=self.seed,
            ),
        )
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        if not hasattr(self, "forest_"):
            raise InputError("estimator is not fitted")
        x = _as_univariate(X)
        return self.forest_.weighted_means(x)


class LocalLinearForestBaseline(RandomForestBaseline):
    """Forest-weighted least-squares line per query, on the original scale.

    Shares the forest construction with :class:`RandomForestBaseline`
    but predicts with the level of a local linear fit, so it continues
    linearly beyond the training range.
    """

    def predict(self, X):
        if not hasattr(self, "forest_"):
            raise InputError("estimator is not fitted")
        x = _as_univariate(X)
        _, level = self.forest_.wls_lines(x)
        return level
