"""Additive model backfitting with one progression smoother per coordinate."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from ._validation import check_matrix, check_vector
from .exceptions import InputError
from .forest import ForestProgressionRegressor


def component_seed(seed: int, sweep: int, index: int) -> int:
    """Deterministic seed for the smoother of one coordinate in one sweep."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(sweep), int(index)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


class AdditiveProgressionRegressor(BaseEstimator, RegressorMixin):
    """Backfitted sum of univariate progression smoothers.

    The model is y = alpha + sum_j f_j(x_j) + noise.  Backfitting cycles
    through the coordinates, refitting coordinate j on the residual of
    all the others with a fresh :class:`ForestProgressionRegressor`
    seeded from (seed, sweep, j).  Each refitted component is centered
    over the training sample; the removed means accumulate in a separate
    intercept correction so that ``alpha_`` stays exactly the training
    mean of y while predictions are unchanged by the centering.

    Sweeps stop early when the fitted additive predictor changes by at
    most ``tol`` (default: 1e-3 times the standard deviation of y) at
    every training point.  A coordinate whose partial residual is exactly
    constant gets the zero component without growing a forest.

    Parameters
    ----------
    k : int or None
        Tail count for every marginal fit inside the smoothers.
    n_trees, min_leaf, subsample_fraction, max_depth
        Forest controls shared by all component smoothers.
    seed : int
        Root seed; per-component seeds derive from it.
    max_sweeps : int
        Upper bound on backfitting sweeps.
    tol : float or None
        Convergence tolerance on the training-set predictor.
    """

    def __init__(self, k=None, n_trees=500, min_leaf=5, subsample_fraction=0.5,
                 max_depth=None, seed=0, max_sweeps=10, tol=None):
        self.k = k
        self.n_trees = n_trees
        self.min_leaf = min_leaf
        self.subsample_fraction = subsample_fraction
        self.max_depth = max_depth
        self.seed = seed
        self.max_sweeps = max_sweeps
        self.tol = tol

    def fit(self, X, y):
        X = check_matrix(X)
        y = check_vector(y, "y")
        n, p = X.shape
        if y.size != n:
            raise InputError(f"X has {n} rows but y has {y.size} values")
        if self.max_sweeps < 1:
            raise InputError(f"max_sweeps must be at least 1, got {self.max_sweeps}")
        if self.tol is not None and self.tol < 0.0:
            raise InputError(f"tol must be nonnegative, got {self.tol}")

        self.alpha_ = float(np.mean(y))
        tol = self.tol if self.tol is not None else 1e-3 * float(np.std(y))
        smoothers: list = [None] * p
        centers = np.zeros(p)
        fitted = np.zeros((n, p))
        previous_total = np.zeros(n)
        trace: list[float] = []

        for sweep in range(self.max_sweeps):
            component_change = 0.0
            for j in range(p):
                others = (fitted.sum(axis=1) - fitted[:, j]) + (
                    centers.sum() - centers[j]
                )
                residual = y - self.alpha_ - others
                if float(np.ptp(residual)) == 0.0:
                    # nothing left to explain: the centered component is
                    # identically zero and its constant joins the intercept
                    smoother = None
                    values = residual
                    center = float(residual[0])
                else:
                    smoother = ForestProgressionRegressor(
                        k=self.k,
                        n_trees=self.n_trees,
                        min_leaf=self.min_leaf,
                        subsample_fraction=self.subsample_fraction,
                        max_depth=self.max_depth,
                        seed=component_seed(self.seed, sweep, j),
                    ).fit(X[:, j], residual)
                    values = smoother.predict(X[:, j])
                    center = float(values.mean())
                new_component = values - center
                component_change = max(
                    component_change,
                    float(np.max(np.abs(new_component - fitted[:, j]))),
                )
                fitted[:, j] = new_component
                centers[j] = center
                smoothers[j] = smoother
            trace.append(component_change)
            total = fitted.sum(axis=1) + centers.sum()
            delta = float(np.max(np.abs(total - previous_total)))
            previous_total = total
            if delta <= tol:
                break

        self.smoothers_ = smoothers
        self.centers_ = centers
        self.intercept_shift_ = float(centers.sum())
        self.fit_trace_ = trace
        self.n_sweeps_ = len(trace)
        self.n_features_in_ = p
        return self

    def predict(self, X):
        if not hasattr(self, "smoothers_"):
            raise InputError("estimator is not fitted")
        X = check_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise InputError(
                f"expected {self.n_features_in_} columns, got {X.shape[1]}"
            )
        out = np.full(X.shape[0], self.alpha_ + self.intercept_shift_)
        for j, smoother in enumerate(self.smoothers_):
            if smoother is None:
                continue
            out += smoother.predict(X[:, j]) - self.centers_[j]
        return out
