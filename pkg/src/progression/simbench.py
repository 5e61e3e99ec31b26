"""Simulation scenarios with covariate shift, and the experiment runner.

Training predictors are independent Student-t draws; responses add
Gaussian noise around a fixed median function.  Test covariates come
from a shifted law (mean shift, variance scaling, or an equicorrelated
multivariate t built from a shared chi-square mixing variable), which
probes predictions outside the training range.
"""

from __future__ import annotations

import csv
import os
import time
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.ensemble import RandomForestRegressor

from ._validation import check_vector
from .additive import AdditiveProgressionRegressor
from .exceptions import InputError
from .forest import (
    ForestProgressionRegressor,
    LocalLinearForestBaseline,
    RandomForestBaseline,
)
from .parametric import ParametricProgressionRegressor


def _f_sqrt2sided(X):
    x = X[:, 0]
    return np.sign(x) * 4.0 * np.sqrt(np.abs(x))


def _f_quadratic(X):
    return X[:, 0] ** 2 / 2.0


def _f_cubic(X):
    return X[:, 0] ** 3 / 10.0


def _f_fracpoly(X):
    x1, x2 = X[:, 0], X[:, 1]
    return np.sign(x1) * 4.0 * np.sqrt(np.abs(x1)) + x2**3 / 20.0


def _f_friedman(X):
    return (
        10.0 * np.sin(np.pi * X[:, 0] * X[:, 1])
        + 20.0 * (X[:, 2] - 0.5) ** 2
        + 10.0 * X[:, 3]
        + 5.0 * X[:, 4]
    )


@dataclass(frozen=True)
class _ModelDef:
    n_features: int
    median_fn: callable
    noise_sd: float
    predictor_dof: float


_MODELS = {
    "sqrt2sided": _ModelDef(1, _f_sqrt2sided, 1.0, 3.0),
    "quadratic": _ModelDef(1, _f_quadratic, 1.0, 3.0),
    "cubic": _ModelDef(1, _f_cubic, 1.0, 3.0),
    "fracpoly": _ModelDef(2, _f_fracpoly, 2.0, 4.0),
    "friedman": _ModelDef(5, _f_friedman, 2.0, 4.0),
}

SCENARIO_NAMES = tuple(_MODELS)
SHIFT_KINDS = ("none", "mean", "variance", "covariance")
METHOD_NAMES = (
    "progression-rf",
    "progression-additive",
    "progression-parametric",
    "baseline-rf",
    "baseline-llf",
)

RESULT_COLUMNS = (
    "scenario",
    "shift_kind",
    "magnitude",
    "method",
    "repetition",
    "rmse",
    "rel_median_err",
    "runtime_ms",
)


@dataclass(frozen=True)
class ScenarioSpec:
    """One simulation setting; None fields resolve from the registry."""

    name: str
    n_train: int = 1000
    noise_sd: float | None = None
    predictor_dof: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.name not in _MODELS:
            raise InputError(
                f"unknown scenario {self.name!r}; choose from {sorted(_MODELS)}"
            )
        if self.n_train < 2:
            raise InputError(f"n_train must be at least 2, got {self.n_train}")
        if self.noise_sd is not None and self.noise_sd < 0.0:
            raise InputError(f"noise_sd must be nonnegative, got {self.noise_sd}")
        if self.predictor_dof is not None and self.predictor_dof <= 0.0:
            raise InputError(
                f"predictor_dof must be positive, got {self.predictor_dof}"
            )

    @property
    def n_features(self) -> int:
        return _MODELS[self.name].n_features

    @property
    def resolved_noise_sd(self) -> float:
        d = _MODELS[self.name]
        return d.noise_sd if self.noise_sd is None else float(self.noise_sd)

    @property
    def resolved_dof(self) -> float:
        d = _MODELS[self.name]
        return d.predictor_dof if self.predictor_dof is None else float(
            self.predictor_dof
        )

    def median_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        if X.shape[1] != self.n_features:
            raise InputError(
                f"scenario {self.name!r} expects {self.n_features} columns, "
                f"got {X.shape[1]}"
            )
        return _MODELS[self.name].median_fn(X)


@dataclass(frozen=True)
class ShiftSpec:
    """Covariate shift applied to the test draw only."""

    kind: str = "none"
    magnitude: float = 0.0
    target_coord: int | None = None

    def __post_init__(self):
        if self.kind not in SHIFT_KINDS:
            raise InputError(
                f"unknown shift kind {self.kind!r}; choose from {SHIFT_KINDS}"
            )
        if self.kind == "variance" and self.magnitude <= 0.0:
            raise InputError("variance shift needs a positive scale factor")
        if self.kind == "covariance" and not -1.0 < self.magnitude < 1.0:
            raise InputError("covariance shift needs a correlation in (-1, 1)")


def generate(spec: ScenarioSpec):
    """Draw one training set; returns (X, y, median_values)."""
    rng = np.random.default_rng(spec.seed)
    X = rng.standard_t(spec.resolved_dof, size=(spec.n_train, spec.n_features))
    m = spec.median_function(X)
    y = m + spec.resolved_noise_sd * rng.standard_normal(spec.n_train)
    return X, y, m


def draw_shifted_test(spec: ScenarioSpec, shift: ShiftSpec, n_test: int, seed):
    """Draw a test set under the shifted covariate law.

    With kind "none" and the training seed this reproduces the training
    predictors draw exactly.
    """
    if n_test < 1:
        raise InputError(f"n_test must be positive, got {n_test}")
    rng = np.random.default_rng(seed)
    p = spec.n_features
    dof = spec.resolved_dof
    if shift.kind == "covariance":
        if p < 2:
            raise InputError("covariance shift needs at least two predictors")
        rho = shift.magnitude
        corr = np.full((p, p), rho)
        np.fill_diagonal(corr, 1.0)
        z = rng.standard_normal((n_test, p)) @ np.linalg.cholesky(corr).T
        # shared chi-square mixing keeps the t margins while correlating
        g = rng.chisquare(dof, size=n_test) / dof
        X = z / np.sqrt(g)[:, None]
    else:
        X = rng.standard_t(dof, size=(n_test, p))
        if shift.kind == "mean":
            target = shift.target_coord
            if target is None:
                target = 1 if p >= 2 else 0
            if not 0 <= target < p:
                raise InputError(
                    f"target_coord {target} out of range for {p} predictors"
                )
            X[:, target] = X[:, target] + shift.magnitude
        elif shift.kind == "variance":
            X = X * shift.magnitude
    m = spec.median_function(X)
    y = m + spec.resolved_noise_sd * rng.standard_normal(n_test)
    return X, y, m


def grid_test_points(spec: ScenarioSpec, n_points: int = 200) -> np.ndarray:
    """Deterministic query grid spanning deep into the predictor tails.

    Equidistant between the 0.01/n and 1 - 0.01/n population quantiles
    of the training predictor law; univariate scenarios only.
    """
    if spec.n_features != 1:
        raise InputError("grid queries are defined for univariate scenarios")
    if n_points < 2:
        raise InputError(f"n_points must be at least 2, got {n_points}")
    eps = 0.01 / spec.n_train
    lo = stats.t.ppf(eps, spec.resolved_dof)
    hi = stats.t.ppf(1.0 - eps, spec.resolved_dof)
    return np.linspace(lo, hi, n_points)


@dataclass(frozen=True)
class Metrics:
    rmse: float
    rel_median_err: float


def evaluate(y_pred, y_obs, median_true=None, sd_y=None) -> Metrics:
    """Prediction metrics: RMSE against realized responses, and the
    signed mean relative error against the true median where the median
    is not too close to zero (|m| >= 0.05 * sd_y)."""
    y_pred = check_vector(y_pred, "y_pred")
    y_obs = check_vector(y_obs, "y_obs")
    if y_pred.size != y_obs.size:
        raise InputError("y_pred and y_obs must have equal length")
    rmse = float(np.sqrt(np.mean((y_pred - y_obs) ** 2)))
    rel = float("nan")
    if median_true is not None:
        m = check_vector(median_true, "median_true")
        if m.size != y_pred.size:
            raise InputError("median_true must match y_pred in length")
        if sd_y is None:
            raise InputError("sd_y is required alongside median_true")
        keep = np.abs(m) >= 0.05 * float(sd_y)
        if keep.any():
            rel = float(np.mean((y_pred[keep] - m[keep]) / m[keep]))
    return Metrics(rmse=rmse, rel_median_err=rel)


@dataclass(frozen=True)
class ExperimentRow:
    scenario: str
    shift_kind: str
    magnitude: float
    method: str
    repetition: int
    rmse: float
    rel_median_err: float
    runtime_ms: float


def thread_count() -> int:
    """Worker cap from the PROGRESSION_THREADS environment variable."""
    raw = os.environ.get("PROGRESSION_THREADS", "1")
    try:
        value = int(raw)
    except ValueError as exc:
        raise InputError(f"PROGRESSION_THREADS must be an integer, got {raw!r}") from exc
    return max(1, value)


class MultivariateForestBaseline(BaseEstimator, RegressorMixin):
    """Plain multi-predictor random forest (the stock library regressor)."""

    def __init__(self, n_trees=500, min_leaf=5, seed=0):
        self.n_trees = n_trees
        self.min_leaf = min_leaf
        self.seed = seed

    def fit(self, X, y):
        # sklearn only takes 32-bit states; fold wider seeds deterministically
        state = int(self.seed) % (2**32)
        self.forest_ = RandomForestRegressor(
            n_estimators=self.n_trees,
            min_samples_leaf=self.min_leaf,
            random_state=state,
            n_jobs=thread_count(),
        ).fit(X, y)
        self.n_features_in_ = self.forest_.n_features_in_
        return self

    def predict(self, X):
        if not hasattr(self, "forest_"):
            raise InputError("estimator is not fitted")
        return self.forest_.predict(X)


_UNIVARIATE_ONLY = ("progression-rf", "progression-parametric", "baseline-llf")


def make_estimator(method: str, n_features: int, *, k=None, n_trees=500,
                   min_leaf=5, subsample_fraction=0.5, max_depth=None,
                   seed=0, max_sweeps=10):
    """Instantiate an unfitted estimator for a registry method name."""
    if method not in METHOD_NAMES:
        raise InputError(
            f"unknown method {method!r}; choose from {METHOD_NAMES}"
        )
    if n_features > 1 and method in _UNIVARIATE_ONLY:
        raise InputError(f"{method} supports a single predictor only")
    forest_kw = dict(
        n_trees=n_trees,
        min_leaf=min_leaf,
        subsample_fraction=subsample_fraction,
        max_depth=max_depth,
        seed=seed,
    )
    if method == "progression-rf":
        return ForestProgressionRegressor(k=k, **forest_kw)
    if method == "progression-parametric":
        return ParametricProgressionRegressor(k=k, **forest_kw)
    if method == "progression-additive":
        return AdditiveProgressionRegressor(k=k, max_sweeps=max_sweeps, **forest_kw)
    if method == "baseline-llf":
        return LocalLinearForestBaseline(**forest_kw)
    if n_features > 1:
        return MultivariateForestBaseline(
            n_trees=n_trees, min_leaf=min_leaf, seed=seed
        )
    return RandomForestBaseline(**forest_kw)


def _rep_seeds(seed: int, rep: int):
    children = np.random.SeedSequence(
        entropy=int(seed), spawn_key=(int(rep),)
    ).spawn(3)
    return tuple(int(c.generate_state(1, dtype=np.uint64)[0]) for c in children)


def run_experiment(spec: ScenarioSpec, shift: ShiftSpec, methods, repetitions: int,
                   *, n_test: int = 200, k=None, n_trees=500, min_leaf=5,
                   subsample_fraction=0.5, max_depth=None, max_sweeps=10,
                   seed=0) -> list[ExperimentRow]:
    """Repeated train/shifted-test comparison of the selected methods.

    Every repetition draws fresh training and test sets from seeds
    derived from (seed, repetition); all methods inside a repetition
    share the same data and the same fitting seed, so the comparison is
    paired.  Rows come back in (repetition, method) order.
    """
    if repetitions < 1:
        raise InputError(f"repetitions must be positive, got {repetitions}")
    methods = list(methods)
    for m in methods:
        if m not in METHOD_NAMES:
            raise InputError(f"unknown method {m!r}; choose from {METHOD_NAMES}")
    rows = []
    for rep in range(repetitions):
        seed_train, seed_test, seed_fit = _rep_seeds(seed, rep)
        X, y, _ = generate(replace(spec, seed=seed_train))
        X_test, y_test, m_test = draw_shifted_test(spec, shift, n_test, seed_test)
        sd_y = float(np.std(y))
        for method in methods:
            est = make_estimator(
                method,
                spec.n_features,
                k=k,
                n_trees=n_trees,
                min_leaf=min_leaf,
                subsample_fraction=subsample_fraction,
                max_depth=max_depth,
                seed=seed_fit,
                max_sweeps=max_sweeps,
            )
            start = time.perf_counter()
            est.fit(X, y)
            y_pred = est.predict(X_test)
            elapsed_ms = (time.perf_counter() - start) * 1000.0
            met = evaluate(y_pred, y_test, m_test, sd_y)
            rows.append(
                ExperimentRow(
                    scenario=spec.name,
                    shift_kind=shift.kind,
                    magnitude=float(shift.magnitude),
                    method=method,
                    repetition=rep,
                    rmse=met.rmse,
                    rel_median_err=met.rel_median_err,
                    runtime_ms=elapsed_ms,
                )
            )
    return rows


def write_results(rows, path) -> None:
    """Write experiment rows as CSV with 17 significant digits."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    row.scenario,
                    row.shift_kind,
                    _fmt(row.magnitude),
                    row.method,
                    str(row.repetition),
                    _fmt(row.rmse),
                    _fmt(row.rel_median_err),
                    _fmt(row.runtime_ms),
                ]
            )


def _fmt(value: float) -> str:
    return format(float(value), ".17g")
