"""Forest construction, localizing weights, and the local L1 smoother."""

import numpy as np
import pytest
from numpy.testing import assert_allclose
from sklearn.base import clone

from progression import (
    DegenerateDataError,
    ForestConfig,
    ForestProgressionRegressor,
    InputError,
    InsufficientDataError,
    LocalLinearForestBaseline,
    RandomForestBaseline,
    fit_forest,
    local_linear_median,
    weighted_median,
)


@pytest.fixture(scope="module")
def model():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(300)
    y = 0.8 * x + 0.3 * rng.standard_normal(300)
    return fit_forest(x, y, ForestConfig(n_trees=50, min_leaf=5, seed=1))


class TestForestConfig:
    def test_defaults(self):
        cfg = ForestConfig()
        assert (cfg.n_trees, cfg.min_leaf, cfg.subsample_fraction) == (500, 5, 0.5)
        assert cfg.max_depth is None and cfg.seed == 0

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n_trees": 0},
            {"min_leaf": 0},
            {"subsample_fraction": 0.0},
            {"subsample_fraction": 1.5},
            {"max_depth": 0},
        ],
    )
    def test_validation(self, kwargs):
        with pytest.raises(InputError):
            ForestConfig(**kwargs)


class TestFitForest:
    def test_too_small_sample(self):
        with pytest.raises(InsufficientDataError):
            fit_forest(np.arange(9.0), np.arange(9.0),
                       ForestConfig(n_trees=1, min_leaf=5))

    def test_ten_points_give_stumps_or_single_splits(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal(10)
        y = rng.standard_normal(10)
        fm = fit_forest(x, y, ForestConfig(n_trees=50, min_leaf=5,
                                           subsample_fraction=1.0, seed=2))
        for tree in fm.trees:
            assert tree.split.size in (1, 3)  # stump or one split

    def test_leaf_sizes_respect_min_leaf(self, model):
        for tree in model.trees:
            leaves = tree.left < 0
            sizes = tree.hi[leaves] - tree.lo[leaves]
            assert np.all(sizes >= 5)

    def test_subsample_size_without_replacement(self, model):
        m = int(np.ceil(0.5 * model.n))
        for tree in model.trees:
            assert tree.indices.size == m
            assert np.unique(tree.indices).size == m

    def test_max_depth_limits_the_trees(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal(400)
        y = rng.standard_normal(400)
        fm = fit_forest(x, y, ForestConfig(n_trees=10, min_leaf=5, max_depth=2))
        for tree in fm.trees:
            # depth 2 allows at most 7 nodes
            assert tree.split.size <= 7

    def test_seed_determinism(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal(200)
        y = rng.standard_normal(200)
        a = fit_forest(x, y, ForestConfig(n_trees=20, seed=7))
        b = fit_forest(x, y, ForestConfig(n_trees=20, seed=7))
        c = fit_forest(x, y, ForestConfig(n_trees=20, seed=8))
        for ta, tb in zip(a.trees, b.trees):
            assert np.array_equal(ta.indices, tb.indices)
            assert np.array_equal(ta.split, tb.split, equal_nan=True)
        assert any(
            not np.array_equal(ta.indices, tc.indices)
            for ta, tc in zip(a.trees, c.trees)
        )

    def test_constant_response_grows_pure_stumps(self):
        x = np.linspace(0.0, 1.0, 50)
        fm = fit_forest(x, np.full(50, 3.0), ForestConfig(n_trees=5, min_leaf=5))
        for tree in fm.trees:
            assert tree.split.size == 1
        w = fm.weights(0.5)
        assert_allclose(w.sum(), 1.0, atol=1e-12)


class TestWeights:
    def test_single_tree_two_point_leaf(self):
        x = np.array([0.0, 1.0, 10.0, 11.0])
        y = np.array([0.0, 0.0, 5.0, 5.0])
        fm = fit_forest(x, y, ForestConfig(n_trees=1, min_leaf=2,
                                           subsample_fraction=1.0, seed=0))
        assert_allclose(fm.weights(0.5), [0.5, 0.5, 0.0, 0.0])
        assert_allclose(fm.weights(10.5), [0.0, 0.0, 0.5, 0.5])

    def test_nonnegative_and_normalized(self, model):
        rng = np.random.default_rng(4)
        q = rng.uniform(-6.0, 6.0, size=1000)
        w = model._weights_batch(q)
        assert np.all(w >= 0.0)
        assert_allclose(w.sum(axis=1), 1.0, atol=1e-12)

    def test_constant_beyond_training_range(self, model):
        hi = model.max_x
        assert np.array_equal(model.weights(hi + 1.0), model.weights(hi + 50.0))
        lo = model.min_x
        assert np.array_equal(model.weights(lo - 1.0), model.weights(lo - 50.0))


class TestLocalLinearMedian:
    def test_exact_line_any_weights(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal(20)
        y = 0.7 * x + 1.0
        w = rng.uniform(0.1, 1.0, 20)
        for q in (-2.0, 0.0, 3.5):
            fit = local_linear_median(q, w, x, y)
            assert_allclose(fit.slope, 0.7, atol=1e-9)
            assert_allclose(fit.level, 0.7 * q + 1.0, atol=1e-9)

    def test_three_point_instance(self):
        # minimum sits at the bound with the line through the outer points
        fit = local_linear_median(0.0, np.ones(3), np.array([-1.0, 0.0, 1.0]),
                                  np.array([1.0, 2.0, 4.0]))
        assert fit.slope == 1.0
        assert fit.level == 2.0

    def test_matches_grid_oracle(self):
        for seed in range(30):
            rng = np.random.default_rng(seed)
            n = 12
            x = rng.standard_normal(n)
            y = rng.standard_normal(n)
            w = rng.uniform(0.05, 1.0, n)
            q = float(rng.standard_normal())
            fit = local_linear_median(q, w, x, y)
            obj = float(np.sum(w * np.abs(y - fit.level - fit.slope * (x - q))))
            best = np.inf
            for a in np.arange(-1.0, 1.0 + 1e-12, 1e-3):
                r = y - a * (x - q)
                c = weighted_median(r, w)
                best = min(best, float(np.sum(w * np.abs(r - c))))
            assert obj <= best + 1e-6

    def test_flat_support_rejected(self):
        with pytest.raises(DegenerateDataError):
            local_linear_median(0.0, np.ones(5), np.zeros(5), np.arange(5.0))
        # distinct x whose weight support collapses to one value
        x = np.array([0.0, 0.0, 0.0, 1.0, 2.0])
        w = np.array([1.0, 1.0, 1.0, 0.0, 0.0])
        with pytest.raises(DegenerateDataError):
            local_linear_median(0.0, w, x, np.arange(5.0))

    def test_weight_validation(self):
        x = np.arange(5.0)
        with pytest.raises(InputError):
            local_linear_median(0.0, np.ones(4), x, x)
        with pytest.raises(InputError):
            local_linear_median(0.0, -np.ones(5), x, x)
        with pytest.raises(InputError):
            local_linear_median(0.0, np.zeros(5), x, x)


@pytest.fixture(scope="module")
def fitted():
    rng = np.random.default_rng(6)
    x = rng.standard_t(3, size=1000)
    y = x ** 3 / 10.0 + rng.standard_normal(1000)
    est = ForestProgressionRegressor(k=100, n_trees=100, seed=5)
    return est.fit(x, y), x, y


class TestForestProgressionRegressor:

    def test_in_range_prediction_is_central(self, fitted):
        est, x, y = fitted
        pred = est.predict(np.array([float(np.median(x))]))[0]
        lo, hi = np.quantile(y, [0.25, 0.75])
        assert lo <= pred <= hi

    def test_linear_extension_identity(self, fitted):
        """Out-of-range local fits continue along the boundary slope."""
        est, x, _ = fitted
        q = np.array([x.max() + 1.0, x.max() + 4.0])
        slope, level = est.laplace_line(q)
        z = est.transform_x_.to_laplace(q)
        assert_allclose(slope[0], slope[1], atol=1e-12)
        assert_allclose(level[1], level[0] + (z[1] - z[0]) * slope[0], atol=1e-9)

    def test_three_point_collinearity_beyond_range(self, fitted):
        est, x, _ = fitted
        q = x.max() + np.array([0.5, 2.0, 8.0])
        z = est.transform_x_.to_laplace(q)
        zy = est.transform_y_.to_laplace(est.predict(q))
        lam = (z[1] - z[0]) / (z[2] - z[0])
        resid = zy[1] - (zy[0] + lam * (zy[2] - zy[0]))
        assert abs(resid) < 1e-9

    def test_seed_determinism(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal(400)
        y = x + rng.standard_normal(400)
        grid = np.linspace(-4.0, 4.0, 50)
        p1 = ForestProgressionRegressor(k=40, n_trees=30, seed=3).fit(x, y).predict(grid)
        p2 = ForestProgressionRegressor(k=40, n_trees=30, seed=3).fit(x, y).predict(grid)
        assert np.array_equal(p1, p2)

    def test_prediction_shapes(self, fitted):
        est, _, _ = fitted
        out = est.predict(np.array([0.0, 1.0, 2.0]))
        assert out.shape == (3,)
        out2 = est.predict(np.array([[0.0], [1.0]]))
        assert out2.shape == (2,)
        with pytest.raises(InputError):
            est.predict(np.zeros((3, 2)))
        with pytest.raises(InputError):
            est.predict(np.array([0.0, np.nan]))

    def test_unfitted_predict_rejected(self):
        with pytest.raises(InputError):
            ForestProgressionRegressor().predict(np.zeros(3))

    def test_sklearn_parameter_protocol(self):
        est = ForestProgressionRegressor(k=64, n_trees=10, seed=9)
        params = est.get_params()
        assert params["k"] == 64 and params["seed"] == 9
        assert clone(est).get_params() == params


@pytest.fixture(scope="module")
def data():
    rng = np.random.default_rng(8)
    x = rng.standard_normal(500)
    y = 2.0 * x + 0.2 * rng.standard_normal(500)
    return x, y


class TestBaselines:

    def test_plain_forest_extrapolates_constantly(self, data):
        x, y = data
        rf = RandomForestBaseline(n_trees=50, seed=1).fit(x, y)
        edge = rf.predict(np.array([x.max()]))
        far = rf.predict(np.array([x.max() + 10.0, x.max() + 100.0]))
        assert_allclose(far, edge[0], atol=1e-12)

    def test_plain_forest_is_the_weighted_mean(self, data):
        x, y = data
        rf = RandomForestBaseline(n_trees=20, seed=2).fit(x, y)
        q = np.array([-1.0, 0.0, 1.5])
        expected = rf.forest_._weights_batch(q) @ y
        assert_allclose(rf.predict(q), expected, atol=1e-12)

    def test_constant_response_predicts_the_constant(self):
        x = np.linspace(0.0, 1.0, 60)
        rf = RandomForestBaseline(n_trees=10, seed=3).fit(x, np.full(60, 4.2))
        assert_allclose(rf.predict(np.array([-5.0, 0.5, 5.0])), 4.2, atol=1e-12)

    def test_llf_recovers_exact_line_beyond_range(self, data):
        x, _ = data
        y = 2.0 * x - 0.7  # slope outside [-1, 1]: no constraint on this path
        llf = LocalLinearForestBaseline(n_trees=30, seed=4).fit(x, y)
        q = np.array([x.min() - 3.0, 0.1, x.max() + 3.0])
        assert_allclose(llf.predict(q), 2.0 * q - 0.7, atol=1e-8)

    def test_llf_matches_normal_equations(self, data):
        x, y = data
        llf = LocalLinearForestBaseline(n_trees=25, seed=5).fit(x, y)
        rng = np.random.default_rng(9)
        for q in rng.uniform(x.min(), x.max(), size=20):
            w = llf.forest_.weights(float(q))
            sw = w.sum()
            mx = np.dot(w, x) / sw
            my = np.dot(w, y) / sw
            a = np.dot(w, (x - mx) * (y - my)) / np.dot(w, (x - mx) ** 2)
            level = my + a * (q - mx)
            assert_allclose(llf.predict(np.array([q]))[0], level, atol=1e-10)

    def test_llf_singular_design_rejected(self):
        rng = np.random.default_rng(10)
        llf = LocalLinearForestBaseline(n_trees=3, min_leaf=5).fit(
            np.zeros(20), rng.standard_normal(20)
        )
        with pytest.raises(DegenerateDataError):
            llf.predict(np.array([0.0]))
