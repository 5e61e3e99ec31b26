"""Regression that extrapolates along fitted marginal tails.

The estimators here predict conditional medians beyond the range of the
training predictors.  Both variables are mapped to standard Laplace
margins through semi-parametric fits (empirical bulk, generalized
Pareto tails); on that scale the regression tail is close to a line
with slope in [-1, 1], which local or global L1 fits recover and
extend.  Mapping the fitted line back through the response quantile
function yields extrapolations that follow the tail instead of
flattening at the edge of the data.
"""

from .additive import AdditiveProgressionRegressor, component_seed
from .exceptions import (
    DegenerateDataError,
    FitError,
    InputError,
    InsufficientDataError,
    InternalError,
    ProgressionError,
)
from .forest import (
    ForestConfig,
    ForestModel,
    ForestProgressionRegressor,
    LocalLinearFit,
    LocalLinearForestBaseline,
    RandomForestBaseline,
    fit_forest,
    local_linear_median,
)
from .gpd import GpdParams, fit_gpd, gpd_cdf, gpd_quantile
from .l1fit import l1_line_fit, weighted_median
from .marginal import (
    LaplaceMarginalTransformer,
    MarginalTransform,
    TailFit,
    fit_marginal,
    laplace_cdf,
    laplace_quantile,
)
from .parametric import (
    BothSidedProgression,
    ParametricProgressionRegressor,
    ProgressionParams,
    fit_both_sided,
    fit_tail_line,
    progression_predict,
)
from .serialize import load_model, save_model
from .simbench import (
    METHOD_NAMES,
    RESULT_COLUMNS,
    SCENARIO_NAMES,
    SHIFT_KINDS,
    ExperimentRow,
    Metrics,
    MultivariateForestBaseline,
    ScenarioSpec,
    ShiftSpec,
    draw_shifted_test,
    evaluate,
    generate,
    grid_test_points,
    make_estimator,
    run_experiment,
    thread_count,
    write_results,
)

__version__ = "0.1.0"

__all__ = [
    "METHOD_NAMES",
    "RESULT_COLUMNS",
    "SCENARIO_NAMES",
    "SHIFT_KINDS",
    "AdditiveProgressionRegressor",
    "BothSidedProgression",
    "DegenerateDataError",
    "ExperimentRow",
    "FitError",
    "ForestConfig",
    "ForestModel",
    "ForestProgressionRegressor",
    "GpdParams",
    "InputError",
    "InsufficientDataError",
    "InternalError",
    "LaplaceMarginalTransformer",
    "LocalLinearFit",
    "LocalLinearForestBaseline",
    "MarginalTransform",
    "Metrics",
    "MultivariateForestBaseline",
    "ParametricProgressionRegressor",
    "ProgressionError",
    "ProgressionParams",
    "RandomForestBaseline",
    "ScenarioSpec",
    "ShiftSpec",
    "TailFit",
    "component_seed",
    "draw_shifted_test",
    "evaluate",
    "fit_both_sided",
    "fit_forest",
    "fit_gpd",
    "fit_marginal",
    "fit_tail_line",
    "generate",
    "gpd_cdf",
    "gpd_quantile",
    "grid_test_points",
    "l1_line_fit",
    "laplace_cdf",
    "laplace_quantile",
    "load_model",
    "local_linear_median",
    "make_estimator",
    "progression_predict",
    "run_experiment",
    "save_model",
    "thread_count",
    "weighted_median",
    "write_results",
]
