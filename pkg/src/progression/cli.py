"""Command line front end: fit, predict, simulate, evaluate.

Exit codes: 0 on success, 2 for input or schema problems, 3 when a fit
fails on valid input, 4 if an internal invariant breaks.  CSV output is
written with 17 significant digits so values round-trip exactly.
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from .exceptions import FitError, InputError, ProgressionError
from .marginal import MarginalTransform
from .simbench import (
    METHOD_NAMES,
    SCENARIO_NAMES,
    SHIFT_KINDS,
    MultivariateForestBaseline,
    ScenarioSpec,
    ShiftSpec,
    evaluate,
    make_estimator,
    run_experiment,
    write_results,
)
from .serialize import load_model, save_model


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="progression",
        description="Tail-extrapolating regression with Laplace-scale local fits",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser(
        "fit",
        help="fit a model to a CSV (response column y, rest predictors)",
    )
    p_fit.add_argument("--input", required=True, help="training CSV with header")
    p_fit.add_argument("--model", required=True, help="output model JSON path")
    p_fit.add_argument(
        "--method", choices=METHOD_NAMES, default="progression-rf"
    )
    p_fit.add_argument("--k", type=int, default=None,
                       help="tail order statistics (default: n // 10)")
    p_fit.add_argument("--trees", type=int, default=500)
    p_fit.add_argument("--min-leaf", type=int, default=5)
    p_fit.add_argument("--seed", type=int, default=0)
    p_fit.set_defaults(func=cmd_fit)

    p_pred = sub.add_parser(
        "predict", help="append y_hat to a CSV using a fitted model"
    )
    p_pred.add_argument("--model", required=True)
    p_pred.add_argument("--input", required=True)
    p_pred.add_argument("--output", required=True)
    p_pred.set_defaults(func=cmd_predict)

    p_sim = sub.add_parser(
        "simulate", help="run repeated covariate-shift experiments"
    )
    p_sim.add_argument("--scenario", choices=SCENARIO_NAMES, required=True)
    p_sim.add_argument("--shift", choices=SHIFT_KINDS, default="none")
    p_sim.add_argument("--magnitude", type=float, default=0.0)
    p_sim.add_argument("--reps", type=int, default=50)
    p_sim.add_argument(
        "--method",
        default="progression-rf",
        help="comma-separated method names",
    )
    p_sim.add_argument("--output", required=True, help="results CSV path")
    p_sim.add_argument("--k", type=int, default=None)
    p_sim.add_argument("--trees", type=int, default=500)
    p_sim.add_argument("--min-leaf", type=int, default=5)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.set_defaults(func=cmd_simulate)

    p_eval = sub.add_parser(
        "evaluate",
        help="metrics from a predictions CSV with y, y_hat and optional m",
    )
    p_eval.add_argument("--input", required=True)
    p_eval.add_argument("--output", required=True, help="metrics CSV path")
    p_eval.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FitError as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return 3
    except ProgressionError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry_point() -> None:
    sys.exit(main())


# --- commands ---------------------------------------------------------------


def cmd_fit(args) -> int:
    header, data = _read_table(args.input)
    if "y" not in header:
        raise InputError("training CSV needs a response column named 'y'")
    if len(header) < 2:
        raise InputError(
            "training CSV needs at least one predictor column besides y"
        )
    if data.shape[0] < 2:
        raise InputError("training CSV has no data rows")
    y_col = header.index("y")
    pred_cols = [j for j in range(len(header)) if j != y_col]
    pred_names = [header[j] for j in pred_cols]
    X = data[:, pred_cols]
    y = data[:, y_col]
    est = make_estimator(
        args.method,
        X.shape[1],
        k=args.k,
        n_trees=args.trees,
        min_leaf=args.min_leaf,
        seed=args.seed,
    )
    if isinstance(est, MultivariateForestBaseline):
        raise InputError(
            "baseline-rf model files support a single predictor; the "
            "multivariate baseline is only available inside simulate"
        )
    est.fit(X, y)
    est.feature_names_ = pred_names
    save_model(est, args.model)
    for line in _fit_summary(args, est, pred_names, data.shape[0]):
        print(line)
    return 0


def cmd_predict(args) -> int:
    model = load_model(args.model)
    if isinstance(model, MarginalTransform):
        raise InputError(
            "model file holds a marginal transform, not a regression model"
        )
    header, data = _read_table(args.input)
    if "y_hat" in header:
        raise InputError("input already has a y_hat column")
    names = getattr(model, "feature_names_", None)
    p = model.n_features_in_
    if names is not None:
        missing = [c for c in names if c not in header]
        if missing:
            raise InputError(f"input is missing model columns: {missing}")
        cols = [header.index(c) for c in names]
    else:
        if len(header) != p:
            raise InputError(
                f"model expects {p} predictor columns, input has {len(header)}"
            )
        cols = list(range(p))
    if data.shape[0] > 0:
        y_hat = np.asarray(model.predict(data[:, cols]), dtype=np.float64)
        if not np.all(np.isfinite(y_hat)):
            raise FitError("model produced non-finite predictions")
    else:
        y_hat = np.empty(0)
    _write_table(args.output, header + ["y_hat"],
                 np.column_stack([data, y_hat]) if data.shape[0] else data)
    print(f"wrote {data.shape[0]} predictions to {args.output}")
    return 0


def cmd_simulate(args) -> int:
    methods = [m.strip() for m in args.method.split(",") if m.strip()]
    if not methods:
        raise InputError("no method names given")
    spec = ScenarioSpec(name=args.scenario)
    shift = ShiftSpec(kind=args.shift, magnitude=args.magnitude)
    rows = run_experiment(
        spec,
        shift,
        methods,
        repetitions=args.reps,
        k=args.k,
        n_trees=args.trees,
        min_leaf=args.min_leaf,
        seed=args.seed,
    )
    write_results(rows, args.output)
    print(f"wrote {len(rows)} result rows to {args.output}")
    return 0


def cmd_evaluate(args) -> int:
    header, data = _read_table(args.input)
    for col in ("y", "y_hat"):
        if col not in header:
            raise InputError(f"evaluate needs a {col!r} column")
    if data.shape[0] < 1:
        raise InputError("no data rows to evaluate")
    y = data[:, header.index("y")]
    y_hat = data[:, header.index("y_hat")]
    if "m" in header:
        m = data[:, header.index("m")]
        met = evaluate(y_hat, y, m, sd_y=float(np.std(y)))
    else:
        met = evaluate(y_hat, y)
    _write_table(
        args.output,
        ["rmse", "rel_median_err"],
        np.asarray([[met.rmse, met.rel_median_err]]),
    )
    print(f"rmse: {met.rmse:.6g}")
    print(f"rel_median_err: {met.rel_median_err:.6g}")
    return 0


# --- helpers ----------------------------------------------------------------


def _read_table(path):
    """Read a numeric CSV with a header; returns (header, float matrix)."""
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise InputError(f"{path} is empty") from None
            header = [h.strip() for h in header]
            if any(not h for h in header):
                raise InputError(f"{path} has blank column names")
            if len(set(header)) != len(header):
                raise InputError(f"{path} has duplicate column names")
            rows = []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(header):
                    raise InputError(
                        f"{path}:{lineno}: expected {len(header)} fields, "
                        f"got {len(row)}"
                    )
                try:
                    rows.append([float(v) for v in row])
                except ValueError:
                    raise InputError(
                        f"{path}:{lineno}: non-numeric value in row"
                    ) from None
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    data = np.asarray(rows, dtype=np.float64)
    if data.size == 0:
        data = np.empty((0, len(header)))
    if not np.all(np.isfinite(data)):
        raise InputError(f"{path} contains NaN or infinite values")
    return header, data


def _write_table(path, header, data) -> None:
    data = np.asarray(data, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in data:
            writer.writerow([format(v, ".17g") for v in row])


def _fit_summary(args, est, pred_names, n_rows):
    lines = [
        f"method: {args.method}",
        f"rows: {n_rows}",
        f"predictors: {', '.join(pred_names)}",
    ]
    if hasattr(est, "k_"):
        tau0 = 1.0 - est.k_ / n_rows
        lines.append(f"k: {est.k_} (tau0 = {tau0:.3f})")
    if hasattr(est, "transform_x_"):
        lines.append(_tail_line("x", est.transform_x_))
        lines.append(_tail_line("y", est.transform_y_))
    if hasattr(est, "laplace_line"):
        # localizing weights freeze outside the training range, so one
        # query per side gives the whole extrapolation slope
        xs = est.transform_x_.sorted_sample
        slopes = est.laplace_line(np.array([xs[0] - 1.0, xs[-1] + 1.0]))[0]
        lines.append(
            f"tail slopes: lower a={slopes[0]:.4f} upper a={slopes[1]:.4f}"
        )
    if hasattr(est, "model_"):
        bs = est.model_
        lines.append(
            f"upper tail line: slope={bs.params_upper.slope:.4f} "
            f"intercept={bs.params_upper.intercept:.4f}"
        )
        lines.append(
            f"lower tail line: slope={bs.params_lower.slope:.4f} "
            f"intercept={bs.params_lower.intercept:.4f}"
        )
    if hasattr(est, "n_sweeps_"):
        lines.append(f"backfitting sweeps: {est.n_sweeps_}")
    lines.append(f"model written to {args.model}")
    return lines


def _tail_line(name, transform) -> str:
    lo, up = transform.lower.params, transform.upper.params
    return (
        f"{name} tails: lower sigma={lo.sigma:.4g} gamma={lo.gamma:.4g}, "
        f"upper sigma={up.sigma:.4g} gamma={up.gamma:.4g}"
    )
