"""Versioned JSON persistence for fitted models.

The on-disk document is {"format": "progression-model", "version": 1,
"kind": <model kind>, "payload": {...}}.  Floats go through the JSON
text representation, which round-trips IEEE doubles exactly.  Unknown
formats, versions or kinds are rejected on load.
"""

from __future__ import annotations

import json
from dataclasses import asdict

import numpy as np

from .additive import AdditiveProgressionRegressor
from .exceptions import InputError
from .forest import (
    ForestConfig,
    ForestModel,
    ForestProgressionRegressor,
    LocalLinearForestBaseline,
    RandomForestBaseline,
    _Tree,
)
from .gpd import GpdParams
from .marginal import MarginalTransform, TailFit
from .parametric import (
    BothSidedProgression,
    ParametricProgressionRegressor,
    ProgressionParams,
)

_FORMAT = "progression-model"
_VERSION = 1


def save_model(model, path) -> None:
    """Serialize a fitted model or marginal transform to a JSON file."""
    kind, payload = _encode(model)
    doc = {"format": _FORMAT, "version": _VERSION, "kind": kind, "payload": payload}
    with open(path, "w") as fh:
        json.dump(doc, fh, separators=(",", ":"), allow_nan=False)


def load_model(path):
    """Load a model written by :func:`save_model`."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != _FORMAT:
        raise InputError(f"{path} is not a {_FORMAT} file")
    if doc.get("version") != _VERSION:
        raise InputError(
            f"unsupported model version {doc.get('version')!r}; expected {_VERSION}"
        )
    kind = doc.get("kind")
    decoder = _DECODERS.get(kind)
    if decoder is None:
        raise InputError(f"unknown model kind {kind!r}")
    return decoder(doc["payload"])


# --- encoders ---------------------------------------------------------------


def _encode(model):
    if isinstance(model, MarginalTransform):
        return "marginal-transform", _marginal_to_dict(model)
    if isinstance(model, ForestProgressionRegressor):
        return "progression-rf", _rf_progression_to_dict(model)
    if isinstance(model, ParametricProgressionRegressor):
        return "progression-parametric", _parametric_to_dict(model)
    if isinstance(model, AdditiveProgressionRegressor):
        return "progression-additive", _additive_to_dict(model)
    if isinstance(model, LocalLinearForestBaseline):
        return "baseline-llf", _baseline_to_dict(model)
    if isinstance(model, RandomForestBaseline):
        return "baseline-rf", _baseline_to_dict(model)
    raise InputError(f"cannot serialize objects of type {type(model).__name__}")


def _require_fitted(model, attr: str):
    if not hasattr(model, attr):
        raise InputError("only fitted models can be serialized")


def _gpd_to_dict(p: GpdParams) -> dict:
    return {"sigma": p.sigma, "gamma": p.gamma}


def _tail_to_dict(t: TailFit) -> dict:
    d = asdict(t)
    d["params"] = _gpd_to_dict(t.params)
    return d


def _marginal_to_dict(mt: MarginalTransform) -> dict:
    return {
        "sorted_sample": mt.sorted_sample.tolist(),
        "lower": _tail_to_dict(mt.lower),
        "upper": _tail_to_dict(mt.upper),
    }


def _tree_to_dict(tree: _Tree) -> dict:
    split = [
        None if l < 0 else s
        for s, l in zip(tree.split.tolist(), tree.left.tolist())
    ]
    return {
        "indices": tree.indices.tolist(),
        "split": split,
        "left": tree.left.tolist(),
        "right": tree.right.tolist(),
        "lo": tree.lo.tolist(),
        "hi": tree.hi.tolist(),
    }


def _forest_to_dict(fm: ForestModel) -> dict:
    return {
        "x": fm.x.tolist(),
        "y": fm.y.tolist(),
        "config": asdict(fm.config),
        "trees": [_tree_to_dict(t) for t in fm.trees],
    }


def _line_to_dict(p: ProgressionParams) -> dict:
    return {"slope": p.slope, "exponent": p.exponent, "intercept": p.intercept}


def _common_payload(model) -> dict:
    payload = {"params": model.get_params()}
    names = getattr(model, "feature_names_", None)
    if names is not None:
        payload["feature_names"] = list(names)
    return payload


def _rf_progression_to_dict(model: ForestProgressionRegressor) -> dict:
    _require_fitted(model, "forest_")
    payload = _common_payload(model)
    payload.update(
        k=model.k_,
        transform_x=_marginal_to_dict(model.transform_x_),
        transform_y=_marginal_to_dict(model.transform_y_),
        forest=_forest_to_dict(model.forest_),
    )
    return payload


def _baseline_to_dict(model: RandomForestBaseline) -> dict:
    _require_fitted(model, "forest_")
    payload = _common_payload(model)
    payload.update(forest=_forest_to_dict(model.forest_))
    return payload


def _parametric_to_dict(model: ParametricProgressionRegressor) -> dict:
    _require_fitted(model, "model_")
    bs = model.model_
    payload = _common_payload(model)
    payload.update(
        k=model.k_,
        split_point=bs.split_point,
        upper={
            "transform_x": _marginal_to_dict(bs.transform_x_upper),
            "transform_y": _marginal_to_dict(bs.transform_y_upper),
            "line": _line_to_dict(bs.params_upper),
        },
        lower={
            "transform_x": _marginal_to_dict(bs.transform_x_lower),
            "transform_y": _marginal_to_dict(bs.transform_y_lower),
            "line": _line_to_dict(bs.params_lower),
        },
        bulk=_baseline_to_dict(model.bulk_),
    )
    return payload


def _additive_to_dict(model: AdditiveProgressionRegressor) -> dict:
    _require_fitted(model, "smoothers_")
    payload = _common_payload(model)
    payload.update(
        alpha=model.alpha_,
        intercept_shift=model.intercept_shift_,
        centers=model.centers_.tolist(),
        fit_trace=model.fit_trace_,
        n_sweeps=model.n_sweeps_,
        components=[
            None if s is None else _rf_progression_to_dict(s)
            for s in model.smoothers_
        ],
    )
    return payload


# --- decoders ---------------------------------------------------------------


def _gpd_from_dict(d: dict) -> GpdParams:
    return GpdParams(sigma=float(d["sigma"]), gamma=float(d["gamma"]))


def _tail_from_dict(d: dict) -> TailFit:
    return TailFit(
        side=d["side"],
        threshold=float(d["threshold"]),
        k=int(d["k"]),
        n=int(d["n"]),
        n_exceedances=int(d["n_exceedances"]),
        weight=float(d["weight"]),
        params=_gpd_from_dict(d["params"]),
    )


def _marginal_from_dict(d: dict) -> MarginalTransform:
    return MarginalTransform(
        sorted_sample=np.asarray(d["sorted_sample"], dtype=np.float64),
        lower=_tail_from_dict(d["lower"]),
        upper=_tail_from_dict(d["upper"]),
    )


def _tree_from_dict(d: dict) -> _Tree:
    left = np.asarray(d["left"], dtype=np.int32)
    split = np.asarray(
        [np.nan if s is None else s for s in d["split"]], dtype=np.float64
    )
    return _Tree(
        indices=np.asarray(d["indices"], dtype=np.int64),
        split=split,
        left=left,
        right=np.asarray(d["right"], dtype=np.int32),
        lo=np.asarray(d["lo"], dtype=np.int32),
        hi=np.asarray(d["hi"], dtype=np.int32),
    )


def _forest_from_dict(d: dict) -> ForestModel:
    return ForestModel(
        x=np.asarray(d["x"], dtype=np.float64),
        y=np.asarray(d["y"], dtype=np.float64),
        config=ForestConfig(**d["config"]),
        trees=[_tree_from_dict(t) for t in d["trees"]],
    )


def _line_from_dict(d: dict) -> ProgressionParams:
    return ProgressionParams(
        slope=float(d["slope"]),
        exponent=float(d["exponent"]),
        intercept=float(d["intercept"]),
    )


def _restore_common(model, payload):
    if "feature_names" in payload:
        model.feature_names_ = list(payload["feature_names"])
    return model


def _rf_progression_from_dict(payload: dict) -> ForestProgressionRegressor:
    model = ForestProgressionRegressor(**payload["params"])
    model.k_ = int(payload["k"])
    model.transform_x_ = _marginal_from_dict(payload["transform_x"])
    model.transform_y_ = _marginal_from_dict(payload["transform_y"])
    model.forest_ = _forest_from_dict(payload["forest"])
    model.n_features_in_ = 1
    return _restore_common(model, payload)


def _baseline_rf_from_dict(payload: dict) -> RandomForestBaseline:
    model = RandomForestBaseline(**payload["params"])
    model.forest_ = _forest_from_dict(payload["forest"])
    model.n_features_in_ = 1
    return _restore_common(model, payload)


def _baseline_llf_from_dict(payload: dict) -> LocalLinearForestBaseline:
    model = LocalLinearForestBaseline(**payload["params"])
    model.forest_ = _forest_from_dict(payload["forest"])
    model.n_features_in_ = 1
    return _restore_common(model, payload)


def _parametric_from_dict(payload: dict) -> ParametricProgressionRegressor:
    model = ParametricProgressionRegressor(**payload["params"])
    model.k_ = int(payload["k"])
    model.bulk_ = _baseline_rf_from_dict(payload["bulk"])
    up, lo = payload["upper"], payload["lower"]
    model.model_ = BothSidedProgression(
        split_point=float(payload["split_point"]),
        transform_x_upper=_marginal_from_dict(up["transform_x"]),
        transform_y_upper=_marginal_from_dict(up["transform_y"]),
        params_upper=_line_from_dict(up["line"]),
        transform_x_lower=_marginal_from_dict(lo["transform_x"]),
        transform_y_lower=_marginal_from_dict(lo["transform_y"]),
        params_lower=_line_from_dict(lo["line"]),
        bulk_predict=model.bulk_.predict,
    )
    model.n_features_in_ = 1
    return _restore_common(model, payload)


def _additive_from_dict(payload: dict) -> AdditiveProgressionRegressor:
    model = AdditiveProgressionRegressor(**payload["params"])
    model.smoothers_ = [
        None if c is None else _rf_progression_from_dict(c)
        for c in payload["components"]
    ]
    model.alpha_ = float(payload["alpha"])
    model.intercept_shift_ = float(payload["intercept_shift"])
    model.centers_ = np.asarray(payload["centers"], dtype=np.float64)
    model.fit_trace_ = [float(v) for v in payload["fit_trace"]]
    model.n_sweeps_ = int(payload["n_sweeps"])
    model.n_features_in_ = len(model.smoothers_)
    return _restore_common(model, payload)


_DECODERS = {
    "marginal-transform": _marginal_from_dict,
    "progression-rf": _rf_progression_from_dict,
    "progression-parametric": _parametric_from_dict,
    "progression-additive": _additive_from_dict,
    "baseline-rf": _baseline_rf_from_dict,
    "baseline-llf": _baseline_llf_from_dict,
}
