"""Probability-scoring learners with fixed, overridable hyperparameters.

All four kinds train on an already-encoded numeric matrix and return scores
in [0, 1].  Training is deterministic given (X, y, seed); the tree kinds are
bitwise reproducible.  A single-class target yields a degenerate constant
model plus a warning rather than an exception, so sweeps keep running.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..errors import ConfigError, DataError
from . import linear, trees

__all__ = [
    "MODEL_KINDS",
    "DEFAULT_HYPERPARAMETERS",
    "ModelSpec",
    "TrainedModel",
    "train",
    "predict_scores",
    "to_debug_dict",
]

MODEL_KINDS = ("logreg", "elasticnet", "rf", "gbm")

MIN_TRAIN_ROWS = 10

DEFAULT_HYPERPARAMETERS: dict[str, dict] = {
    "logreg": {"l2": 1.0, "tol": 1e-6, "max_iter": 1000},
    "elasticnet": {"alpha": 1e-4, "l1_ratio": 0.5, "tol": 1e-6, "max_iter": 10000},
    "rf": {
        "n_trees": 100,
        "max_depth": None,
        "min_leaf": 1,
        "max_features": "sqrt",
        "bootstrap": True,
    },
    "gbm": {"n_stages": 100, "learning_rate": 0.1, "max_depth": 3, "min_leaf": 1},
}


@dataclass(frozen=True)
class ModelSpec:
    """Model kind plus fully-resolved hyperparameters."""

    kind: str
    params: Mapping[str, object]

    @classmethod
    def resolve(cls, kind: str, overrides: Mapping[str, object] | None = None) -> "ModelSpec":
        if kind not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind {kind!r}")
        params = dict(DEFAULT_HYPERPARAMETERS[kind])
        for key, value in (overrides or {}).items():
            if key not in params:
                raise ConfigError(f"model {kind!r}: unknown hyperparameter {key!r}")
            params[key] = value
        return cls(kind=kind, params=params)


@dataclass(frozen=True)
class TrainedModel:
    kind: str
    feature_names: tuple[str, ...]
    payload: object
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class _Constant:
    rate: float


@dataclass(frozen=True)
class _Linear:
    intercept: float
    coef: np.ndarray
    iterations: int
    converged: bool


@dataclass(frozen=True)
class _Forest:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    node_counts: np.ndarray


@dataclass(frozen=True)
class _Boosted:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    node_counts: np.ndarray
    f0: float
    learning_rate: float


def _check_training_inputs(X: np.ndarray, y: np.ndarray, feature_names: Sequence[str]):
    if X.ndim != 2:
        raise DataError("X must be a 2-d matrix")
    if X.shape[0] != y.shape[0]:
        raise DataError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
    if X.shape[0] < MIN_TRAIN_ROWS:
        raise DataError(f"training needs at least {MIN_TRAIN_ROWS} rows, got {X.shape[0]}")
    if X.shape[1] < 1:
        raise DataError("training needs at least one feature column")
    if len(feature_names) != X.shape[1]:
        raise DataError("feature_names length does not match X columns")
    if not np.all(np.isfinite(X)):
        raise DataError("X contains non-finite values")
    bad = ~np.isin(y, (0.0, 1.0))
    if bad.any():
        raise DataError("y must be binary 0/1")


def _tree_seeds(seed: int, count: int) -> np.ndarray:
    return np.random.SeedSequence(seed).generate_state(count).astype(np.int64)


def train(
    spec: ModelSpec,
    X: np.ndarray,
    y: np.ndarray,
    seed: int,
    feature_names: Sequence[str],
) -> TrainedModel:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    names = tuple(feature_names)
    _check_training_inputs(X, y, names)
    warnings: list[str] = []

    rate = float(np.mean(y))
    if rate == 0.0 or rate == 1.0:
        warnings.append("degenerate-labels: single-class training target")
        return TrainedModel(spec.kind, names, _Constant(rate), tuple(warnings))

    params = spec.params
    if spec.kind == "logreg":
        fitted, iters, converged = linear.fit_logreg(
            X, y, l2=float(params["l2"]), tol=float(params["tol"]),
            max_iter=int(params["max_iter"]),
        )
        if not converged:
            warnings.append(f"logreg: iteration cap {params['max_iter']} reached")
        payload = _Linear(float(fitted[0]), fitted[1:].copy(), iters, converged)
    elif spec.kind == "elasticnet":
        fitted, iters, converged = linear.fit_elasticnet(
            X, y, alpha=float(params["alpha"]), l1_ratio=float(params["l1_ratio"]),
            tol=float(params["tol"]), max_iter=int(params["max_iter"]),
        )
        if not converged:
            warnings.append(f"elasticnet: iteration cap {params['max_iter']} reached")
        payload = _Linear(float(fitted[0]), fitted[1:].copy(), iters, converged)
    elif spec.kind == "rf":
        n_trees = int(params["n_trees"])
        if n_trees < 1:
            raise ConfigError("rf needs n_trees >= 1")
        raw_depth = params["max_depth"]
        max_depth = -1 if raw_depth is None else int(raw_depth)
        mf = params["max_features"]
        if mf == "sqrt":
            max_features = max(1, int(round(np.sqrt(X.shape[1]))))
        else:
            max_features = max(1, min(int(mf), X.shape[1]))
        feature, threshold, left, right, value, counts = trees.fit_forest(
            X, y, n_trees, max_depth, int(params["min_leaf"]), max_features,
            bool(params["bootstrap"]), _tree_seeds(seed, n_trees),
        )
        payload = _Forest(feature, threshold, left, right, value, counts)
    elif spec.kind == "gbm":
        n_stages = int(params["n_stages"])
        if n_stages < 0:
            raise ConfigError("gbm needs n_stages >= 0")
        clipped = min(max(rate, 1e-12), 1.0 - 1e-12)
        f0 = float(np.log(clipped / (1.0 - clipped)))
        if n_stages == 0:
            feature = np.full((0, 1), -1, np.int64)
            threshold = np.zeros((0, 1))
            left = np.full((0, 1), -1, np.int64)
            right = np.full((0, 1), -1, np.int64)
            value = np.zeros((0, 1))
            counts = np.zeros(0, np.int64)
        else:
            feature, threshold, left, right, value, counts = trees.fit_boosted(
                X, y, n_stages, float(params["learning_rate"]),
                int(params["max_depth"]), int(params["min_leaf"]), f0,
            )
        payload = _Boosted(
            feature, threshold, left, right, value, counts, f0,
            float(params["learning_rate"]),
        )
    else:
        raise ConfigError(f"unknown model kind {spec.kind!r}")

    return TrainedModel(spec.kind, names, payload, tuple(warnings))


def predict_scores(
    model: TrainedModel, X: np.ndarray, feature_names: Sequence[str]
) -> np.ndarray:
    """Scores in [0, 1]; the columns of X must match the bound feature list."""
    if tuple(feature_names) != model.feature_names:
        raise DataError(
            f"feature mismatch: model was fit on {list(model.feature_names)}, "
            f"got {list(feature_names)}"
        )
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != len(model.feature_names):
        raise DataError("X shape does not match the bound feature list")

    payload = model.payload
    if isinstance(payload, _Constant):
        return np.full(X.shape[0], payload.rate)
    if isinstance(payload, _Linear):
        return linear.sigmoid(payload.intercept + X @ payload.coef)
    if isinstance(payload, _Forest):
        return trees.forest_predict(
            X, payload.feature, payload.threshold, payload.left, payload.right,
            payload.value,
        )
    if isinstance(payload, _Boosted):
        if payload.feature.shape[0] == 0:
            raw = np.full(X.shape[0], payload.f0)
        else:
            raw = trees.boosted_raw_predict(
                X, payload.feature, payload.threshold, payload.left, payload.right,
                payload.value, payload.f0, payload.learning_rate,
            )
        return linear.sigmoid(raw)
    raise DataError(f"unknown model payload {type(payload).__name__}")


def to_debug_dict(model: TrainedModel) -> dict:
    """JSON-able snapshot for inspection; not a stability contract."""
    payload = model.payload
    out: dict = {
        "kind": model.kind,
        "feature_names": list(model.feature_names),
        "warnings": list(model.warnings),
    }
    if isinstance(payload, _Constant):
        out["constant_rate"] = payload.rate
    elif isinstance(payload, _Linear):
        out["intercept"] = payload.intercept
        out["coef"] = [float(v) for v in payload.coef]
        out["iterations"] = payload.iterations
        out["converged"] = payload.converged
    elif isinstance(payload, (_Forest, _Boosted)):
        out["n_trees"] = int(payload.feature.shape[0])
        out["node_counts"] = [int(c) for c in payload.node_counts]
        if isinstance(payload, _Boosted):
            out["f0"] = payload.f0
            out["learning_rate"] = payload.learning_rate
    return out
