"""Binary classifiers behind a single fit / predict / decision_score contract.

Labels are always +1 (active) and -1 (inactive).  ``predict`` is defined as
``+1 if decision_score >= 0 else -1`` for every family, so score ties go
to +1.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .mlp import MLP
from .naive_bayes import GaussianNaiveBayes
from .svm import LinearSVM
from .trees import GradientBoosting, RandomForest, gini_impurity

FAMILIES = ("naive_bayes", "svm", "mlp", "random_forest", "gradient_boosting")

DEFAULT_HYPERPARAMETERS: dict[str, dict[str, Any]] = {
    "naive_bayes": {"var_floor": 1e-9},
    "svm": {"l2": 1e-3, "iterations": 1000, "step": 1.0},
    "mlp": {"hidden": 64, "epochs": 200, "step": 0.01, "batch_size": 32},
    "random_forest": {"n_trees": 300, "max_features": "sqrt", "max_depth": None, "min_samples_leaf": 1},
    "gradient_boosting": {"n_rounds": 100, "max_depth": 3, "learning_rate": 0.1},
}

# families whose inputs are standardised inside cross-validation
NEEDS_SCALING = frozenset({"svm", "mlp"})

_CLASSES = {
    "naive_bayes": GaussianNaiveBayes,
    "svm": LinearSVM,
    "mlp": MLP,
    "random_forest": RandomForest,
    "gradient_boosting": GradientBoosting,
}

MODEL_FORMAT = "churnlag-model"
MODEL_FORMAT_VERSION = 1


class ModelError(ValueError):
    pass


class DegenerateTrainingError(ModelError):
    pass


class ShapeError(ModelError):
    pass


def _validate(family: str, hp: dict) -> None:
    positive_int = {
        "svm": ("iterations",),
        "mlp": ("hidden", "epochs", "batch_size"),
        "random_forest": ("n_trees", "min_samples_leaf"),
        "gradient_boosting": ("n_rounds", "max_depth"),
    }.get(family, ())
    positive_real = {
        "naive_bayes": ("var_floor",),
        "svm": ("l2", "step"),
        "mlp": ("step",),
        "gradient_boosting": ("learning_rate",),
    }.get(family, ())
    for key in positive_int:
        v = hp[key]
        if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 1:
            raise ModelError(f"{family}.{key} must be an integer >= 1, got {v!r}")
    for key in positive_real:
        if not float(hp[key]) > 0:
            raise ModelError(f"{family}.{key} must be > 0, got {hp[key]!r}")
    if family == "random_forest":
        depth = hp["max_depth"]
        if depth is not None and depth < 1:
            raise ModelError("random_forest.max_depth must be None or >= 1")
        mf = hp["max_features"]
        if not (mf in ("sqrt", "log2") or (isinstance(mf, int) and mf >= 1)):
            raise ModelError(f"random_forest.max_features invalid: {mf!r}")


@dataclass(frozen=True)
class ClassifierSpec:
    family: str
    hyperparameters: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ModelError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        unknown = set(self.hyperparameters) - set(DEFAULT_HYPERPARAMETERS[self.family])
        if unknown:
            raise ModelError(f"unknown {self.family} hyperparameters: {sorted(unknown)}")
        merged = {**DEFAULT_HYPERPARAMETERS[self.family], **self.hyperparameters}
        _validate(self.family, merged)
        object.__setattr__(self, "hyperparameters", merged)

    def with_seed(self, seed: int) -> "ClassifierSpec":
        return ClassifierSpec(self.family, dict(self.hyperparameters), seed)

    @property
    def family_key(self) -> int:
        """Stable integer for seed derivation."""
        return zlib.crc32(self.family.encode())


@dataclass(frozen=True, eq=False)
class ClassifierModel:
    spec: ClassifierSpec
    estimator: Any
    n_features: int
    oob_error: float | None = None


def _check_rows(X, n_features: int | None = None) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1 and X.size == 0:
        X = X.reshape(0, n_features or 0)
    if X.ndim != 2:
        raise ShapeError(f"expected a 2-D row matrix, got shape {X.shape}")
    if n_features is not None and X.shape[1] != n_features:
        raise ShapeError(f"rows have width {X.shape[1]}, model was trained on width {n_features}")
    if not np.all(np.isfinite(X)):
        raise ModelError("non-finite feature values")
    return X


def fit(spec: ClassifierSpec, X, y) -> ClassifierModel:
    X = _check_rows(X)
    y = np.asarray(y)
    if X.shape[0] != len(y):
        raise ShapeError("row count and label count differ")
    if not np.all(np.isin(y, (-1, 1))):
        raise ModelError("labels must be +1 or -1")
    if X.shape[0] < 2 or len(np.unique(y)) < 2:
        raise DegenerateTrainingError("training data must contain both classes")
    y = y.astype(np.int64)
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    est = _CLASSES[spec.family](**spec.hyperparameters).fit(X, y, rng)
    return ClassifierModel(spec, est, X.shape[1], getattr(est, "oob_error", None))


def decision_score(model: ClassifierModel, rows) -> np.ndarray:
    X = _check_rows(rows, model.n_features)
    if X.shape[0] == 0:
        return np.empty(0)
    return np.asarray(model.estimator.decision_score(X), dtype=np.float64)


def predict(model: ClassifierModel, rows) -> np.ndarray:
    return np.where(decision_score(model, rows) >= 0, 1, -1).astype(np.int64)


def accuracy(model: ClassifierModel, X, y) -> float:
    return float(np.mean(predict(model, X) == np.asarray(y)))


def save_model(model: ClassifierModel, path) -> None:
    """Write a self-describing ``.npz``: a JSON header plus named arrays."""
    state = {k: np.asarray(v) for k, v in model.estimator.state().items()}
    header = {
        "format": MODEL_FORMAT,
        "version": MODEL_FORMAT_VERSION,
        "family": model.spec.family,
        "hyperparameters": model.spec.hyperparameters,
        "seed": model.spec.seed,
        "n_features": model.n_features,
        "oob_error": model.oob_error,
        "arrays": {k: {"dtype": str(v.dtype), "shape": list(v.shape)} for k, v in state.items()},
    }
    with open(path, "wb") as fh:
        np.savez(fh, __header__=np.array(json.dumps(header, sort_keys=True)), **state)


def load_model(path) -> ClassifierModel:
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(str(data["__header__"]))
        if header.get("format") != MODEL_FORMAT:
            raise ModelError(f"{path}: not a {MODEL_FORMAT} file")
        if header.get("version") != MODEL_FORMAT_VERSION:
            raise ModelError(f"{path}: unsupported model format version {header.get('version')}")
        state = {k: data[k] for k in header["arrays"]}
    spec = ClassifierSpec(header["family"], header["hyperparameters"], header["seed"])
    est = _CLASSES[spec.family](**spec.hyperparameters).load_state(state)
    return ClassifierModel(spec, est, header["n_features"], header["oob_error"])


__all__ = [
    "FAMILIES", "DEFAULT_HYPERPARAMETERS", "NEEDS_SCALING", "ClassifierSpec", "ClassifierModel",
    "ModelError", "DegenerateTrainingError", "ShapeError", "fit", "predict", "decision_score",
    "accuracy", "save_model", "load_model", "gini_impurity",
]
