"""Self-contained nuisance learners with a uniform fit/predict contract.

Four kinds are available: ``ridge`` and ``random_forest_reg`` for
regression, ``logistic`` and ``random_forest_clf`` for probabilistic
binary classification. Fitting is deterministic given the seed, and
fitted models are immutable, picklable, and serializable to a versioned
binary blob.
"""

import io
import json
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import ConfigError, DataError
from ..folds import make_folds
from ..seeding import derive_seed
from . import forest as _forest
from . import linear as _linear

__all__ = [
    "LEARNER_KINDS",
    "HyperParams",
    "LearnerSpec",
    "FittedModel",
    "fit",
    "predict",
    "cv_score",
    "loss_kind",
    "serialize_model",
    "deserialize_model",
]

LEARNER_KINDS = ("ridge", "logistic", "random_forest_reg", "random_forest_clf")
_CLASSIFIER_KINDS = frozenset({"logistic", "random_forest_clf"})
_BLOB_VERSION = 1


@dataclass(frozen=True)
class HyperParams:
    """Hyperparameters for all learner kinds; each kind reads its own.

    ``max_features`` is the fraction of features tried per split
    (``ceil(max_features * d)``, at least one).
    """

    ridge_lambda: float = 1e-3
    logistic_l2: float = 1e-3
    logistic_max_iter: int = 50
    n_trees: int = 100
    max_depth: int = 8
    min_leaf: int = 5
    max_features: float = 1.0 / 3.0
    bootstrap_seed: int = 0

    def __post_init__(self):
        if self.ridge_lambda < 0:
            raise ConfigError(f"ridge_lambda must be >= 0, got {self.ridge_lambda}")
        if self.logistic_l2 < 0:
            raise ConfigError(f"logistic_l2 must be >= 0, got {self.logistic_l2}")
        if self.logistic_max_iter < 1:
            raise ConfigError(
                f"logistic_max_iter must be positive, got {self.logistic_max_iter}"
            )
        if self.n_trees < 1:
            raise ConfigError(f"n_trees must be positive, got {self.n_trees}")
        if self.max_depth < 0:
            raise ConfigError(f"max_depth must be >= 0, got {self.max_depth}")
        if self.min_leaf < 1:
            raise ConfigError(f"min_leaf must be positive, got {self.min_leaf}")
        if not 0.0 < self.max_features <= 1.0:
            raise ConfigError(
                f"max_features must lie in (0, 1], got {self.max_features}"
            )
        if self.bootstrap_seed < 0:
            raise ConfigError(
                f"bootstrap_seed must be non-negative, got {self.bootstrap_seed}"
            )


@dataclass(frozen=True)
class LearnerSpec:
    kind: str
    params: HyperParams = field(default_factory=HyperParams)

    def __post_init__(self):
        if self.kind not in LEARNER_KINDS:
            raise ConfigError(
                f"unknown learner kind {self.kind!r}; choose from {LEARNER_KINDS}"
            )

    @property
    def is_classifier(self) -> bool:
        return self.kind in _CLASSIFIER_KINDS


@dataclass(frozen=True)
class FittedModel:
    """Opaque fitted learner state; ``predict`` rejects width mismatches."""

    kind: str
    d_in: int
    coef: np.ndarray | None = None
    trees: tuple | None = None


def _check_xy(x: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64).ravel()
    if x.ndim != 2:
        raise DataError(f"x must be 2-d, got ndim={x.ndim}")
    if x.shape[0] != target.shape[0]:
        raise DataError(
            f"row mismatch: x has {x.shape[0]} rows, target has {target.shape[0]}"
        )
    if x.shape[0] < 2:
        raise DataError("need at least 2 training rows")
    return x, target


def fit(spec: LearnerSpec, x: np.ndarray, target: np.ndarray, seed: int = 0) -> FittedModel:
    """Train a learner of the given kind; deterministic given ``seed``."""
    x, target = _check_xy(x, target)
    p = spec.params
    if spec.is_classifier and not np.isin(target, (0.0, 1.0)).all():
        raise DataError(f"{spec.kind} targets must take values in {{0, 1}}")
    if spec.kind == "ridge":
        return FittedModel("ridge", x.shape[1], coef=_linear.fit_ridge(x, target, p.ridge_lambda))
    if spec.kind == "logistic":
        w = _linear.fit_logistic(x, target, p.logistic_l2, p.logistic_max_iter)
        return FittedModel("logistic", x.shape[1], coef=w)
    trees = _forest.fit_forest(
        x,
        target,
        n_trees=p.n_trees,
        max_depth=p.max_depth,
        min_leaf=p.min_leaf,
        max_features=p.max_features,
        seed=seed,
        bootstrap_seed=p.bootstrap_seed,
    )
    return FittedModel(spec.kind, x.shape[1], trees=tuple(trees))


def predict(model: FittedModel, x: np.ndarray) -> np.ndarray:
    """Predict outcomes (regression) or class-1 probabilities (classification)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise DataError(f"x must be 2-d, got ndim={x.ndim}")
    if x.shape[1] != model.d_in:
        raise DataError(
            f"input width {x.shape[1]} does not match model width {model.d_in}"
        )
    if model.kind == "ridge":
        return _linear.predict_ridge(model.coef, x)
    if model.kind == "logistic":
        return _linear.predict_logistic(model.coef, x)
    return _forest.predict_forest(model.trees, x)


def loss_kind(spec: LearnerSpec) -> str:
    """Out-of-fold loss used for this learner: MSE, or Brier for classifiers."""
    return "brier" if spec.is_classifier else "mse"


def cv_score(
    spec: LearnerSpec, x: np.ndarray, target: np.ndarray, k: int, seed: int = 0
) -> float:
    """Mean out-of-fold loss over a seeded k-fold split.

    Squared-error loss in both cases (the Brier score is the squared
    error of a predicted probability), averaged over all n held-out
    predictions.
    """
    x, target = _check_xy(x, target)
    plan = make_folds(x.shape[0], k, seed)
    total = 0.0
    for fold in range(plan.k):
        test = plan.assignment == fold
        train = ~test
        model = fit(spec, x[train], target[train], derive_seed(seed, fold))
        pred = predict(model, x[test])
        err = pred - target[test]
        total += float(err @ err)
    return total / x.shape[0]


def serialize_model(model: FittedModel) -> bytes:
    """Pack a fitted model into a self-describing versioned binary blob."""
    header = {"format_version": _BLOB_VERSION, "kind": model.kind, "d_in": model.d_in}
    arrays: dict[str, np.ndarray] = {}
    if model.coef is not None:
        arrays["coef"] = model.coef
    if model.trees is not None:
        header["n_trees"] = len(model.trees)
        for i, tree in enumerate(model.trees):
            arrays[f"tree{i}_feature"] = tree.feature
            arrays[f"tree{i}_threshold"] = tree.threshold
            arrays[f"tree{i}_left"] = tree.left
            arrays[f"tree{i}_right"] = tree.right
            arrays[f"tree{i}_value"] = tree.value
    buf = io.BytesIO()
    np.savez(buf, header=np.frombuffer(json.dumps(header).encode(), dtype=np.uint8), **arrays)
    return buf.getvalue()


def deserialize_model(blob: bytes) -> FittedModel:
    with np.load(io.BytesIO(blob)) as payload:
        header = json.loads(bytes(payload["header"]).decode())
        if header["format_version"] != _BLOB_VERSION:
            raise ConfigError(
                f"unsupported model blob version {header['format_version']}"
            )
        kind, d_in = header["kind"], int(header["d_in"])
        if "n_trees" in header:
            trees = tuple(
                _forest.Tree(
                    feature=payload[f"tree{i}_feature"],
                    threshold=payload[f"tree{i}_threshold"],
                    left=payload[f"tree{i}_left"],
                    right=payload[f"tree{i}_right"],
                    value=payload[f"tree{i}_value"],
                )
                for i in range(header["n_trees"])
            )
            return FittedModel(kind, d_in, trees=trees)
        return FittedModel(kind, d_in, coef=payload["coef"])
