"""Out-of-fold nuisance prediction with one independent task per fold and role.

For each fold, the outcome model and the treatment model are fit on the
fold's complement and predict the fold — two pure tasks per fold, all
2k submitted to the executor at once. Per-fold learner seeds derive from
(plan seed, fold, role), so the assembled predictions are bit-identical
for any worker count, including a strictly sequential run.
"""

from dataclasses import dataclass
from functools import partial

import numpy as np

from .data import Dataset
from .exceptions import ConfigError, DataError
from .folds import FoldPlan, make_folds
from .learners import LearnerSpec, fit, predict
from .runtime import Executor
from .seeding import derive_seed

__all__ = ["FoldPlan", "make_folds", "NuisancePredictions", "crossfit_predict"]

ROLE_Y = 0
ROLE_T = 1


@dataclass(frozen=True)
class NuisancePredictions:
    """Out-of-fold estimates of E[Y|X] and E[T|X], aligned with the data rows.

    Entry ``i`` comes from models trained with fold(i) held out; ``t_hat``
    is a propensity in [0, 1] when the treatment is discrete.
    """

    y_hat: np.ndarray
    t_hat: np.ndarray
    fold_plan: FoldPlan

    def __post_init__(self):
        y_hat = np.asarray(self.y_hat, dtype=np.float64)
        t_hat = np.asarray(self.t_hat, dtype=np.float64)
        n = self.fold_plan.n
        if y_hat.shape != (n,) or t_hat.shape != (n,):
            raise DataError("nuisance predictions must match the fold plan length")
        if not (np.isfinite(y_hat).all() and np.isfinite(t_hat).all()):
            raise DataError("non-finite nuisance predictions")
        object.__setattr__(self, "y_hat", y_hat)
        object.__setattr__(self, "t_hat", t_hat)
        self.y_hat.setflags(write=False)
        self.t_hat.setflags(write=False)


def _fit_predict_fold(x_train, target_train, x_test, spec: LearnerSpec, seed: int):
    model = fit(spec, x_train, target_train, seed)
    return predict(model, x_test)


def crossfit_predict(
    data: Dataset,
    y_spec: LearnerSpec,
    t_spec: LearnerSpec,
    plan: FoldPlan,
    executor: Executor,
) -> NuisancePredictions:
    """Cross-fit both nuisance models and assemble out-of-fold predictions."""
    if plan.n != data.n:
        raise ConfigError(f"fold plan covers {plan.n} rows, dataset has {data.n}")
    if t_spec.is_classifier != data.discrete_treatment:
        raise ConfigError(
            "treatment model must be a classifier exactly when the treatment is discrete"
        )
    if y_spec.is_classifier:
        raise ConfigError("outcome model must be a regressor")

    folds = [plan.fold_indices(j) for j in range(plan.k)]
    complements = [np.flatnonzero(plan.assignment != j) for j in range(plan.k)]
    if data.discrete_treatment:
        for j, comp in enumerate(complements):
            t_comp = data.t[comp]
            if t_comp.min() == t_comp.max():
                raise DataError(
                    f"fold without treatment variation: training complement of fold {j} "
                    "contains a single treatment value"
                )

    tasks = []
    for j, (test, comp) in enumerate(zip(folds, complements)):
        x_comp, x_test = data.x[comp], data.x[test]
        tasks.append(
            partial(
                _fit_predict_fold,
                x_comp,
                data.y[comp],
                x_test,
                y_spec,
                derive_seed(plan.seed, j, ROLE_Y),
            )
        )
        tasks.append(
            partial(
                _fit_predict_fold,
                x_comp,
                data.t[comp],
                x_test,
                t_spec,
                derive_seed(plan.seed, j, ROLE_T),
            )
        )
    results = executor.submit_all(tasks)

    y_hat = np.empty(data.n, dtype=np.float64)
    t_hat = np.empty(data.n, dtype=np.float64)
    for j, test in enumerate(folds):
        y_hat[test] = results[2 * j]
        t_hat[test] = results[2 * j + 1]
    return NuisancePredictions(y_hat=y_hat, t_hat=t_hat, fold_plan=plan)
