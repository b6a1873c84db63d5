"""Parallel grid search over learner specs.

Each (candidate, fold) pair is one pure task, so a grid of c candidates
scored with k folds submits exactly c * k tasks. Scores are mean
out-of-fold squared error (the Brier score for classifiers), pooled over
all held-out rows, and are identical to a sequential recomputation for
any worker count. A grid can stand in for a plain learner spec inside
the estimation pipeline; it is resolved once on the full sample before
cross-fitting begins.
"""

import time
from dataclasses import dataclass
from functools import partial

import numpy as np

from .exceptions import ConfigError, DataError
from .folds import make_folds
from .learners import LearnerSpec, fit, predict
from .runtime import Executor
from .seeding import derive_seed

__all__ = ["ParamGrid", "TuneResult", "grid_search", "resolve_tuned"]


@dataclass(frozen=True)
class ParamGrid:
    """Candidate learner specs scored by seeded k-fold cross-validation."""

    candidates: tuple[LearnerSpec, ...]
    cv_k: int = 5
    seed: int = 0

    def __post_init__(self):
        cands = tuple(self.candidates)
        if not cands:
            raise ConfigError("candidate list must not be empty")
        if len({c.is_classifier for c in cands}) != 1:
            raise ConfigError(
                "candidates must all be regressors or all be classifiers"
            )
        if self.cv_k < 2:
            raise ConfigError(f"cv_k must be >= 2, got {self.cv_k}")
        object.__setattr__(self, "candidates", cands)

    @property
    def is_classifier(self) -> bool:
        return self.candidates[0].is_classifier


@dataclass(frozen=True)
class TuneResult:
    best: LearnerSpec
    scores: tuple[tuple[LearnerSpec, float], ...]  # ascending by score
    wall_time: float


def _score_pair(x_train, target_train, x_test, target_test, spec, seed):
    model = fit(spec, x_train, target_train, seed)
    err = predict(model, x_test) - target_test
    return float(err @ err), int(target_test.shape[0])


def grid_search(
    x: np.ndarray, target: np.ndarray, grid: ParamGrid, executor: Executor
) -> TuneResult:
    """Score every candidate out of fold and return the best one.

    Ties go to the earlier candidate in the grid's list order.
    """
    t_start = time.perf_counter()
    x = np.asarray(x, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64).ravel()
    if x.shape[0] != target.shape[0]:
        raise DataError("x and target must share the same row count")
    plan = make_folds(x.shape[0], grid.cv_k, grid.seed)
    splits = [
        (np.flatnonzero(plan.assignment != j), plan.fold_indices(j))
        for j in range(plan.k)
    ]
    tasks = []
    for ci, cand in enumerate(grid.candidates):
        for j, (train, test) in enumerate(splits):
            tasks.append(
                partial(
                    _score_pair,
                    x[train],
                    target[train],
                    x[test],
                    target[test],
                    cand,
                    derive_seed(grid.seed, ci, j),
                )
            )
    results = executor.submit_all(tasks)

    k = plan.k
    scores: list[float] = []
    for ci in range(len(grid.candidates)):
        chunk = results[ci * k : (ci + 1) * k]
        total = sum(loss for loss, _ in chunk)
        count = sum(c for _, c in chunk)
        scores.append(total / count)

    best_idx = 0
    for ci in range(1, len(scores)):
        if scores[ci] < scores[best_idx]:
            best_idx = ci
    ranked = sorted(
        zip(grid.candidates, scores), key=lambda pair: pair[1]
    )  # stable: ties keep list order
    return TuneResult(
        best=grid.candidates[best_idx],
        scores=tuple(ranked),
        wall_time=time.perf_counter() - t_start,
    )


def resolve_tuned(
    spec_or_grid: LearnerSpec | ParamGrid,
    x: np.ndarray,
    target: np.ndarray,
    executor: Executor,
) -> LearnerSpec:
    """Return a plain spec as-is; resolve a grid by searching on (x, target)."""
    if isinstance(spec_or_grid, LearnerSpec):
        return spec_or_grid
    if isinstance(spec_or_grid, ParamGrid):
        return grid_search(x, target, spec_or_grid, executor).best
    raise ConfigError(
        f"expected a LearnerSpec or ParamGrid, got {type(spec_or_grid).__name__}"
    )
