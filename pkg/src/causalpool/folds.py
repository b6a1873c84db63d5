"""Seeded k-fold partitions."""

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError

__all__ = ["FoldPlan", "make_folds"]


@dataclass(frozen=True)
class FoldPlan:
    """Assignment of every row to exactly one of ``k`` folds."""

    k: int
    assignment: np.ndarray
    seed: int

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=np.int64)
        object.__setattr__(self, "assignment", a)
        counts = np.bincount(a, minlength=self.k)
        if counts.sum() != a.shape[0] or (a < 0).any() or (a >= self.k).any():
            raise ConfigError("assignment must map every row to a fold in [0, k)")
        if counts.max() - counts.min() > 1:
            raise ConfigError("fold sizes may differ by at most 1")
        self.assignment.setflags(write=False)

    @property
    def n(self) -> int:
        return self.assignment.shape[0]

    def fold_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)


def make_folds(n: int, k: int, seed: int = 0) -> FoldPlan:
    """Shuffle ``[0, n)`` with the seed and deal rows round-robin into k folds."""
    if not 2 <= k <= n:
        raise ConfigError(f"fold count must satisfy 2 <= k <= n, got k={k}, n={n}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    perm = rng.permutation(n)
    assignment = np.empty(n, dtype=np.int64)
    assignment[perm] = np.arange(n) % k
    return FoldPlan(k=k, assignment=assignment, seed=seed)
