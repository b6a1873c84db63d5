"""Refutation tests and overlap diagnostics for a fitted effect estimate.

Each refuter perturbs the data in a way whose effect on a sound estimate
is known — permuting the treatment should null the effect, an irrelevant
random covariate should not move it, subsamples should scatter around it
— re-estimates once per replication (each replication is one executor
task, run with a sequential inner executor), and reports a pass/fail
verdict against a documented rule. Failing a refutation is a result, not
an error.
"""

from dataclasses import dataclass, replace
from functools import partial

import numpy as np

from .crossfit import NuisancePredictions
from .data import Dataset
from .dml import DmlSpec, estimate
from .exceptions import ConfigError
from .runtime import Executor
from .seeding import derive_seed

__all__ = [
    "RefutationReport",
    "OverlapReport",
    "placebo_treatment",
    "random_common_cause",
    "subset_refuter",
    "overlap_diagnostic",
]

# Pass thresholds; see each refuter's rule.
SE_MULTIPLE = 2.0
RELATIVE_DRIFT = 0.05


@dataclass(frozen=True)
class RefutationReport:
    test_name: str
    original_ate: float
    refuted_ate: float
    refuted_se: float
    n_runs: int
    passed: bool
    detail: tuple[dict, ...]

    def to_dict(self) -> dict:
        return {
            "test_name": self.test_name,
            "original_ate": self.original_ate,
            "refuted_ate": self.refuted_ate,
            "refuted_se": self.refuted_se,
            "n_runs": self.n_runs,
            "passed": self.passed,
            "detail": list(self.detail),
        }


@dataclass(frozen=True)
class OverlapReport:
    """Summary of out-of-fold propensities against an eta-strengthened bound."""

    p_min: float
    p_max: float
    frac_flagged: float
    eta: float

    def to_dict(self) -> dict:
        return {
            "p_min": self.p_min,
            "p_max": self.p_max,
            "frac_flagged": self.frac_flagged,
            "eta": self.eta,
        }


def _estimate_task(data: Dataset, spec: DmlSpec) -> tuple[float, float]:
    est = estimate(data, spec, Executor(workers=1))
    return est.ate, est.ate_se


def _run_replications(datasets, spec, executor) -> tuple[np.ndarray, np.ndarray]:
    tasks = [partial(_estimate_task, d, spec) for d in datasets]
    results = executor.submit_all(tasks)
    ates = np.array([r[0] for r in results])
    ses = np.array([r[1] for r in results])
    return ates, ses


def _combined_se(ates: np.ndarray, ses: np.ndarray) -> float:
    """Spread of the replication mean: between-run variance plus mean
    within-run sampling variance, divided by the number of runs."""
    n_runs = ates.shape[0]
    between = float(np.var(ates, ddof=1)) if n_runs > 1 else 0.0
    within = float(np.mean(ses**2))
    return float(np.sqrt((between + within) / n_runs))


def _check_runs(n_runs: int) -> None:
    if n_runs < 1:
        raise ConfigError(f"n_runs must be >= 1, got {n_runs}")


def placebo_treatment(
    data: Dataset, spec: DmlSpec, executor: Executor, n_runs: int = 5, seed: int = 0
) -> RefutationReport:
    """Replace the treatment with seeded permutations of itself.

    Permutation severs any treatment-outcome link, so the refuted
    estimate should be statistically indistinguishable from zero:
    passes iff |mean refuted ate| <= 2 * refuted se.
    """
    _check_runs(n_runs)
    original = estimate(data, spec, executor)
    datasets = []
    for r in range(n_runs):
        rng = np.random.default_rng(derive_seed(seed, r))
        t_perm = data.t[rng.permutation(data.n)]
        datasets.append(
            Dataset(
                x=data.x,
                t=t_perm,
                y=data.y,
                discrete_treatment=data.discrete_treatment,
                feature_names=data.feature_names,
            )
        )
    ates, ses = _run_replications(datasets, spec, executor)
    refuted_ate = float(ates.mean())
    refuted_se = _combined_se(ates, ses)
    return RefutationReport(
        test_name="placebo_treatment",
        original_ate=original.ate,
        refuted_ate=refuted_ate,
        refuted_se=refuted_se,
        n_runs=n_runs,
        passed=bool(abs(refuted_ate) <= SE_MULTIPLE * refuted_se),
        detail=tuple(
            {"run": r, "ate": float(a), "ate_se": float(s)}
            for r, (a, s) in enumerate(zip(ates, ses))
        ),
    )


def random_common_cause(
    data: Dataset, spec: DmlSpec, executor: Executor, n_runs: int = 5, seed: int = 0
) -> RefutationReport:
    """Append an independent standard-normal covariate per replication.

    An irrelevant covariate should not move a consistent estimate:
    passes iff |refuted ate - original ate| <= max(5% of |original|,
    2 * refuted se).
    """
    _check_runs(n_runs)
    original = estimate(data, spec, executor)
    datasets = []
    for r in range(n_runs):
        rng = np.random.default_rng(derive_seed(seed, r))
        extra = rng.standard_normal(data.n)
        datasets.append(
            Dataset(
                x=np.column_stack([data.x, extra]),
                t=data.t,
                y=data.y,
                discrete_treatment=data.discrete_treatment,
            )
        )
    ates, ses = _run_replications(datasets, spec, executor)
    refuted_ate = float(ates.mean())
    refuted_se = _combined_se(ates, ses)
    drift = abs(refuted_ate - original.ate)
    tolerance = max(RELATIVE_DRIFT * abs(original.ate), SE_MULTIPLE * refuted_se)
    return RefutationReport(
        test_name="random_common_cause",
        original_ate=original.ate,
        refuted_ate=refuted_ate,
        refuted_se=refuted_se,
        n_runs=n_runs,
        passed=bool(drift <= tolerance),
        detail=tuple(
            {"run": r, "ate": float(a), "ate_se": float(s), "d": data.d + 1}
            for r, (a, s) in enumerate(zip(ates, ses))
        ),
    )


def subset_refuter(
    data: Dataset,
    spec: DmlSpec,
    executor: Executor,
    frac: float = 0.5,
    n_runs: int = 5,
    seed: int = 0,
) -> RefutationReport:
    """Re-estimate on seeded subsamples of ceil(frac * n) rows.

    Subsample estimates should scatter around the full-sample one:
    passes iff |original ate - mean subsample ate| <= 2 * SD of the
    subsample estimates (with a single run, its own standard error
    stands in for the SD). Selected rows keep their original order, so
    frac=1.0 reproduces the original estimate exactly.
    """
    _check_runs(n_runs)
    if not 0.0 < frac <= 1.0:
        raise ConfigError(f"frac must lie in (0, 1], got {frac}")
    original = estimate(data, spec, executor)
    m = int(np.ceil(frac * data.n))
    datasets = []
    for r in range(n_runs):
        rng = np.random.default_rng(derive_seed(seed, r))
        rows = np.sort(rng.choice(data.n, size=m, replace=False))
        datasets.append(
            Dataset(
                x=data.x[rows],
                t=data.t[rows],
                y=data.y[rows],
                discrete_treatment=data.discrete_treatment,
                feature_names=data.feature_names,
            )
        )
    ates, ses = _run_replications(datasets, spec, executor)
    refuted_ate = float(ates.mean())
    spread = float(np.std(ates, ddof=1)) if n_runs > 1 else float(ses[0])
    return RefutationReport(
        test_name="subset_refuter",
        original_ate=original.ate,
        refuted_ate=refuted_ate,
        refuted_se=spread,
        n_runs=n_runs,
        passed=bool(abs(original.ate - refuted_ate) <= SE_MULTIPLE * spread),
        detail=tuple(
            {"run": r, "ate": float(a), "ate_se": float(s), "n_rows": m}
            for r, (a, s) in enumerate(zip(ates, ses))
        ),
    )


def overlap_diagnostic(nuis: NuisancePredictions, eta: float = 0.05) -> OverlapReport:
    """Flag units whose estimated propensity leaves (eta, 1 - eta).

    Boundaries are inclusive, so eta=0 flags exactly the units with a
    propensity of exactly 0 or 1.
    """
    if not 0.0 <= eta < 0.5:
        raise ConfigError(f"eta must lie in [0, 0.5), got {eta}")
    p = nuis.t_hat
    flagged = (p <= eta) | (p >= 1.0 - eta)
    return OverlapReport(
        p_min=float(p.min()),
        p_max=float(p.max()),
        frac_flagged=float(flagged.mean()),
        eta=float(eta),
    )
