"""Orthogonal treatment-effect estimation via residualization.

The pipeline: cross-fit E[Y|X] and E[T|X] out of fold, residualize both,
then regress the outcome residual on the treatment residual interacted
with ``[1, x_het]`` by OLS with no global intercept. The coefficient
vector defines the effect curve ``theta(x) = beta0 + beta . x_het``;
the average effect is the sample mean of ``theta`` with a delta-method
standard error from the HC0 sandwich covariance.

``plugin_ate`` is an independent oracle for small discrete covariate
spaces: the stratified difference of arm means, weighted by stratum
frequency — the quantity the residualized estimator should agree with
wherever both are applicable.
"""

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .crossfit import NuisancePredictions, crossfit_predict, make_folds
from .data import Dataset
from .exceptions import ConfigError, DataError, EstimationError
from .learners import LearnerSpec, loss_kind
from .runtime import Executor
from .tune import ParamGrid, resolve_tuned

__all__ = [
    "DmlSpec",
    "CateModel",
    "EffectEstimate",
    "NuisanceDiagnostics",
    "residualize",
    "fit_final",
    "estimate",
    "estimate_detailed",
    "cate",
    "plugin_ate",
    "effect_estimate_to_json",
]

Z_95 = 1.96
MAX_PLUGIN_STRATA = 64


@dataclass(frozen=True)
class DmlSpec:
    """Configuration of the full estimation pipeline.

    ``y_spec``/``t_spec`` may be plain learner specs or parameter grids;
    grids are resolved by a one-shot search on the full sample before
    cross-fitting. ``het_features`` selects the covariate columns the
    effect curve may depend on (all of them by default). ``trim_eta``
    clips estimated propensities into [eta, 1 - eta] before
    residualizing a discrete treatment.
    """

    y_spec: LearnerSpec | ParamGrid
    t_spec: LearnerSpec | ParamGrid
    k: int = 5
    seed: int = 0
    het_features: tuple[int, ...] | None = None
    trim_eta: float = 0.01

    def __post_init__(self):
        if self.k < 2:
            raise ConfigError(f"fold count k must be >= 2, got {self.k}")
        if not 0.0 <= self.trim_eta < 0.5:
            raise ConfigError(f"trim_eta must lie in [0, 0.5), got {self.trim_eta}")
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")
        if self.het_features is not None:
            het = tuple(int(j) for j in self.het_features)
            if len(het) == 0:
                raise ConfigError("het_features must not be empty when given")
            if len(set(het)) != len(het):
                raise ConfigError("het_features must not repeat columns")
            object.__setattr__(self, "het_features", het)


@dataclass(frozen=True)
class CateModel:
    """Fitted effect-curve coefficients with robust covariance.

    ``beta[0]`` is the base effect; ``beta[1:]`` are loadings on the
    heterogeneity features.
    """

    beta: np.ndarray
    cov: np.ndarray
    n_used: int

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=np.float64).ravel()
        cov = np.asarray(self.cov, dtype=np.float64)
        p = beta.shape[0]
        if cov.shape != (p, p):
            raise EstimationError(
                f"covariance shape {cov.shape} does not match beta length {p}"
            )
        if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-8 * (1.0 + np.abs(cov).max())):
            raise EstimationError("covariance must be symmetric")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "cov", cov)
        self.beta.setflags(write=False)
        self.cov.setflags(write=False)


@dataclass(frozen=True)
class NuisanceDiagnostics:
    """Per-fold out-of-fold losses and the propensity range."""

    fold_y_loss: tuple[float, ...]
    fold_t_loss: tuple[float, ...]
    y_loss_kind: str
    t_loss_kind: str
    t_hat_min: float
    t_hat_max: float


@dataclass(frozen=True)
class EffectEstimate:
    ate: float
    ate_se: float
    ci_low: float
    ci_high: float
    cate_model: CateModel
    nuisance_diag: NuisanceDiagnostics

    def __post_init__(self):
        if self.ate_se < 0:
            raise EstimationError("ate_se must be non-negative")
        if not self.ci_low <= self.ate <= self.ci_high:
            raise EstimationError("confidence interval must contain the estimate")


def residualize(
    data: Dataset, nuis: NuisancePredictions, trim_eta: float = 0.01
) -> tuple[np.ndarray, np.ndarray]:
    """Subtract out-of-fold nuisance predictions from outcome and treatment.

    For a discrete treatment the propensity is clipped into
    ``[trim_eta, 1 - trim_eta]`` first, enforcing overlap numerically.
    """
    if not 0.0 <= trim_eta < 0.5:
        raise ConfigError(f"trim_eta must lie in [0, 0.5), got {trim_eta}")
    if nuis.y_hat.shape[0] != data.n:
        raise DataError("nuisance predictions do not match dataset length")
    y_res = data.y - nuis.y_hat
    if data.discrete_treatment:
        t_res = data.t - np.clip(nuis.t_hat, trim_eta, 1.0 - trim_eta)
    else:
        t_res = data.t - nuis.t_hat
    return y_res, t_res


def _design(t_res: np.ndarray, x_het: np.ndarray) -> np.ndarray:
    return np.column_stack([t_res, t_res[:, None] * x_het])


def fit_final(y_res: np.ndarray, t_res: np.ndarray, x_het: np.ndarray) -> CateModel:
    """OLS of the outcome residual on ``t_res * [1, x_het]`` (no intercept).

    The covariance is the HC0 sandwich. A rank-deficient design — e.g. a
    treatment residual that is identically zero — has no identifying
    variation and is an error.
    """
    y_res = np.asarray(y_res, dtype=np.float64).ravel()
    t_res = np.asarray(t_res, dtype=np.float64).ravel()
    x_het = np.asarray(x_het, dtype=np.float64)
    if x_het.ndim != 2 or not (x_het.shape[0] == y_res.shape[0] == t_res.shape[0]):
        raise DataError("y_res, t_res, x_het must share the same row count")
    if any((x_het[:, j] == 1.0).all() for j in range(x_het.shape[1])):
        raise ConfigError("x_het must not contain an intercept column")
    design = _design(t_res, x_het)
    n, p = design.shape
    gram = design.T @ design
    if np.linalg.matrix_rank(gram) < p:
        raise EstimationError(
            "no identifying variation: final-stage design is singular"
        )
    beta = np.linalg.solve(gram, design.T @ y_res)
    resid = y_res - design @ beta
    gram_inv = np.linalg.inv(gram)
    meat = (design * (resid * resid)[:, None]).T @ design
    cov = gram_inv @ meat @ gram_inv
    cov = 0.5 * (cov + cov.T)
    return CateModel(beta=beta, cov=cov, n_used=n)


def cate(model: CateModel, x_het_row: np.ndarray) -> float:
    """Effect at a single point: ``beta0 + beta . x_het_row``."""
    row = np.asarray(x_het_row, dtype=np.float64).ravel()
    if row.shape[0] != model.beta.shape[0] - 1:
        raise DataError(
            f"expected {model.beta.shape[0] - 1} heterogeneity features, got {row.shape[0]}"
        )
    return float(model.beta[0] + model.beta[1:] @ row)


def _het_matrix(data: Dataset, spec: DmlSpec) -> np.ndarray:
    if spec.het_features is None:
        return data.x
    bad = [j for j in spec.het_features if not 0 <= j < data.d]
    if bad:
        raise ConfigError(f"het_features out of range for d={data.d}: {bad}")
    return data.x[:, list(spec.het_features)]


def _fold_losses(
    data: Dataset, nuis: NuisancePredictions
) -> tuple[tuple[float, ...], tuple[float, ...]]:
    y_losses, t_losses = [], []
    for j in range(nuis.fold_plan.k):
        test = nuis.fold_plan.assignment == j
        ey = nuis.y_hat[test] - data.y[test]
        et = nuis.t_hat[test] - data.t[test]
        y_losses.append(float(ey @ ey / test.sum()))
        t_losses.append(float(et @ et / test.sum()))
    return tuple(y_losses), tuple(t_losses)


def estimate_detailed(
    data: Dataset, spec: DmlSpec, executor: Executor
) -> tuple[EffectEstimate, dict]:
    """Run the full pipeline; also return wall seconds per stage."""
    timings: dict[str, float] = {}
    t_start = time.perf_counter()

    t0 = time.perf_counter()
    y_spec = resolve_tuned(spec.y_spec, data.x, data.y, executor)
    t_spec = resolve_tuned(spec.t_spec, data.x, data.t, executor)
    timings["tune"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    plan = make_folds(data.n, spec.k, spec.seed)
    nuis = crossfit_predict(data, y_spec, t_spec, plan, executor)
    timings["crossfit"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    y_res, t_res = residualize(data, nuis, spec.trim_eta)
    x_het = _het_matrix(data, spec)
    model = fit_final(y_res, t_res, x_het)
    mean_row = np.concatenate([[1.0], x_het.mean(axis=0)])
    ate = float(mean_row @ model.beta)
    var = float(mean_row @ model.cov @ mean_row)
    se = float(np.sqrt(max(var, 0.0)))
    y_losses, t_losses = _fold_losses(data, nuis)
    diag = NuisanceDiagnostics(
        fold_y_loss=y_losses,
        fold_t_loss=t_losses,
        y_loss_kind=loss_kind(y_spec),
        t_loss_kind=loss_kind(t_spec),
        t_hat_min=float(nuis.t_hat.min()),
        t_hat_max=float(nuis.t_hat.max()),
    )
    est = EffectEstimate(
        ate=ate,
        ate_se=se,
        ci_low=ate - Z_95 * se,
        ci_high=ate + Z_95 * se,
        cate_model=model,
        nuisance_diag=diag,
    )
    timings["final"] = time.perf_counter() - t0
    timings["total"] = time.perf_counter() - t_start
    return est, timings


def estimate(data: Dataset, spec: DmlSpec, executor: Executor) -> EffectEstimate:
    """Estimate average and conditional treatment effects.

    Deterministic given the data and spec: any worker count produces
    bit-identical output.
    """
    est, _ = estimate_detailed(data, spec, executor)
    return est


def plugin_ate(data: Dataset) -> float:
    """Stratified difference of arm means over discrete covariate cells.

    Direct implementation of the identified contrast for small discrete
    covariate spaces (at most 64 distinct rows of ``x``); serves as an
    independent oracle for the residualized estimator.
    """
    if not data.discrete_treatment:
        raise DataError("plugin_ate requires a discrete treatment")
    strata, inverse = np.unique(data.x, axis=0, return_inverse=True)
    n_strata = strata.shape[0]
    if n_strata > MAX_PLUGIN_STRATA:
        raise DataError(
            f"covariates take {n_strata} distinct joint values; "
            f"plugin_ate supports at most {MAX_PLUGIN_STRATA}"
        )
    total = 0.0
    for s in range(n_strata):
        rows = inverse == s
        t_s = data.t[rows]
        y_s = data.y[rows]
        treated = t_s == 1.0
        if not treated.any() or treated.all():
            raise DataError(
                f"stratum {s} violates overlap: only one treatment arm present"
            )
        effect = float(y_s[treated].mean() - y_s[~treated].mean())
        total += rows.mean() * effect
    return total


def _cate_model_to_dict(model: CateModel) -> dict:
    return {
        "beta": [float(b) for b in model.beta],
        "cov": [[float(v) for v in row] for row in model.cov],
        "n_used": int(model.n_used),
    }


def effect_estimate_to_dict(est: EffectEstimate) -> dict:
    d = est.nuisance_diag
    return {
        "ate": float(est.ate),
        "ate_se": float(est.ate_se),
        "ci_low": float(est.ci_low),
        "ci_high": float(est.ci_high),
        "cate_model": _cate_model_to_dict(est.cate_model),
        "nuisance_diag": {
            "fold_y_loss": [float(v) for v in d.fold_y_loss],
            "fold_t_loss": [float(v) for v in d.fold_t_loss],
            "y_loss_kind": d.y_loss_kind,
            "t_loss_kind": d.t_loss_kind,
            "t_hat_min": float(d.t_hat_min),
            "t_hat_max": float(d.t_hat_max),
        },
    }


def effect_estimate_to_json(est: EffectEstimate) -> str:
    """Canonical full-precision encoding; equal estimates give equal bytes."""
    return json.dumps(effect_estimate_to_dict(est), sort_keys=True, separators=(",", ":"))
