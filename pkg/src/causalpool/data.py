"""Observational datasets, a synthetic generator with known effects, and CSV I/O.

A :class:`Dataset` holds covariates ``x``, treatment ``t``, and outcome
``y``. The generator draws every row from its own hash-derived stream,
so a row's values depend only on ``(seed, row id)``: regenerating with a
different row id for one row leaves all other rows bit-identical, and
subsets of a conceptually infinite table are reproducible.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, ndtri

from .exceptions import ConfigError, DataError
from .seeding import hash_uniform, row_keys

__all__ = [
    "Dataset",
    "GroundTruth",
    "DgpSpec",
    "OUTCOME_KINDS",
    "generate_synthetic",
    "load_csv",
    "save_csv",
]

OUTCOME_KINDS = ("paper_listing", "linear", "zero_effect")

GT_PREFIX = "__gt_"


def _as_readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Immutable observation matrix: covariates, treatment, outcome.

    Invariants are enforced at construction: matching row counts, finite
    values, and (for a discrete treatment) a binary ``t`` taking both
    values at least once.
    """

    x: np.ndarray
    t: np.ndarray
    y: np.ndarray
    discrete_treatment: bool = True
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        if x.ndim != 2:
            raise DataError(f"x must be a 2-d matrix, got ndim={x.ndim}")
        t = np.asarray(self.t, dtype=np.float64).ravel()
        y = np.asarray(self.y, dtype=np.float64).ravel()
        n, d = x.shape
        if n < 1 or d < 1:
            raise DataError(f"need n >= 1 and d >= 1, got shape {x.shape}")
        if t.shape[0] != n or y.shape[0] != n:
            raise DataError(
                f"row mismatch: x has {n} rows, t has {t.shape[0]}, y has {y.shape[0]}"
            )
        for name, arr in (("x", x), ("t", t), ("y", y)):
            if not np.isfinite(arr).all():
                raise DataError(f"non-finite values in {name}")
        if self.discrete_treatment:
            if not np.isin(t, (0.0, 1.0)).all():
                raise DataError("discrete treatment must take values in {0, 1}")
            if t.min() == t.max():
                raise DataError(
                    "degenerate treatment: a discrete treatment must take both values"
                )
        if self.feature_names is not None:
            names = tuple(str(c) for c in self.feature_names)
            if len(names) != d:
                raise DataError(
                    f"feature_names has {len(names)} entries for {d} columns"
                )
            object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "x", _as_readonly(x))
        object.__setattr__(self, "t", _as_readonly(t))
        object.__setattr__(self, "y", _as_readonly(y))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def column_names(self) -> tuple[str, ...]:
        if self.feature_names is not None:
            return self.feature_names
        return tuple(f"x{j}" for j in range(self.d))


@dataclass(frozen=True)
class GroundTruth:
    """Potential outcomes and the true effect curve of a synthetic dataset.

    ``tau`` is stored as ``y1 - y0`` so the defining identity holds
    bit-for-bit; ``true_ate`` is the sample mean of ``tau``.
    """

    y0: np.ndarray
    y1: np.ndarray
    tau: np.ndarray
    true_ate: float

    def __post_init__(self):
        y0 = np.asarray(self.y0, dtype=np.float64).ravel()
        y1 = np.asarray(self.y1, dtype=np.float64).ravel()
        tau = np.asarray(self.tau, dtype=np.float64).ravel()
        if not (y0.shape == y1.shape == tau.shape):
            raise DataError("y0, y1, tau must have identical shapes")
        if not np.array_equal(y1 - y0, tau):
            raise DataError("tau must equal y1 - y0 elementwise")
        if float(tau.mean()) != float(self.true_ate):
            raise DataError("true_ate must equal mean(tau)")
        object.__setattr__(self, "y0", _as_readonly(y0))
        object.__setattr__(self, "y1", _as_readonly(y1))
        object.__setattr__(self, "tau", _as_readonly(tau))


@dataclass(frozen=True)
class DgpSpec:
    """Parameters of the synthetic data generating process.

    ``confounding_strength`` is the coefficient on the first covariate in
    the treatment-assignment logit. ``unobserved_confounding`` adds a
    hidden standard-normal column to both the logit and the outcome with
    the given weight, then discards it from ``x``; zero means treatment
    is unconfounded given the observed covariates by construction.
    """

    n: int
    d: int
    outcome_kind: str = "paper_listing"
    confounding_strength: float = 1.0
    unobserved_confounding: float = 0.0
    noise_sd: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ConfigError(f"n must be >= 2, got {self.n}")
        if self.d < 1:
            raise ConfigError(f"d must be >= 1, got {self.d}")
        if self.outcome_kind not in OUTCOME_KINDS:
            raise ConfigError(
                f"unknown outcome_kind {self.outcome_kind!r}; choose from {OUTCOME_KINDS}"
            )
        if self.noise_sd < 0:
            raise ConfigError(f"noise_sd must be >= 0, got {self.noise_sd}")
        if self.unobserved_confounding < 0:
            raise ConfigError(
                f"unobserved_confounding must be >= 0, got {self.unobserved_confounding}"
            )
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")


def _tau_for_kind(kind: str, x0: np.ndarray) -> np.ndarray:
    if kind == "paper_listing":
        return 1.0 + 0.5 * x0
    if kind == "linear":
        return np.ones_like(x0)
    return np.zeros_like(x0)


def _generate_rows(spec: DgpSpec, row_ids: np.ndarray):
    """Generate the rows identified by ``row_ids``; each row depends only
    on its own id. Returns (x, t, y0, y1, tau, y)."""
    keys = row_keys(spec.seed, row_ids)
    n = row_ids.shape[0]
    d = spec.d
    # row draw stream layout: columns 0..d-1 -> X, d -> hidden U,
    # d+1 -> outcome noise, d+2 -> treatment uniform
    x = np.empty((n, d), dtype=np.float64)
    for j in range(d):
        x[:, j] = ndtri(hash_uniform(keys, j))
    u = ndtri(hash_uniform(keys, d))
    eps = spec.noise_sd * ndtri(hash_uniform(keys, d + 1))
    t_uniform = hash_uniform(keys, d + 2)

    logit = spec.confounding_strength * x[:, 0] + spec.unobserved_confounding * u
    propensity = expit(logit)
    t = (t_uniform < propensity).astype(np.float64)

    y0 = x[:, 0] + spec.unobserved_confounding * u + eps
    y1 = y0 + _tau_for_kind(spec.outcome_kind, x[:, 0])
    tau = y1 - y0
    y = np.where(t == 1.0, y1, y0)
    return x, t, y0, y1, tau, y


def generate_synthetic(spec: DgpSpec) -> tuple[Dataset, GroundTruth]:
    """Draw a synthetic dataset with analytically known treatment effects.

    The observed process is ``X ~ N(0, I)``, ``P(T=1|X) = expit(c * X0)``
    and ``Y = tau(X0) * T + X0 + noise``; the effect curve ``tau`` is
    ``1 + 0.5 * X0`` (``paper_listing``), a constant 1 (``linear``), or 0
    (``zero_effect``). The observed outcome equals ``y1`` where treated
    and ``y0`` where untreated, exactly. Identical specs yield
    bit-identical output.
    """
    row_ids = np.arange(spec.n, dtype=np.uint64)
    x, t, y0, y1, tau, y = _generate_rows(spec, row_ids)
    data = Dataset(x=x, t=t, y=y, discrete_treatment=True)
    truth = GroundTruth(y0=y0, y1=y1, tau=tau, true_ate=float(tau.mean()))
    return data, truth


def _parse_cell(raw: str, row: int, col: str) -> float:
    try:
        v = float(raw)
    except ValueError:
        raise DataError(
            f"non-numeric cell {raw!r} at data row {row}, column {col!r}"
        ) from None
    if not math.isfinite(v):
        raise DataError(f"non-finite cell {raw!r} at data row {row}, column {col!r}")
    return v


def load_csv(
    path,
    treatment_col: str,
    outcome_col: str,
    covariate_cols: list[str],
    discrete_treatment: bool = True,
) -> Dataset:
    """Read a headered UTF-8 CSV into a validated :class:`Dataset`.

    Raises :class:`DataError` naming the offending column or cell on a
    missing column, unparsable value, or degenerate treatment.
    """
    if not covariate_cols:
        raise DataError("covariate_cols must name at least one column")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, expected a header row") from None
        pos = {name: i for i, name in enumerate(header)}
        wanted = [treatment_col, outcome_col, *covariate_cols]
        for name in wanted:
            if name not in pos:
                raise DataError(f"{path}: missing column {name!r}")
        t_i, y_i = pos[treatment_col], pos[outcome_col]
        x_i = [pos[c] for c in covariate_cols]
        t_vals, y_vals, x_rows = [], [], []
        for row_num, row in enumerate(reader):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path}: data row {row_num} has {len(row)} fields, expected {len(header)}"
                )
            t_vals.append(_parse_cell(row[t_i], row_num, treatment_col))
            y_vals.append(_parse_cell(row[y_i], row_num, outcome_col))
            x_rows.append(
                [_parse_cell(row[i], row_num, c) for i, c in zip(x_i, covariate_cols)]
            )
    if not x_rows:
        raise DataError(f"{path}: no data rows")
    t = np.array(t_vals)
    if discrete_treatment and not np.isin(t, (0.0, 1.0)).all():
        bad = t[~np.isin(t, (0.0, 1.0))][0]
        raise DataError(
            f"{path}: discrete treatment column {treatment_col!r} contains {bad!r}, "
            "expected values in {0, 1}"
        )
    return Dataset(
        x=np.array(x_rows),
        t=t,
        y=np.array(y_vals),
        discrete_treatment=discrete_treatment,
        feature_names=tuple(covariate_cols),
    )


def save_csv(
    data: Dataset,
    path,
    ground_truth: GroundTruth | None = None,
    treatment_col: str = "t",
    outcome_col: str = "y",
) -> None:
    """Write a dataset to CSV; ground-truth columns are prefixed ``__gt_``.

    Floats are written with shortest round-trip formatting, so the same
    dataset always produces the same bytes.
    """
    names = list(data.column_names())
    header = names + [treatment_col, outcome_col]
    gt_cols: list[np.ndarray] = []
    if ground_truth is not None:
        if ground_truth.y0.shape[0] != data.n:
            raise DataError("ground truth length does not match dataset")
        header += [f"{GT_PREFIX}y0", f"{GT_PREFIX}y1", f"{GT_PREFIX}tau"]
        gt_cols = [ground_truth.y0, ground_truth.y1, ground_truth.tau]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        cols = [data.x[:, j] for j in range(data.d)] + [data.t, data.y] + gt_cols
        for i in range(data.n):
            writer.writerow([repr(float(col[i])) for col in cols])
