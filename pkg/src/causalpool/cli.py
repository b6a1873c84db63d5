"""Command-line surface: generate, estimate, refute, bench.

Runs are driven by a JSON config file; ``--workers``, ``--seed`` and
``--out`` override the corresponding config entries. Reports are JSON
with a format version and echo the effective config, so any report can
be reproduced by re-running from its own echoed config. Exit codes:
0 success, 2 config error, 3 data error, 4 estimation error.
"""

import argparse
import json
import sys
import time

from .data import Dataset, DgpSpec, generate_synthetic, load_csv, save_csv
from .dml import DmlSpec, effect_estimate_to_dict, estimate_detailed
from .exceptions import (
    CausalPoolError,
    ConfigError,
    DataError,
    EstimationError,
    TaskError,
)
from .learners import HyperParams, LearnerSpec
from .refute import placebo_treatment, random_common_cause, subset_refuter
from .runtime import Executor, benchmark
from .tune import ParamGrid

REPORT_VERSION = 1

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_ESTIMATION = 4

_DEFAULT_OUT = {
    "generate": "dataset.csv",
    "estimate": "estimate_report.json",
    "refute": "refute_report.json",
    "bench": "bench_report.csv",
}


def _expect_mapping(obj, where: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be a JSON object, got {type(obj).__name__}")
    return obj


def _parse_learner(obj, where: str) -> LearnerSpec | ParamGrid:
    obj = _expect_mapping(obj, where)
    if "grid" in obj:
        grid = _expect_mapping(obj["grid"], f"{where}.grid")
        cands = grid.get("candidates")
        if not isinstance(cands, list):
            raise ConfigError(f"{where}.grid.candidates must be a list")
        specs = tuple(
            _parse_plain_learner(c, f"{where}.grid.candidates[{i}]")
            for i, c in enumerate(cands)
        )
        return ParamGrid(
            candidates=specs,
            cv_k=int(grid.get("cv_k", 5)),
            seed=int(grid.get("seed", 0)),
        )
    return _parse_plain_learner(obj, where)


def _parse_plain_learner(obj, where: str) -> LearnerSpec:
    obj = _expect_mapping(obj, where)
    if "kind" not in obj:
        raise ConfigError(f"{where} needs a 'kind'")
    params = obj.get("params", {})
    _expect_mapping(params, f"{where}.params")
    try:
        hp = HyperParams(**params)
    except TypeError as exc:
        raise ConfigError(f"{where}.params: {exc}") from None
    return LearnerSpec(kind=obj["kind"], params=hp)


def _parse_dgp(obj, where: str) -> DgpSpec:
    obj = _expect_mapping(obj, where)
    try:
        return DgpSpec(**obj)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _load_data(config: dict) -> Dataset:
    data_cfg = _expect_mapping(config.get("data"), "data")
    has_dgp = "dgp" in data_cfg
    has_csv = "csv" in data_cfg
    if has_dgp == has_csv:
        raise ConfigError("data must define exactly one source: 'dgp' or 'csv'")
    if has_dgp:
        dataset, _ = generate_synthetic(_parse_dgp(data_cfg["dgp"], "data.dgp"))
        return dataset
    csv_cfg = _expect_mapping(data_cfg["csv"], "data.csv")
    for key in ("path", "treatment_col", "outcome_col", "covariate_cols"):
        if key not in csv_cfg:
            raise ConfigError(f"data.csv needs {key!r}")
    return load_csv(
        csv_cfg["path"],
        treatment_col=csv_cfg["treatment_col"],
        outcome_col=csv_cfg["outcome_col"],
        covariate_cols=list(csv_cfg["covariate_cols"]),
        discrete_treatment=bool(csv_cfg.get("discrete_treatment", True)),
    )


def _parse_dml_spec(config: dict) -> DmlSpec:
    est = _expect_mapping(config.get("estimator"), "estimator")
    for key in ("model_y", "model_t"):
        if key not in est:
            raise ConfigError(f"estimator needs {key!r}")
    het = est.get("het_features")
    return DmlSpec(
        y_spec=_parse_learner(est["model_y"], "estimator.model_y"),
        t_spec=_parse_learner(est["model_t"], "estimator.model_t"),
        k=int(est.get("k", 5)),
        seed=int(est.get("seed", 0)),
        het_features=tuple(int(j) for j in het) if het is not None else None,
        trim_eta=float(est.get("trim_eta", 0.01)),
    )


def _apply_overrides(config: dict, args) -> dict:
    if args.workers is not None:
        config["workers"] = int(args.workers)
    if args.seed is not None:
        seed = int(args.seed)
        if "data" in config and isinstance(config["data"], dict):
            dgp = config["data"].get("dgp")
            if isinstance(dgp, dict):
                dgp["seed"] = seed
        est = config.get("estimator")
        if isinstance(est, dict):
            est["seed"] = seed
    if args.out is not None:
        config["out"] = args.out
    return config


def _out_path(config: dict, command: str) -> str:
    return str(config.get("out", _DEFAULT_OUT[command]))


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_generate(config: dict) -> int:
    data_cfg = _expect_mapping(config.get("data"), "data")
    if "dgp" not in data_cfg:
        raise ConfigError("generate requires a data.dgp section")
    spec = _parse_dgp(data_cfg["dgp"], "data.dgp")
    gen_cfg = _expect_mapping(config.get("generate", {}), "generate")
    include_gt = bool(gen_cfg.get("include_ground_truth", True))
    dataset, truth = generate_synthetic(spec)
    out = _out_path(config, "generate")
    save_csv(dataset, out, ground_truth=truth if include_gt else None)
    print(f"wrote {out}: n={dataset.n} d={dataset.d} true_ate={truth.true_ate!r}")
    return EXIT_OK


def cmd_estimate(config: dict) -> int:
    dataset = _load_data(config)
    spec = _parse_dml_spec(config)
    workers = int(config.get("workers", 1))
    t0 = time.perf_counter()
    with Executor(workers=workers) as ex:
        est, stages = estimate_detailed(dataset, spec, ex)
    wall = time.perf_counter() - t0
    out = _out_path(config, "estimate")
    report = {
        "format_version": REPORT_VERSION,
        "kind": "estimate_report",
        "config": config,
        "result": effect_estimate_to_dict(est),
        "runtime": {
            "wall_seconds": wall,
            "stage_seconds": stages,
            "workers": workers,
        },
    }
    _write_json(out, report)
    print(
        f"ate={est.ate:.6f} se={est.ate_se:.6f} "
        f"ci=[{est.ci_low:.6f}, {est.ci_high:.6f}] -> {out}"
    )
    return EXIT_OK


_REFUTERS = {
    "placebo_treatment": placebo_treatment,
    "random_common_cause": random_common_cause,
    "subset_refuter": subset_refuter,
}


def cmd_refute(config: dict) -> int:
    dataset = _load_data(config)
    spec = _parse_dml_spec(config)
    workers = int(config.get("workers", 1))
    ref_cfg = _expect_mapping(config.get("refute"), "refute")
    refuters = ref_cfg.get("refuters")
    if not isinstance(refuters, list) or not refuters:
        raise ConfigError("refute.refuters must be a non-empty list")
    reports = []
    with Executor(workers=workers) as ex:
        for i, entry in enumerate(refuters):
            entry = _expect_mapping(entry, f"refute.refuters[{i}]")
            name = entry.get("name")
            if name not in _REFUTERS:
                raise ConfigError(
                    f"unknown refuter {name!r}; choose from {sorted(_REFUTERS)}"
                )
            kwargs = {
                "n_runs": int(entry.get("n_runs", 5)),
                "seed": int(entry.get("seed", 0)),
            }
            if name == "subset_refuter":
                kwargs["frac"] = float(entry.get("frac", 0.5))
            reports.append(_REFUTERS[name](dataset, spec, ex, **kwargs))
    out = _out_path(config, "refute")
    _write_json(
        out,
        {
            "format_version": REPORT_VERSION,
            "kind": "refute_report",
            "config": config,
            "results": [r.to_dict() for r in reports],
        },
    )
    for r in reports:
        verdict = "passed" if r.passed else "FAILED"
        print(
            f"{r.test_name}: {verdict} (original={r.original_ate:.4f}, "
            f"refuted={r.refuted_ate:.4f}, se={r.refuted_se:.4f})"
        )
    print(f"-> {out}")
    return EXIT_OK


def cmd_bench(config: dict) -> int:
    bench_cfg = _expect_mapping(config.get("bench"), "bench")
    sizes = bench_cfg.get("sizes")
    workers = bench_cfg.get("workers")
    if not isinstance(sizes, list) or not sizes:
        raise ConfigError("bench.sizes must be a non-empty list of [n, d] pairs")
    if not isinstance(workers, list) or not workers:
        raise ConfigError("bench.workers must be a non-empty list of worker counts")
    spec = _parse_dml_spec(config)
    seed = int(bench_cfg.get("seed", 0))
    report = benchmark(
        [(int(n), int(d)) for n, d in sizes], [int(w) for w in workers], spec, seed
    )
    out = _out_path(config, "bench")
    report.write_csv(out)
    print(f"environment: {report.environment}")
    for row in report.rows:
        stages = ", ".join(
            f"{k}={v:.2f}s" for k, v in row.stage_seconds.items() if k != "total"
        )
        print(
            f"n={row.n} d={row.d} workers={row.workers}: "
            f"{row.wall_seconds:.2f}s speedup={row.speedup_vs_sequential:.2f} ({stages})"
        )
    print(f"-> {out}")
    return EXIT_OK


_COMMANDS = {
    "generate": cmd_generate,
    "estimate": cmd_estimate,
    "refute": cmd_refute,
    "bench": cmd_bench,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="causalpool",
        description="Parallel orthogonal causal effect estimation",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to a JSON config file")
        p.add_argument("--workers", type=int, default=None, help="override worker count")
        p.add_argument("--seed", type=int, default=None, help="override data and estimator seeds")
        p.add_argument("--out", default=None, help="override output path")
    return parser


def _error_exit(exc: Exception, code: int) -> int:
    payload = {
        "error": {
            "type": type(exc).__name__,
            "message": str(exc),
            "exit_code": code,
        }
    }
    print(json.dumps(payload), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        with open(args.config, encoding="utf-8") as fh:
            config = json.load(fh)
    except OSError as exc:
        return _error_exit(ConfigError(f"cannot read config: {exc}"), EXIT_CONFIG)
    except json.JSONDecodeError as exc:
        return _error_exit(ConfigError(f"config is not valid JSON: {exc}"), EXIT_CONFIG)
    if not isinstance(config, dict):
        return _error_exit(ConfigError("config root must be a JSON object"), EXIT_CONFIG)
    config = _apply_overrides(config, args)
    try:
        return _COMMANDS[args.command](config)
    except ConfigError as exc:
        return _error_exit(exc, EXIT_CONFIG)
    except DataError as exc:
        return _error_exit(exc, EXIT_DATA)
    except (EstimationError, TaskError) as exc:
        return _error_exit(exc, EXIT_ESTIMATION)
    except CausalPoolError as exc:
        return _error_exit(exc, EXIT_ESTIMATION)
    except OSError as exc:
        return _error_exit(ConfigError(str(exc)), EXIT_CONFIG)


if __name__ == "__main__":
    sys.exit(main())
