"""Worker pool for pure tasks, plus the sequential-vs-parallel benchmark.

The executor runs zero-argument callables whose outputs depend only on
their captured inputs and explicit seeds. Results come back in
submission order and are identical for any worker count; with
``workers=1`` everything runs in-process, otherwise tasks go to a pool
of forked worker processes pulling from a shared queue. Tasks and their
results must be picklable when ``workers > 1`` — the same contract a
multi-machine backend would need.
"""

import csv
import io
import multiprocessing
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .exceptions import ConfigError, EstimationError, TaskError

__all__ = ["Executor", "ExecutorCounters", "BenchRow", "BenchReport", "benchmark"]


@dataclass
class ExecutorCounters:
    tasks_submitted: int = 0
    tasks_completed: int = 0
    max_concurrent: int = 0


# Worker-side shared state, installed by the pool initializer. Used only
# to observe concurrency; never influences results.
_IN_FLIGHT = None
_MAX_CONCURRENT = None


def _pool_init(in_flight, max_concurrent):
    global _IN_FLIGHT, _MAX_CONCURRENT
    _IN_FLIGHT = in_flight
    _MAX_CONCURRENT = max_concurrent


def _run_instrumented(task: Callable):
    with _IN_FLIGHT.get_lock():
        _IN_FLIGHT.value += 1
        if _IN_FLIGHT.value > _MAX_CONCURRENT.value:
            _MAX_CONCURRENT.value = _IN_FLIGHT.value
    try:
        return task()
    finally:
        with _IN_FLIGHT.get_lock():
            _IN_FLIGHT.value -= 1


class Executor:
    """Pool of ``workers`` processes executing pure tasks.

    ``workers=1`` is strictly sequential and never forks. Counters track
    submissions, completions, and the highest observed concurrency.
    """

    def __init__(self, workers: int = 1):
        if int(workers) < 1:
            raise ConfigError(f"workers must be >= 1, got {workers}")
        self.workers = int(workers)
        self.counters = ExecutorCounters()
        self._pool = None
        self._in_flight = None
        self._max_concurrent = None

    def _ensure_pool(self) -> ProcessPoolExecutor:
        if self._pool is None:
            ctx = multiprocessing.get_context("fork")
            self._in_flight = ctx.Value("i", 0)
            self._max_concurrent = ctx.Value("i", 0, lock=False)
            self._pool = ProcessPoolExecutor(
                max_workers=self.workers,
                mp_context=ctx,
                initializer=_pool_init,
                initargs=(self._in_flight, self._max_concurrent),
            )
        return self._pool

    def submit_all(self, tasks: Sequence[Callable]) -> list:
        """Run every task; return results in submission order.

        If any task raises, the whole batch fails with a
        :class:`TaskError` naming the lowest failing task index — the
        same index regardless of scheduling. All tasks are joined before
        returning either way.
        """
        tasks = list(tasks)
        self.counters.tasks_submitted += len(tasks)
        if not tasks:
            return []
        if self.workers == 1:
            return self._run_sequential(tasks)
        return self._run_parallel(tasks)

    def _run_sequential(self, tasks) -> list:
        self.counters.max_concurrent = max(self.counters.max_concurrent, 1)
        results = []
        for i, task in enumerate(tasks):
            try:
                results.append(task())
            except Exception as exc:
                raise TaskError(i, str(exc)) from exc
            self.counters.tasks_completed += 1
        return results

    def _run_parallel(self, tasks) -> list:
        pool = self._ensure_pool()
        futures = [pool.submit(_run_instrumented, task) for task in tasks]
        outcomes = []
        for fut in futures:
            try:
                outcomes.append((True, fut.result()))
            except Exception as exc:
                outcomes.append((False, exc))
        self.counters.max_concurrent = max(
            self.counters.max_concurrent, self._max_concurrent.value
        )
        self.counters.tasks_completed += sum(ok for ok, _ in outcomes)
        for i, (ok, payload) in enumerate(outcomes):
            if not ok:
                raise TaskError(i, str(payload)) from payload
        return [payload for _, payload in outcomes]

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None

    def __enter__(self) -> "Executor":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


@dataclass(frozen=True)
class BenchRow:
    n: int
    d: int
    workers: int
    wall_seconds: float
    speedup_vs_sequential: float
    stage_seconds: dict = field(default_factory=dict)


@dataclass(frozen=True)
class BenchReport:
    """Wall times and speedups of matched sequential vs parallel runs."""

    rows: tuple[BenchRow, ...]
    environment: str

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["n", "d", "workers", "wall_seconds", "speedup"])
        for r in self.rows:
            writer.writerow(
                [r.n, r.d, r.workers, f"{r.wall_seconds:.6f}", f"{r.speedup_vs_sequential:.4f}"]
            )
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_csv())


def benchmark(sizes, worker_counts, spec, seed: int = 0) -> BenchReport:
    """Time ``estimate`` on generated data at each size and worker count.

    A ``workers=1`` run is always included as the speedup baseline
    (prepended if absent from ``worker_counts``). Estimates are required
    to be identical across worker counts for each size; a mismatch is an
    error, since a speed comparison between differing results would be
    meaningless.
    """
    from .data import DgpSpec, generate_synthetic
    from .dml import effect_estimate_to_json, estimate_detailed

    counts = list(dict.fromkeys(int(w) for w in worker_counts))
    if not counts:
        raise ConfigError("worker_counts must not be empty")
    if 1 not in counts:
        counts.insert(0, 1)
    if any(w < 1 for w in counts):
        raise ConfigError(f"worker counts must be >= 1, got {worker_counts}")

    rows: list[BenchRow] = []
    for n, d in sizes:
        data, _ = generate_synthetic(
            DgpSpec(n=int(n), d=int(d), outcome_kind="paper_listing", seed=seed)
        )
        sequential_wall = None
        reference_json = None
        for w in counts:
            with Executor(workers=w) as ex:
                t0 = time.perf_counter()
                est, stages = estimate_detailed(data, spec, ex)
                wall = time.perf_counter() - t0
            enc = effect_estimate_to_json(est)
            if reference_json is None:
                reference_json = enc
            elif enc != reference_json:
                raise EstimationError(
                    f"estimates differ between workers=1 and workers={w} at n={n}, d={d}"
                )
            if w == 1:
                sequential_wall = wall
            rows.append(
                BenchRow(
                    n=int(n),
                    d=int(d),
                    workers=w,
                    wall_seconds=wall,
                    speedup_vs_sequential=sequential_wall / wall,
                    stage_seconds=stages,
                )
            )
    env = f"{os.cpu_count()} logical cores"
    return BenchReport(rows=tuple(rows), environment=env)
