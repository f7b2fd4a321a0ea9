"""Benchmark harness: run suites of instances across seeds, collect result
rows, and emit the results table and performance-profile CSV.

Cells (instance x seed) are independent solves and may run in parallel;
the merge is by sorted key, so the output is independent of scheduling.
The PGCON_THREADS environment variable caps worker count.
"""

from __future__ import annotations

import dataclasses
import io
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

from . import scca as scca_mod
from .corpus import corpus
from .driver import SolverConfig, solve

__all__ = ["BenchCell", "BenchResult", "scca_suite", "corpus_suite",
           "run_benchmark", "results_to_csv", "profile_to_csv",
           "RESULT_COLUMNS"]

RESULT_COLUMNS = [
    "instance", "n", "m", "lambda", "seed", "status", "iters", "time_s",
    "chi", "c_norm", "rho_xy", "sr_x", "sr_y", "sr", "sl", "voc_x", "voc_y",
]


@dataclass
class BenchCell:
    """One solve to perform: a problem factory plus its config."""

    instance: str
    seed: int
    make: Callable[[], object]  # -> (ProblemInstance, metrics_fn or None)
    config: SolverConfig
    lam: float = float("nan")


@dataclass
class BenchResult:
    instance: str
    seed: int
    status: str
    n: int
    m: int
    lam: float
    iters: int
    time_s: float
    chi: float
    c_norm: float
    metrics: Optional[scca_mod.SccaMetrics]
    error: str = ""


def _cfg_with(cfg: SolverConfig, **overrides) -> SolverConfig:
    d = cfg.to_dict()
    d.update(overrides)
    return SolverConfig.from_dict(d)


def scca_suite(sizes, lams, seeds, base_cfg: Optional[SolverConfig] = None) -> list[BenchCell]:
    base = base_cfg or SolverConfig(alpha0=1e-3)
    cells = []
    for n in sizes:
        for lam in lams:
            for seed in (seeds or [0]):
                def make(n=n, lam=lam, seed=seed):
                    data = scca_mod.scca_generate(n, n, n, seed)
                    prob = scca_mod.scca_problem(data, lam)

                    def metrics(report, wall):
                        nx = data.n_x
                        return scca_mod.scca_metrics(
                            report.x[:nx], report.x[nx:nx + data.n_y], data,
                            wall_time=wall)

                    return prob, metrics
                cells.append(BenchCell(
                    instance=f"scca-{n}", seed=seed, make=make,
                    config=base, lam=lam,
                ))
    return cells


def corpus_suite(base_cfg: Optional[SolverConfig] = None) -> list[BenchCell]:
    base = base_cfg or SolverConfig()
    cells = []
    for inst in corpus():
        def make(inst=inst):
            return inst.problem, None
        cells.append(BenchCell(
            instance=inst.name, seed=0, make=make,
            config=_cfg_with(base, **inst.config_overrides),
        ))
    return cells


def _run_cell(cell: BenchCell) -> BenchResult:
    try:
        prob, metrics_fn = cell.make()
        t0 = time.perf_counter()
        report = solve(prob, cell.config)
        wall = time.perf_counter() - t0
        metrics = metrics_fn(report, wall) if metrics_fn is not None else None
        return BenchResult(
            instance=cell.instance, seed=cell.seed, status=report.status,
            n=prob.n, m=prob.m, lam=cell.lam, iters=report.iterations,
            time_s=wall, chi=report.chi, c_norm=report.c_norm, metrics=metrics,
        )
    except Exception as exc:  # individual failures recorded, suite continues
        return BenchResult(
            instance=cell.instance, seed=cell.seed, status="Error",
            n=-1, m=-1, lam=cell.lam, iters=0, time_s=0.0, chi=float("inf"),
            c_norm=float("inf"), metrics=None, error=f"{type(exc).__name__}: {exc}",
        )


def run_benchmark(cells: list[BenchCell], threads: Optional[int] = None) -> list[BenchResult]:
    """Execute all cells; results come back sorted by (instance, lam, seed)."""
    if threads is None:
        threads = int(os.environ.get("PGCON_THREADS", "1"))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_cell, cells))
    else:
        results = [_run_cell(c) for c in cells]
    results.sort(key=lambda r: (r.instance, r.lam if r.lam == r.lam else -1.0, r.seed))
    return results


def results_to_csv(results: list[BenchResult]) -> str:
    buf = io.StringIO()
    buf.write(",".join(RESULT_COLUMNS) + "\n")
    for r in results:
        met = r.metrics
        row = [
            r.instance, str(r.n), str(r.m),
            repr(r.lam) if r.lam == r.lam else "",
            str(r.seed), r.status, str(r.iters), repr(r.time_s), repr(r.chi),
            repr(r.c_norm),
        ]
        if met is not None:
            row += [repr(float(met.rho_xy)), repr(float(met.sr_x)),
                    repr(float(met.sr_y)), repr(float(met.sr)), str(met.sl),
                    repr(float(met.voc_x)), repr(float(met.voc_y))]
        else:
            row += [""] * 7
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def profile_to_csv(results: list[BenchResult], config_label: str) -> str:
    """Rows for external performance-profile plotting: one per solve with
    its wall time and whether it counts as solved."""
    buf = io.StringIO()
    buf.write("instance,config,time_s,solved\n")
    for r in results:
        solved = int(r.status in ("KktPoint", "InfeasibleStationary"))
        buf.write(f"{r.instance}-s{r.seed},{config_label},{r.time_s!r},{solved}\n")
    return buf.getvalue()
