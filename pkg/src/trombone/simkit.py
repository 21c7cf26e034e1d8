"""Monte Carlo batch runner and per-run capacity metrics."""
from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from .geometry import GeometryConfig
from .nlp import Bounds, Solution, SolverParams, Weights, fcfs_sequence, solve
from .traffic import (
    DEFAULT_LAMBDA_MAX,
    DEFAULT_LAMBDA_MIN,
    DEFAULT_T_MAX,
    DEFAULT_T_SEP,
    build_scenario,
    rates_rng,
    sample_rates,
)

EPS_SEP = 0.1  # seconds; slacks at or below this count as numerical noise
SEED_RULE = "splitmix64(master_seed + run_index)"
_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def run_seed(master_seed: int, run_index: int) -> int:
    return splitmix64((int(master_seed) + int(run_index)) & _MASK64)


@dataclass(frozen=True)
class RunMetrics:
    n_aircraft: int
    faf_landing_rate: float
    violation_pct: float
    total_stretch: float
    makespan: float
    sum_sigma: float
    solver_status: str
    seed: int = 0
    rates: Dict[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class BatchReport:
    runs: List[RunMetrics]
    capacity_threshold: float
    master_seed: int
    config: Dict[str, Any]
    seed_rule: str = SEED_RULE


def landing_rate(times: List[float]) -> float:
    """Achieved landings per hour over the active window, 3600*(N-1)/(t_N - t_1).

    If violations invert the first/last order the full span of FAF times is
    used instead.
    """
    if len(times) < 2:
        return 0.0
    span = times[-1] - times[0]
    if span <= 0:
        span = max(times) - min(times)
    if span <= 0:
        return 0.0
    return 3600.0 * (len(times) - 1) / span


def solution_metrics(solution: Solution, seed: int = 0, rates: Optional[Dict[str, int]] = None) -> RunMetrics:
    n = len(solution.plans)
    times = solution.faf_times
    violations = sum(1 for s in solution.slacks_sigma if s > EPS_SEP)
    return RunMetrics(
        n_aircraft=n,
        faf_landing_rate=landing_rate(times),
        violation_pct=100.0 * violations / (n - 1) if n > 1 else 0.0,
        total_stretch=float(sum(p.d for p in solution.plans)),
        makespan=float(times[-1]) if times else 0.0,
        sum_sigma=float(sum(solution.slacks_sigma)),
        solver_status=solution.status,
        seed=int(seed),
        rates=dict(rates or {}),
    )


def run_once(
    config: GeometryConfig = GeometryConfig(),
    bounds: Optional[Bounds] = None,
    weights: Weights = Weights(),
    t_sep: float = DEFAULT_T_SEP,
    t_max: float = DEFAULT_T_MAX,
    seed: int = 0,
    params: SolverParams = SolverParams(),
    rate_range: Tuple[int, int] = (DEFAULT_LAMBDA_MIN, DEFAULT_LAMBDA_MAX),
) -> RunMetrics:
    bounds = bounds or Bounds(d_max=config.d_max)
    rates = sample_rates(rates_rng(seed), *rate_range, gates=tuple(config.gates))
    scenario = build_scenario(config, rates, t_sep, t_max, seed)
    if not scenario.arrivals:
        return RunMetrics(0, 0.0, 0.0, 0.0, 0.0, 0.0, "converged", seed=seed, rates=rates)
    solution = solve(scenario, fcfs_sequence(scenario, bounds), bounds, weights, params)
    return solution_metrics(solution, seed, rates)


def _run_indexed(args):
    index, kwargs = args
    return index, run_once(**kwargs)


def run_batch(
    config: GeometryConfig = GeometryConfig(),
    bounds: Optional[Bounds] = None,
    weights: Weights = Weights(),
    t_sep: float = DEFAULT_T_SEP,
    t_max: float = DEFAULT_T_MAX,
    n_runs: int = 1000,
    master_seed: int = 0,
    params: SolverParams = SolverParams(),
    rate_range: Tuple[int, int] = (DEFAULT_LAMBDA_MIN, DEFAULT_LAMBDA_MAX),
    workers: int = 1,
    progress=None,
) -> BatchReport:
    """Independent runs with seeds derived from ``master_seed``.

    Results are ordered by run index whatever the execution order, so
    ``workers > 1`` gives the same report as a sequential batch.
    """
    if n_runs < 1:
        raise ValueError(f"n_runs must be at least 1, got {n_runs}")
    bounds = bounds or Bounds(d_max=config.d_max)
    jobs = [
        (i, dict(config=config, bounds=bounds, weights=weights, t_sep=t_sep, t_max=t_max,
                 seed=run_seed(master_seed, i), params=params, rate_range=rate_range))
        for i in range(n_runs)
    ]
    results: List[Optional[RunMetrics]] = [None] * n_runs
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, m in pool.map(_run_indexed, jobs):
                results[i] = m
                if progress:
                    progress(i, m)
    else:
        for job in jobs:
            i, m = _run_indexed(job)
            results[i] = m
            if progress:
                progress(i, m)
    return BatchReport(
        runs=list(results),  # type: ignore[arg-type]
        capacity_threshold=3600.0 / t_sep,
        master_seed=int(master_seed),
        config={
            "t_sep": t_sep,
            "t_max": t_max,
            "rate_range": list(rate_range),
            "n_runs": n_runs,
            "gates": list(config.gates),
        },
    )


CSV_BASE = ["run", "seed"]
CSV_TAIL = ["n_aircraft", "faf_landing_rate", "violation_pct", "total_stretch", "makespan"]


def report_csv(report: BatchReport) -> str:
    gates = report.config.get("gates") or (list(report.runs[0].rates) if report.runs else [])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_BASE + [f"rate_{g}" for g in gates] + CSV_TAIL)
    for i, m in enumerate(report.runs):
        writer.writerow(
            [i, m.seed]
            + [m.rates.get(g, 0) for g in gates]
            + [m.n_aircraft, repr(m.faf_landing_rate), repr(m.violation_pct),
               repr(m.total_stretch), repr(m.makespan)]
        )
    return buf.getvalue()


def report_to_dict(report: BatchReport) -> Dict[str, Any]:
    return asdict(report)


def report_from_dict(doc: Dict[str, Any]) -> BatchReport:
    return BatchReport(
        runs=[RunMetrics(**r) for r in doc["runs"]],
        capacity_threshold=float(doc["capacity_threshold"]),
        master_seed=int(doc["master_seed"]),
        config=dict(doc["config"]),
        seed_rule=doc.get("seed_rule", SEED_RULE),
    )
