"""Command-line interface: generate, solve, mc, plot.

Exit codes: 0 success, 2 input error, 3 geometric infeasibility.
Relative input paths that do not exist are also looked up in
``$TROMBONE_CONFIG_DIR``.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from .geometry import GeometryError
from .io import (
    InputError,
    ResultsFile,
    load_any,
    load_scenario_file,
    save_batch,
    save_results,
    save_scenario_file,
)
from .nlp import STATUS_INFEASIBLE, fcfs_sequence, quantize_solution, solve
from .simkit import report_csv, run_batch, solution_metrics
from .svg import scatter_svg, snapshot_svg

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_GEOMETRY = 3
CONFIG_DIR_ENV = "TROMBONE_CONFIG_DIR"

log = logging.getLogger("trombone")


def resolve_input(path: str) -> Path:
    p = Path(path)
    if p.exists() or p.is_absolute():
        return p
    base = os.environ.get(CONFIG_DIR_ENV)
    if base and (Path(base) / p).exists():
        return Path(base) / p
    return p


def cmd_generate(args) -> int:
    src = resolve_input(args.scenario)
    sf = load_scenario_file(src)
    out = Path(args.out) if args.out else src
    mat = sf.materialize(seed=args.seed)
    save_scenario_file(out, mat)
    print(f"{len(mat.arrivals)} aircraft (seed {mat.seed}, t_sep {mat.t_sep:g} s) -> {out}")
    return EXIT_OK


def cmd_solve(args) -> int:
    sf = load_scenario_file(resolve_input(args.scenario))
    if sf.arrivals is None:
        sf = sf.materialize()
    scenario = sf.scenario()
    sequence = fcfs_sequence(scenario, sf.bounds)
    solution = solve(scenario, sequence, sf.bounds, sf.weights, sf.solver_params)
    if solution.status == STATUS_INFEASIBLE:
        raise GeometryError("at least one aircraft has no valid trombone path")
    metrics = solution_metrics(solution, sf.seed, sf.rates)
    quantized = None
    if args.quantize_speeds:
        q = quantize_solution(scenario, solution, sf.bounds, sf.weights)
        quantized = (q, solution_metrics(q, sf.seed, sf.rates))
    save_results(args.results, ResultsFile(sf, solution, metrics, quantized))
    print(
        f"{len(solution.plans)} aircraft, status {solution.status}, objective "
        f"{solution.objective_total:.6g}, sum sigma {metrics.sum_sigma:.3f} s, "
        f"stretch {metrics.total_stretch:.3f} NM"
    )
    if quantized:
        qm = quantized[1]
        print(f"quantized: objective {quantized[0].objective_total:.6g}, sum sigma {qm.sum_sigma:.3f} s")
    return EXIT_OK


def cmd_mc(args) -> int:
    sf = load_scenario_file(resolve_input(args.scenario))
    seed = sf.seed if args.seed is None else args.seed

    def progress(i, m):
        log.info("run %d: %d aircraft, rate %.2f/h, violations %.1f%%", i, m.n_aircraft,
                 m.faf_landing_rate, m.violation_pct)

    report = run_batch(
        sf.config, sf.bounds, sf.weights, sf.t_sep, sf.t_max, args.runs, seed,
        sf.solver_params, sf.rate_range, workers=args.workers, progress=progress,
    )
    out = Path(args.out)
    if out.suffix in (".json", ".csv"):
        out = out.with_suffix("")
    out.with_suffix(".csv").write_text(report_csv(report), encoding="utf-8")
    save_batch(out.with_suffix(".json"), report, sf)
    print(f"{args.runs} runs -> {out.with_suffix('.csv')}, {out.with_suffix('.json')}")
    return EXIT_OK


def cmd_plot(args) -> int:
    kind, obj = load_any(resolve_input(args.input))
    if args.scatter:
        if kind != "batch":
            raise InputError(f"{args.input}: --scatter needs a batch report")
        svg = scatter_svg(obj)
    else:
        if kind != "results":
            raise InputError(f"{args.input}: --snapshot needs a results file")
        solution = obj.solution
        makespan = max(solution.faf_times, default=0.0)
        if not 0.0 <= args.snapshot <= makespan:
            print(f"warning: t={args.snapshot} outside [0, {makespan:.1f}]; airspace is empty",
                  file=sys.stderr)
        svg = snapshot_svg(obj.scenario, solution, args.snapshot)
    Path(args.out).write_text(svg, encoding="utf-8")
    print(f"wrote {args.out}")
    return EXIT_OK


def _positive_runs(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trombone", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="materialize arrivals into a scenario file")
    p.add_argument("scenario")
    p.add_argument("--seed", type=int, help="override traffic.seed")
    p.add_argument("--out", help="output path (default: overwrite the input)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", help="sequence and optimize one scenario")
    p.add_argument("scenario")
    p.add_argument("results")
    p.add_argument("--quantize-speeds", action="store_true",
                   help="also report speeds floored to 10-knot steps")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("mc", help="Monte Carlo batch with sampled rates")
    p.add_argument("scenario")
    p.add_argument("--runs", type=_positive_runs, default=1000)
    p.add_argument("--out", required=True, help="output prefix for .csv and .json")
    p.add_argument("--seed", type=int, help="master seed (default: traffic.seed)")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("plot", help="SVG snapshot of a results file or scatter of a batch")
    p.add_argument("input")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--snapshot", type=float, metavar="T")
    mode.add_argument("--scatter", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except GeometryError as exc:
        print(f"geometry error: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
