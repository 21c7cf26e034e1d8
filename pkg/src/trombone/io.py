"""Scenario, results and batch files (JSON, UTF-8).

Floats are written with Python's shortest round-trip repr, so every numeric
field survives a write/read cycle bit for bit.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import jsonschema

from .geometry import GeometryConfig, Point, SpeedProfile
from .nlp import AircraftPlan, Bounds, Solution, SolverParams, Weights, make_plan
from .simkit import BatchReport, RunMetrics, report_from_dict, report_to_dict
from .traffic import (
    DEFAULT_LAMBDA_MAX,
    DEFAULT_LAMBDA_MIN,
    DEFAULT_T_MAX,
    DEFAULT_T_SEP,
    Arrival,
    Scenario,
    build_scenario,
    rates_rng,
    sample_rates,
)

SCHEMA_VERSION = 1


class InputError(ValueError):
    """Malformed or inconsistent input file."""


@lru_cache(maxsize=None)
def schema(name: str) -> Dict[str, Any]:
    text = resources.files("trombone").joinpath("schemas", f"{name}.schema.json").read_text("utf-8")
    return json.loads(text)


def _validate(doc: Any, name: str, source: str) -> None:
    validator = jsonschema.Draft202012Validator(schema(name))
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for err in errors:
            where = ".".join(str(p) for p in err.absolute_path) or "<root>"
            lines.append(f"{source}: field {where}: {err.message}")
        raise InputError("\n".join(lines))


def read_json(path, name: str) -> Dict[str, Any]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: cannot read ({exc.strerror})") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    _validate(doc, name, str(path))
    return doc


def write_json(path, doc: Dict[str, Any]) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, allow_nan=False) + "\n", encoding="utf-8")


def _num(x: float) -> Optional[float]:
    return None if x is None or (isinstance(x, float) and math.isnan(x)) else float(x)


@dataclass
class ScenarioFile:
    config: GeometryConfig = field(default_factory=GeometryConfig)
    rates: Optional[Dict[str, float]] = None
    rate_range: Tuple[int, int] = (DEFAULT_LAMBDA_MIN, DEFAULT_LAMBDA_MAX)
    t_sep: float = DEFAULT_T_SEP
    t_max: float = DEFAULT_T_MAX
    seed: int = 0
    bounds: Bounds = field(default_factory=Bounds)
    weights: Weights = field(default_factory=Weights)
    solver_params: SolverParams = field(default_factory=SolverParams)
    arrivals: Optional[List[Arrival]] = None

    def materialize(self, seed: Optional[int] = None) -> "ScenarioFile":
        """Sample rates if needed and generate arrivals."""
        seed = self.seed if seed is None else int(seed)
        rates = self.rates
        if rates is None:
            rates = sample_rates(rates_rng(seed), *self.rate_range, gates=tuple(self.config.gates))
        sc = build_scenario(self.config, rates, self.t_sep, self.t_max, seed)
        return ScenarioFile(
            self.config, dict(rates), self.rate_range, self.t_sep, self.t_max, seed,
            self.bounds, self.weights, self.solver_params, list(sc.arrivals),
        )

    def scenario(self) -> Scenario:
        if self.arrivals is None:
            return self.materialize().scenario()
        return Scenario(
            config=self.config,
            arrivals=list(self.arrivals),
            rates=dict(self.rates or {}),
            t_sep=self.t_sep,
            horizon_t_max=self.t_max,
            rng_seed=self.seed,
        )


def scenario_file_from_dict(doc: Dict[str, Any], source: str = "<scenario>") -> ScenarioFile:
    _validate(doc, "scenario", source)
    g = doc.get("geometry", {})
    defaults = GeometryConfig()
    # GeometryError (geometric infeasibility) propagates unchanged
    config = GeometryConfig(
        faf=Point(*g.get("faf", defaults.faf)),
        turn_radius_r=float(g.get("turn_radius", defaults.turn_radius_r)),
        gates={k: Point(*v) for k, v in g.get("gates", defaults.gates).items()},
        d_max=float(g.get("d_max", defaults.d_max)),
        tcp_radius=float(g.get("tcp_radius", defaults.tcp_radius)),
    )
    tr = doc.get("traffic", {})
    rates = tr.get("rates")
    if rates is not None:
        unknown = sorted(set(rates) - set(config.gates))
        if unknown:
            raise InputError(f"{source}: field traffic.rates: unknown gates {unknown}")
    rate_range = tuple(tr.get("rate_range", (DEFAULT_LAMBDA_MIN, DEFAULT_LAMBDA_MAX)))
    if rate_range[0] > rate_range[1]:
        raise InputError(f"{source}: field traffic.rate_range: min exceeds max")
    try:
        b = doc.get("bounds", {})
        bounds = Bounds(d_max=config.d_max, **{k: tuple(v) for k, v in b.items()})
        weights = Weights(**doc.get("weights", {}))
        params = SolverParams(**doc.get("solver_params", {}))
    except ValueError as exc:
        raise InputError(f"{source}: {exc}") from None
    arrivals = None
    if "arrivals" in doc:
        arrivals = []
        rows = doc["arrivals"]
        for i, a in enumerate(rows):
            if a["id"] != i:
                raise InputError(f"{source}: field arrivals.{i}.id: expected {i}, got {a['id']}")
            if a["gate"] not in config.gates:
                raise InputError(f"{source}: field arrivals.{i}.gate: unknown gate {a['gate']!r}")
            if i and a["entry_time"] < rows[i - 1]["entry_time"]:
                raise InputError(f"{source}: field arrivals.{i}.entry_time: arrivals must be sorted")
            arrivals.append(Arrival(i, a["gate"], config.gate(a["gate"]), float(a["entry_time"])))
    return ScenarioFile(
        config=config,
        rates=None if rates is None else {k: rates[k] for k in rates},
        rate_range=(int(rate_range[0]), int(rate_range[1])),
        t_sep=float(tr.get("t_sep", DEFAULT_T_SEP)),
        t_max=float(tr.get("t_max", DEFAULT_T_MAX)),
        seed=int(tr.get("seed", 0)),
        bounds=bounds,
        weights=weights,
        solver_params=params,
        arrivals=arrivals,
    )


def scenario_file_to_dict(sf: ScenarioFile) -> Dict[str, Any]:
    cfg = sf.config
    traffic: Dict[str, Any] = {}
    if sf.rates is not None:
        traffic["rates"] = dict(sf.rates)
    traffic.update(rate_range=list(sf.rate_range), t_sep=sf.t_sep, t_max=sf.t_max, seed=sf.seed)
    doc: Dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "geometry": {
            "faf": [cfg.faf.x, cfg.faf.y],
            "turn_radius": cfg.turn_radius_r,
            "gates": {k: [p.x, p.y] for k, p in cfg.gates.items()},
            "d_max": cfg.d_max,
            "tcp_radius": cfg.tcp_radius,
        },
        "traffic": traffic,
        "bounds": {"v_L": list(sf.bounds.v_L), "v_theta": list(sf.bounds.v_theta), "v_f": list(sf.bounds.v_f)},
        "weights": asdict(sf.weights),
        "solver_params": asdict(sf.solver_params),
    }
    if sf.arrivals is not None:
        doc["arrivals"] = [{"id": a.id, "gate": a.gate, "entry_time": a.entry_time_tau} for a in sf.arrivals]
    return doc


def load_scenario_file(path) -> ScenarioFile:
    return scenario_file_from_dict(read_json(path, "scenario"), str(path))


def save_scenario_file(path, sf: ScenarioFile) -> None:
    write_json(path, scenario_file_to_dict(sf))


def solution_to_dict(solution: Solution, scenario: Scenario) -> Dict[str, Any]:
    plans = []
    for p in solution.plans:
        a = scenario.arrivals[p.arrival_id]
        plans.append({
            "arrival_id": p.arrival_id,
            "gate": a.gate,
            "entry_time": a.entry_time_tau,
            "d": p.d,
            "v_L": p.speeds.v_L,
            "v_theta": p.speeds.v_theta,
            "v_f": p.speeds.v_f,
            "faf_time": p.faf_time_t,
            "d_L": p.geometry.d_L,
            "theta": p.geometry.theta,
            "d_theta": p.geometry.d_theta,
            "total_length": p.geometry.total_length,
        })
    return {
        "sequence": solution.sequence,
        "plans": plans,
        "slacks_sigma": list(solution.slacks_sigma),
        "objective_total": _num(solution.objective_total),
        "components": {k: _num(v) for k, v in solution.components.items()},
        "status": solution.status,
        "iterations": solution.iterations,
        "greedy_objective": _num(solution.greedy_objective),
        "source": solution.source,
    }


def solution_from_dict(doc: Dict[str, Any], scenario: Scenario) -> Solution:
    """Rebuild a Solution; plan geometry and FAF times are recomputed from d and speeds."""
    plans: List[AircraftPlan] = [
        make_plan(scenario, p["arrival_id"], p["d"], SpeedProfile(p["v_L"], p["v_theta"], p["v_f"]))
        for p in doc["plans"]
    ]
    nan = math.nan
    return Solution(
        plans=plans,
        slacks_sigma=[float(s) for s in doc["slacks_sigma"]],
        objective_total=nan if doc["objective_total"] is None else float(doc["objective_total"]),
        components={k: nan if v is None else float(v) for k, v in doc["components"].items()},
        status=doc["status"],
        iterations=int(doc.get("iterations", 0)),
        greedy_objective=nan if doc.get("greedy_objective") is None else float(doc["greedy_objective"]),
        source=doc.get("source", "solver"),
    )


def metrics_to_dict(m: RunMetrics) -> Dict[str, Any]:
    return asdict(m)


def metrics_from_dict(doc: Dict[str, Any]) -> RunMetrics:
    names = {f.name for f in fields(RunMetrics)}
    return RunMetrics(**{k: v for k, v in doc.items() if k in names})


@dataclass
class ResultsFile:
    inputs: ScenarioFile
    solution: Solution
    metrics: RunMetrics
    quantized: Optional[Tuple[Solution, RunMetrics]] = None

    @property
    def scenario(self) -> Scenario:
        return self.inputs.scenario()


def results_to_dict(res: ResultsFile) -> Dict[str, Any]:
    sc = res.scenario
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "results",
        "inputs": scenario_file_to_dict(res.inputs),
        "solution": solution_to_dict(res.solution, sc),
        "metrics": metrics_to_dict(res.metrics),
    }
    if res.quantized is not None:
        qs, qm = res.quantized
        doc["quantized"] = {"solution": solution_to_dict(qs, sc), "metrics": metrics_to_dict(qm)}
    return doc


def results_from_dict(doc: Dict[str, Any], source: str = "<results>") -> ResultsFile:
    _validate(doc, "results", source)
    inputs = scenario_file_from_dict(doc["inputs"], f"{source}: inputs")
    if inputs.arrivals is None:
        raise InputError(f"{source}: field inputs.arrivals: results must echo materialized arrivals")
    sc = inputs.scenario()
    quantized = None
    if "quantized" in doc:
        q = doc["quantized"]
        quantized = (solution_from_dict(q["solution"], sc), metrics_from_dict(q["metrics"]))
    return ResultsFile(inputs, solution_from_dict(doc["solution"], sc), metrics_from_dict(doc["metrics"]), quantized)


def save_results(path, res: ResultsFile) -> None:
    write_json(path, results_to_dict(res))


def load_results(path) -> ResultsFile:
    return results_from_dict(read_json(path, "results"), str(path))


def batch_to_dict(report: BatchReport, inputs: Optional[ScenarioFile] = None) -> Dict[str, Any]:
    doc = {"schema_version": SCHEMA_VERSION, "kind": "batch", **report_to_dict(report)}
    if inputs is not None:
        doc["inputs"] = scenario_file_to_dict(inputs)
    return doc


def batch_from_dict(doc: Dict[str, Any], source: str = "<batch>") -> BatchReport:
    _validate(doc, "batch", source)
    return report_from_dict(doc)


def save_batch(path, report: BatchReport, inputs: Optional[ScenarioFile] = None) -> None:
    write_json(path, batch_to_dict(report, inputs))


def load_batch(path) -> BatchReport:
    return batch_from_dict(read_json(path, "batch"), str(path))


def load_any(path) -> Tuple[str, Any]:
    """Load a results or batch file, dispatching on its ``kind`` field."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"{path}: cannot read ({exc.strerror})") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    kind = doc.get("kind") if isinstance(doc, dict) else None
    if kind == "results":
        return kind, results_from_dict(doc, str(path))
    if kind == "batch":
        return kind, batch_from_dict(doc, str(path))
    raise InputError(f"{path}: field kind: expected 'results' or 'batch', got {kind!r}")
