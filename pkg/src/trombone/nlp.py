"""Fixed-sequence trajectory optimization over extensions and segment speeds.

For each aircraft we choose the Baseleg extension ``d`` and the three segment
speeds.  FAF times follow from the path geometry (no free holding), the
landing order is fixed, and separation is a soft constraint penalised through
per-pair slacks ``sigma_k = max(0, t_{k-1} + T_sep - t_k)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .geometry import (
    GeometryError,
    PathGeometry,
    SpeedProfile,
    path_geometry,
    segment_times,
)
from .traffic import Scenario

STATUS_CONVERGED = "converged"
STATUS_ITERATION_LIMIT = "iteration-limit"
STATUS_INFEASIBLE = "infeasible-geometry"

COMPONENTS = ("sum_sigma", "makespan", "total_stretch", "speed_deficit")


@dataclass(frozen=True)
class Bounds:
    d_max: float = 15.0
    v_L: Tuple[float, float] = (180.0, 240.0)
    v_theta: Tuple[float, float] = (130.0, 200.0)
    v_f: Tuple[float, float] = (130.0, 160.0)

    def __post_init__(self):
        for name in ("v_L", "v_theta", "v_f"):
            lo, hi = getattr(self, name)
            object.__setattr__(self, name, (float(lo), float(hi)))
            if not 0 < lo <= hi:
                raise ValueError(f"{name} bounds must satisfy 0 < min <= max, got {(lo, hi)}")
        if not self.d_max >= 0:
            raise ValueError(f"d_max must be nonnegative, got {self.d_max}")
        lo, hi = self.tightened()
        if np.any(lo > hi):
            raise ValueError("speed bounds admit no profile with v_L >= v_theta >= v_f")

    def tightened(self) -> Tuple[np.ndarray, np.ndarray]:
        """Column bounds for (d, v_L, v_theta, v_f), tightened by the speed ordering.

        The tightened bounds describe the same feasible set but are
        nonincreasing along the speed chain.
        """
        (l1, h1), (l2, h2), (l3, h3) = self.v_L, self.v_theta, self.v_f
        h2 = min(h2, h1)
        h3 = min(h3, h2)
        l2 = max(l2, l3)
        l1 = max(l1, l2)
        return np.array([0.0, l1, l2, l3]), np.array([self.d_max, h1, h2, h3])

    def upper_speeds(self) -> SpeedProfile:
        hi = self.tightened()[1]
        return SpeedProfile(*hi[1:])

    def speed_max(self) -> np.ndarray:
        return np.array([self.v_L[1], self.v_theta[1], self.v_f[1]])

    def inv_span(self) -> np.ndarray:
        span = self.speed_max() - np.array([self.v_L[0], self.v_theta[0], self.v_f[0]])
        return np.array([1.0 / s if s > 0 else 0.0 for s in span])


@dataclass(frozen=True)
class Weights:
    w_safe: float = 1e4
    w_thru: float = 1.0
    w_eff: float = 0.1
    w_speed: float = 0.01

    def __post_init__(self):
        if not self.w_safe >= self.w_thru >= self.w_eff >= self.w_speed >= 0:
            raise ValueError("weights must satisfy w_safe >= w_thru >= w_eff >= w_speed >= 0")

    def as_array(self) -> np.ndarray:
        return np.array([self.w_safe, self.w_thru, self.w_eff, self.w_speed])


@dataclass(frozen=True)
class SolverParams:
    max_iter: int = 5000
    rel_tol: float = 1e-8
    window: int = 50
    eta: float = 0.5
    eta_min: float = 0.005
    n_restarts: int = 4
    restart_scale: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.max_iter < 1 or self.window < 1:
            raise ValueError("max_iter and window must be positive")
        if not (self.eta > 0 and 0 < self.eta_min <= self.eta):
            raise ValueError("need 0 < eta_min <= eta")
        if self.n_restarts < 0:
            raise ValueError("n_restarts must be nonnegative")


@dataclass(frozen=True)
class AircraftPlan:
    arrival_id: int
    d: float
    speeds: SpeedProfile
    faf_time_t: float
    geometry: PathGeometry


@dataclass(frozen=True)
class Solution:
    plans: List[AircraftPlan]
    slacks_sigma: List[float]
    objective_total: float
    components: Dict[str, float]
    status: str
    iterations: int = 0
    greedy_objective: float = math.nan
    source: str = "solver"

    @property
    def sequence(self) -> List[int]:
        return [p.arrival_id for p in self.plans]

    @property
    def faf_times(self) -> List[float]:
        return [p.faf_time_t for p in self.plans]


def separation_slacks(times: Sequence[float], t_sep: float) -> List[float]:
    """Hinge slacks for ranks 2..N given FAF times in landing order."""
    return [max(0.0, times[k - 1] + t_sep - times[k]) for k in range(1, len(times))]


def make_plan(scenario: Scenario, arrival_id: int, d: float, speeds: SpeedProfile) -> AircraftPlan:
    arrival = scenario.arrivals[arrival_id]
    geom = path_geometry(scenario.config, arrival.entry_point, d)
    t = arrival.entry_time_tau + sum(segment_times(geom, speeds))
    return AircraftPlan(arrival_id, float(d), speeds, t, geom)


def fcfs_sequence(scenario: Scenario, bounds: Optional[Bounds] = None) -> List[int]:
    """Landing order by nominal ETA (no extension, top speeds).

    Ties fall back to entry time, then id.  Geometry errors propagate.
    """
    bounds = bounds or Bounds(d_max=scenario.config.d_max)
    fast = bounds.upper_speeds()
    keyed = []
    for a in scenario.arrivals:
        eta = make_plan(scenario, a.id, 0.0, fast).faf_time_t
        keyed.append((eta, a.entry_time_tau, a.id))
    keyed.sort()
    return [k[2] for k in keyed]


def evaluate_objective(
    scenario: Scenario,
    sequence: Sequence[int],
    plans,
    weights: Weights = Weights(),
    bounds: Optional[Bounds] = None,
) -> Tuple[float, Dict[str, float]]:
    """Exact-hinge objective and its unweighted components.

    ``plans`` may be a sequence or a mapping keyed by arrival id.
    """
    bounds = bounds or Bounds(d_max=scenario.config.d_max)
    by_id = plans if isinstance(plans, Mapping) else {p.arrival_id: p for p in plans}
    ordered = [by_id[i] for i in sequence]
    times = [p.faf_time_t for p in ordered]
    vmax = bounds.speed_max()
    inv = bounds.inv_span()
    deficit = 0.0
    for p in ordered:
        v = (p.speeds.v_L, p.speeds.v_theta, p.speeds.v_f)
        deficit += sum((vmax[j] - v[j]) * inv[j] for j in range(3))
    comps = {
        "sum_sigma": float(sum(separation_slacks(times, scenario.t_sep))),
        "makespan": float(times[-1]) if times else 0.0,
        "total_stretch": float(sum(p.d for p in ordered)),
        "speed_deficit": float(deficit),
    }
    w = (weights.w_safe, weights.w_thru, weights.w_eff, weights.w_speed)
    total = sum(wi * comps[c] for wi, c in zip(w, COMPONENTS))
    return total, comps


class _Problem:
    """Arrays for one scenario in landing order, plus kernel wrappers."""

    def __init__(self, scenario: Scenario, sequence: Sequence[int], bounds: Bounds, weights: Weights):
        cfg = scenario.config
        arr = [scenario.arrivals[i] for i in sequence]
        self.scenario = scenario
        self.sequence = list(sequence)
        self.n = len(arr)
        self.tau = np.array([a.entry_time_tau for a in arr], dtype=float)
        self.ex = np.array([a.entry_point.x for a in arr], dtype=float)
        self.ey = np.array([a.entry_point.y for a in arr], dtype=float)
        self.side = np.where(self.ey > cfg.faf.y, 1.0, -1.0)
        self.xf, self.yf, self.r = float(cfg.faf.x), float(cfg.faf.y), float(cfg.turn_radius_r)
        self.tsep = float(scenario.t_sep)
        self.lo, self.hi = bounds.tightened()
        self.w = weights.as_array()
        self.vmax = bounds.speed_max()
        self.inv_span = bounds.inv_span()
        span = self.hi - self.lo
        speed_scale = max(float(span[1:].max()), 1.0)
        self.scale = np.array([max(float(span[0]), 1.0), speed_scale, speed_scale, speed_scale])

    def f(self, X: np.ndarray, eta: float):
        f, g, t, bad = kernels.objective(
            X, self.tau, self.ex, self.ey, self.side, self.xf, self.yf, self.r,
            self.tsep, eta, self.w, self.vmax, self.inv_span,
        )
        if bad >= 0:
            raise GeometryError(f"aircraft {self.sequence[bad]} has no valid path")
        return f, g, t

    def times(self, X: np.ndarray) -> np.ndarray:
        t, _, bad = kernels.flight_times(X, self.tau, self.ex, self.ey, self.side, self.xf, self.yf, self.r)
        if bad >= 0:
            raise GeometryError(f"aircraft {self.sequence[bad]} has no valid path")
        return t

    def project(self, X: np.ndarray) -> np.ndarray:
        return kernels.project(X, self.lo, self.hi)

    def row_time(self, k: int, row: np.ndarray) -> float:
        X = np.ascontiguousarray(row[None, :])
        t, _, bad = kernels.flight_times(
            X, self.tau[k:k + 1], self.ex[k:k + 1], self.ey[k:k + 1], self.side[k:k + 1],
            self.xf, self.yf, self.r,
        )
        if bad >= 0:
            raise GeometryError(f"aircraft {self.sequence[k]} has no valid path")
        return float(t[0])

    def nominal_row(self) -> np.ndarray:
        return np.array([0.0, self.hi[1], self.hi[2], self.hi[3]])


def _composite_row(p: _Problem, s: float) -> np.ndarray:
    """Delay path used by the greedy: slow down over s in [0, 1], then extend over [1, 2]."""
    lo, hi = p.lo, p.hi
    if s <= 1.0:
        row = np.array([0.0, *(hi[1:] - s * (hi[1:] - lo[1:]))])
    else:
        row = np.array([min(s - 1.0, 1.0) * hi[0], *lo[1:]])
    return p.project(row[None, :].copy())[0]


def _greedy_rows(p: _Problem) -> np.ndarray:
    X = np.empty((p.n, 4))
    t_prev = -math.inf
    for k in range(p.n):
        target = t_prev + p.tsep
        if p.row_time(k, _composite_row(p, 0.0)) >= target:
            s = 0.0
        elif p.row_time(k, _composite_row(p, 2.0)) < target:
            s = 2.0
        else:
            a, b = 0.0, 2.0
            while b - a > 1e-13:
                m = 0.5 * (a + b)
                if p.row_time(k, _composite_row(p, m)) >= target:
                    b = m
                else:
                    a = m
            s = b
        X[k] = _composite_row(p, s)
        t_prev = p.row_time(k, X[k])
    return X


def _build_solution(
    p: _Problem, X: np.ndarray, weights: Weights, bounds: Bounds, status: str, iterations: int,
    greedy_objective: float = math.nan, source: str = "solver",
) -> Solution:
    plans = [
        make_plan(p.scenario, aid, float(X[k, 0]), SpeedProfile(*map(float, X[k, 1:])))
        for k, aid in enumerate(p.sequence)
    ]
    total, comps = evaluate_objective(p.scenario, p.sequence, plans, weights, bounds)
    return Solution(
        plans=plans,
        slacks_sigma=separation_slacks([pl.faf_time_t for pl in plans], p.scenario.t_sep),
        objective_total=total,
        components=comps,
        status=status,
        iterations=iterations,
        greedy_objective=total if math.isnan(greedy_objective) else greedy_objective,
        source=source,
    )


def greedy_fcfs_solve(
    scenario: Scenario,
    sequence: Sequence[int],
    bounds: Optional[Bounds] = None,
    weights: Weights = Weights(),
) -> Solution:
    """Rank-by-rank minimal delay: slow down first, then extend the Baseleg.

    Each aircraft takes the smallest delay along that path that restores
    ``T_sep`` behind its predecessor.  When even the longest, slowest path is
    too early the residual shows up as a slack.
    """
    bounds = bounds or Bounds(d_max=scenario.config.d_max)
    if not sequence:
        return Solution([], [], 0.0, dict.fromkeys(COMPONENTS, 0.0), STATUS_CONVERGED, source="greedy")
    p = _Problem(scenario, sequence, bounds, weights)
    return _build_solution(p, _greedy_rows(p), weights, bounds, STATUS_CONVERGED, 0, source="greedy")


def _spg(p: _Problem, X0: np.ndarray, eta: float, params: SolverParams) -> Tuple[np.ndarray, int, bool]:
    """One projected-gradient run at fixed smoothing ``eta``; returns (X, iterations, converged)."""
    X, iters, converged, bad = kernels.spg(
        X0, p.tau, p.ex, p.ey, p.side, p.xf, p.yf, p.r, p.tsep, eta, p.w, p.vmax, p.inv_span,
        p.lo, p.hi, p.scale, params.max_iter, params.rel_tol, params.window,
    )
    if bad >= 0:
        raise GeometryError(f"aircraft {p.sequence[bad]} has no valid path")
    return X, iters, converged


def _tighten(p: _Problem, X: np.ndarray) -> np.ndarray:
    """Exact-hinge polish: pull each aircraft back toward its nominal path.

    Working in landing order, any aircraft that lands later than needed
    behind its predecessor moves along the segment to the no-delay
    configuration until the gap is exactly ``T_sep``.  This never increases
    the exact objective.
    """
    X = X.copy()
    nominal = p.nominal_row()
    t_prev = -math.inf
    for k in range(p.n):
        target = t_prev + p.tsep
        row = X[k]
        t_k = p.row_time(k, row)
        if t_k > target:
            if p.row_time(k, nominal) >= target:
                cand = nominal
            else:
                a, b = 0.0, 1.0  # t(a) >= target > t(b)
                for _ in range(60):
                    m = 0.5 * (a + b)
                    if p.row_time(k, row + m * (nominal - row)) >= target:
                        a = m
                    else:
                        b = m
                cand = row + a * (nominal - row)
            cand = p.project(cand[None, :].copy())[0]
            t_c = p.row_time(k, cand)
            if target <= t_c <= t_k:
                X[k] = cand
                t_k = t_c
        X[k] = _trade_stretch(p, k, X[k], t_k)
        t_prev = t_k
    return X


def _row_cost(p: _Problem, row: np.ndarray) -> float:
    return p.w[2] * row[0] + p.w[3] * float(np.dot(p.vmax - row[1:], p.inv_span))


def _trade_stretch(p: _Problem, k: int, row: np.ndarray, t_k: float) -> np.ndarray:
    """Swap path stretch for slower speeds at the same landing time when that is cheaper."""
    if row[0] <= p.lo[0]:
        return row
    short = np.array([p.lo[0], *row[1:]])
    slow = np.array([p.lo[0], *p.lo[1:]])
    if p.row_time(k, short) >= t_k or p.row_time(k, slow) < t_k:
        return row
    a, b = 0.0, 1.0  # t(a) < t_k <= t(b)
    for _ in range(60):
        m = 0.5 * (a + b)
        if p.row_time(k, short + m * (slow - short)) < t_k:
            a = m
        else:
            b = m
    cand = short + b * (slow - short)
    if _row_cost(p, cand) < _row_cost(p, row):
        return cand
    return row


def solve(
    scenario: Scenario,
    sequence: Sequence[int],
    bounds: Optional[Bounds] = None,
    weights: Weights = Weights(),
    params: SolverParams = SolverParams(),
) -> Solution:
    """Local minimiser of the weighted objective for a fixed landing order.

    Starts from the greedy schedule plus ``n_restarts`` perturbed copies,
    anneals the softplus width from ``eta`` down to ``eta_min``, polishes
    against the exact hinge, and returns the best of those and the greedy.
    """
    bounds = bounds or Bounds(d_max=scenario.config.d_max)
    if not sequence:
        return Solution([], [], 0.0, dict.fromkeys(COMPONENTS, 0.0), STATUS_CONVERGED)
    try:
        p = _Problem(scenario, sequence, bounds, weights)
        X_greedy = _greedy_rows(p)
    except GeometryError:
        return Solution([], [], math.nan, dict.fromkeys(COMPONENTS, math.nan), STATUS_INFEASIBLE)
    greedy = _build_solution(p, X_greedy, weights, bounds, STATUS_CONVERGED, 0, source="greedy")

    rng = np.random.default_rng(params.seed)
    starts = [X_greedy]
    for _ in range(params.n_restarts):
        noise = rng.standard_normal(X_greedy.shape) * p.scale * params.restart_scale
        starts.append(p.project(X_greedy + noise))

    etas = []
    eta = params.eta
    while eta > params.eta_min * (1 + 1e-12):
        etas.append(eta)
        eta /= 10.0
    etas.append(params.eta_min)

    best = None
    total_iters = 0
    for X in starts:
        converged = True
        for eta in etas:
            X, iters, ok = _spg(p, X, eta, params)
            total_iters += iters
            converged = ok
        X = _tighten(p, X)
        f_exact = p.f(X, 0.0)[0]
        if best is None or f_exact < best[0]:
            best = (f_exact, X, converged)

    _, X_best, converged = best
    status = STATUS_CONVERGED if converged else STATUS_ITERATION_LIMIT
    cand = _build_solution(p, X_best, weights, bounds, status, total_iters, greedy.objective_total)
    if cand.objective_total <= greedy.objective_total:
        return cand
    return Solution(
        plans=greedy.plans,
        slacks_sigma=greedy.slacks_sigma,
        objective_total=greedy.objective_total,
        components=greedy.components,
        status=status,
        iterations=total_iters,
        greedy_objective=greedy.objective_total,
        source="greedy",
    )


def quantize_speed(v: float, lo: float, step: float = 10.0) -> float:
    """Snap a speed down onto the ``step`` grid, never below ``lo``."""
    q = math.floor(v / step + 1e-9) * step
    return max(q, lo)


def quantize_solution(
    scenario: Scenario,
    solution: Solution,
    bounds: Optional[Bounds] = None,
    weights: Weights = Weights(),
    step: float = 10.0,
) -> Solution:
    """Snap every segment speed down to the ``step``-knot grid and re-time exactly.

    Flooring is monotone, so the speed ordering and upper bounds survive and
    every FAF time can only grow.
    """
    bounds = bounds or Bounds(d_max=scenario.config.d_max)
    lo = bounds.tightened()[0]
    plans = []
    for p in solution.plans:
        s = p.speeds
        speeds = SpeedProfile(
            quantize_speed(s.v_L, lo[1], step),
            quantize_speed(s.v_theta, lo[2], step),
            quantize_speed(s.v_f, lo[3], step),
        )
        plans.append(make_plan(scenario, p.arrival_id, p.d, speeds))
    seq = [p.arrival_id for p in plans]
    total, comps = evaluate_objective(scenario, seq, plans, weights, bounds)
    return Solution(
        plans=plans,
        slacks_sigma=separation_slacks([p.faf_time_t for p in plans], scenario.t_sep),
        objective_total=total,
        components=comps,
        status=solution.status,
        iterations=solution.iterations,
        greedy_objective=solution.greedy_objective,
        source="quantized",
    )
