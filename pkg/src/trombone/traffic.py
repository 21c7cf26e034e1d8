"""Seeded arrival-flow generation: shifted Poisson streams per feeder gate."""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from .geometry import SECONDS_PER_HOUR, GeometryConfig, Point

DEFAULT_T_SEP = 66.0
DEFAULT_T_MAX = 3600.0
DEFAULT_LAMBDA_MIN = 1
DEFAULT_LAMBDA_MAX = 60
_MASK64 = (1 << 64) - 1


def stable_hash64(name: str) -> int:
    """64-bit hash of a string that does not change between interpreter runs."""
    return int.from_bytes(hashlib.blake2b(name.encode("utf-8"), digest_size=8).digest(), "little")


def gate_rng(seed: int, gate: str) -> np.random.Generator:
    """Independent substream for one gate: ``seed XOR stable_hash64(gate)``."""
    return np.random.default_rng((int(seed) ^ stable_hash64(gate)) & _MASK64)


def rates_rng(seed: int) -> np.random.Generator:
    return gate_rng(seed, "__rates__")


@dataclass(frozen=True)
class Arrival:
    id: int
    gate: str
    entry_point: Point
    entry_time_tau: float


@dataclass(frozen=True)
class Scenario:
    config: GeometryConfig
    arrivals: List[Arrival]
    rates: Dict[str, float]
    t_sep: float = DEFAULT_T_SEP
    horizon_t_max: float = DEFAULT_T_MAX
    rng_seed: int = 0

    def __len__(self):
        return len(self.arrivals)


def sample_rates(
    rng: np.random.Generator,
    lambda_min: int = DEFAULT_LAMBDA_MIN,
    lambda_max: int = DEFAULT_LAMBDA_MAX,
    gates: Sequence[str] = ("DALAS", "LOGEN", "HUSKY", "TIROE"),
) -> Dict[str, int]:
    """Draw one integer rate per gate, uniformly from {lambda_min, ..., lambda_max}."""
    if int(lambda_min) != lambda_min or int(lambda_max) != lambda_max:
        raise ValueError("rate bounds must be integers")
    if not 1 <= lambda_min <= lambda_max:
        raise ValueError(f"need 1 <= lambda_min <= lambda_max, got {lambda_min}, {lambda_max}")
    draws = rng.integers(int(lambda_min), int(lambda_max), size=len(gates), endpoint=True)
    return {g: int(v) for g, v in zip(gates, draws)}


def exp_sample_seconds(u: float, rate_lambda: float) -> float:
    """Inverse-CDF exponential sample, drawn in hours and returned in seconds."""
    return -math.log(u) / rate_lambda * SECONDS_PER_HOUR


def generate_stream(
    rng: np.random.Generator,
    gate: str,
    rate_lambda: float,
    t_sep: float = DEFAULT_T_SEP,
    t_max: float = DEFAULT_T_MAX,
) -> List[float]:
    """Entry times for one gate.

    Starting from a seed time of 0 (not itself an aircraft), each next time is
    the previous plus ``t_sep`` plus an exponential draw.  Times equal to
    ``t_max`` are kept; the stream stops at the first time beyond it.
    """
    if not rate_lambda > 0:
        raise ValueError(f"rate for {gate} must be positive, got {rate_lambda}")
    times: List[float] = []
    tau = 0.0
    while True:
        # 1 - U lies in (0, 1], so the log is finite
        u = 1.0 - rng.random()
        tau = tau + t_sep + exp_sample_seconds(u, rate_lambda)
        if tau > t_max:
            return times
        times.append(tau)


def build_scenario(
    config: GeometryConfig,
    rates: Mapping[str, float],
    t_sep: float = DEFAULT_T_SEP,
    t_max: float = DEFAULT_T_MAX,
    seed: int = 0,
) -> Scenario:
    """Merge the per-gate streams and index aircraft first-come-first-served.

    Ties in entry time are broken by gate name.
    """
    pending = []
    for gate, lam in rates.items():
        entry = config.gate(gate)
        if lam <= 0:
            continue
        for tau in generate_stream(gate_rng(seed, gate), gate, lam, t_sep, t_max):
            pending.append((tau, gate, entry))
    pending.sort(key=lambda p: (p[0], p[1]))
    arrivals = [Arrival(i, gate, entry, tau) for i, (tau, gate, entry) in enumerate(pending)]
    return Scenario(
        config=config,
        arrivals=arrivals,
        rates={g: rates[g] for g in rates},
        t_sep=float(t_sep),
        horizon_t_max=float(t_max),
        rng_seed=int(seed),
    )


def scenario_from_arrivals(
    config: GeometryConfig,
    arrivals: Sequence[tuple],
    t_sep: float = DEFAULT_T_SEP,
    t_max: float = DEFAULT_T_MAX,
    rates: Optional[Mapping[str, float]] = None,
    seed: int = 0,
) -> Scenario:
    """Scenario from explicit ``(gate, entry_time)`` pairs, e.g. hand-built cases."""
    ordered = sorted(arrivals, key=lambda a: (a[1], a[0]))
    return Scenario(
        config=config,
        arrivals=[Arrival(i, g, config.gate(g), float(tau)) for i, (g, tau) in enumerate(ordered)],
        rates=dict(rates or {}),
        t_sep=float(t_sep),
        horizon_t_max=float(t_max),
        rng_seed=int(seed),
    )
