"""Closed-form trombone path geometry.

An arrival enters at a feeder gate, flies a straight tangent leg onto a
Radius-to-Fix turn circle, follows the arc until it is established on the
final course, then flies the Baseleg extension ``d`` along the final course
into the FAF.  Every quantity here is a smooth function of ``d``.

Coordinates are planar nautical miles with x east and y north.  The final
course runs along +x into the FAF.  Speeds are knots, times are seconds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Tuple

SECONDS_PER_HOUR = 3600.0
EPS_SING = 1e-6  # NM; minimum margin d0 - r before the tangent is treated as singular
TWO_PI = 2.0 * math.pi


class GeometryError(ValueError):
    """Base class for paths that cannot be constructed."""


class GeometryUndefinedError(GeometryError):
    """Entry point lies inside the band |y - y_faf| <= r around the final course."""


class NoTangentError(GeometryError):
    """Entry point is on or inside the turn circle (no tangent leg exists)."""


class GradientUnreliableError(GeometryError):
    """Evaluation point is too close to the tangency singularity for derivatives."""


class Point(NamedTuple):
    x: float
    y: float

    def __sub__(self, other):  # type: ignore[override]
        return Point(self.x - other[0], self.y - other[1])

    def __add__(self, other):  # type: ignore[override]
        return Point(self.x + other[0], self.y + other[1])

    def norm(self) -> float:
        return math.hypot(self.x, self.y)


def _dot(a, b) -> float:
    return a[0] * b[0] + a[1] * b[1]


def _cross(a, b) -> float:
    return a[0] * b[1] - a[1] * b[0]


DEFAULT_GATES = {
    "DALAS": Point(-21.21, 21.21),
    "LOGEN": Point(21.21, 21.21),
    "HUSKY": Point(21.21, -21.21),
    "TIROE": Point(-21.21, -21.21),
}


@dataclass(frozen=True)
class GeometryConfig:
    """Planar airspace: FAF, turn radius, feeder gates and the extension bound.

    The runway threshold is the origin.  ``tcp_radius`` only matters for plots.
    """

    faf: Point = Point(-5.0, 0.0)
    turn_radius_r: float = 2.0
    gates: Dict[str, Point] = field(default_factory=lambda: dict(DEFAULT_GATES))
    d_max: float = 15.0
    tcp_radius: float = 30.0

    def __post_init__(self):
        object.__setattr__(self, "faf", Point(*self.faf))
        object.__setattr__(self, "gates", {k: Point(*v) for k, v in self.gates.items()})
        if not (self.turn_radius_r > 0 and math.isfinite(self.turn_radius_r)):
            raise GeometryError(f"turn_radius_r must be positive, got {self.turn_radius_r}")
        if not (self.d_max >= 0 and math.isfinite(self.d_max)):
            raise GeometryError(f"d_max must be nonnegative, got {self.d_max}")
        for name, gate in self.gates.items():
            if not (math.isfinite(gate.x) and math.isfinite(gate.y)):
                raise GeometryError(f"gate {name} has non-finite coordinates")
            _branch(self, gate)
            # d0(d)^2 = (gx - xf + d)^2 + (gy - yc)^2 is minimised in closed form
            # over d in [0, d_max], which is stronger than any grid check.
            yc = turn_center(self, gate, 0.0)[0].y
            dx_lo = gate.x - self.faf.x
            dx = min(max(0.0, -dx_lo), self.d_max) + dx_lo
            if math.hypot(dx, gate.y - yc) <= self.turn_radius_r + EPS_SING:
                raise NoTangentError(
                    f"gate {name} comes within the turn circle for some d in [0, {self.d_max}]"
                )

    def gate(self, name: str) -> Point:
        try:
            return self.gates[name]
        except KeyError:
            raise KeyError(f"unknown gate {name!r}") from None


@dataclass(frozen=True)
class PathGeometry:
    turn_center: Point
    reference_projection: Point
    tangent_point: Point
    d_L: float
    theta: float
    d_theta: float
    d_final: float
    total_length: float


@dataclass(frozen=True)
class SpeedProfile:
    v_L: float
    v_theta: float
    v_f: float

    def __post_init__(self):
        if not (self.v_L >= self.v_theta >= self.v_f > 0):
            raise ValueError(
                f"speeds must satisfy v_L >= v_theta >= v_f > 0, got "
                f"({self.v_L}, {self.v_theta}, {self.v_f})"
            )

    def scaled(self, k: float) -> "SpeedProfile":
        return SpeedProfile(self.v_L * k, self.v_theta * k, self.v_f * k)


def _branch(config: GeometryConfig, entry) -> int:
    """+1 for north arrivals, -1 for south arrivals."""
    r = config.turn_radius_r
    if entry[1] > config.faf.y + r:
        return 1
    if entry[1] < config.faf.y - r:
        return -1
    raise GeometryUndefinedError(
        f"entry {tuple(entry)} lies within {r} NM of the final course y={config.faf.y}"
    )


def turn_center(config: GeometryConfig, entry, d: float) -> Tuple[Point, Point]:
    """Return the turn center and its projection onto the final course.

    The center sits one radius off the final course on the entry's side,
    ``d`` miles upstream of the FAF.
    """
    s = _branch(config, entry)
    x = config.faf.x - d
    return Point(x, config.faf.y + s * config.turn_radius_r), Point(x, config.faf.y)


def _center_offset(config: GeometryConfig, entry, d: float):
    c0, c0p = turn_center(config, entry, d)
    v = Point(entry[0] - c0.x, entry[1] - c0.y)
    d0_sq = v.x * v.x + v.y * v.y
    r = config.turn_radius_r
    if math.sqrt(d0_sq) <= r + EPS_SING:
        raise NoTangentError(
            f"entry {tuple(entry)} is within {EPS_SING} NM of the turn circle at d={d}"
        )
    return c0, c0p, v, d0_sq


def tangent_point(config: GeometryConfig, entry, d: float) -> Point:
    """Left tangent point of the turn circle as seen from ``entry``.

    ``C0 + a*v +/- b*v_perp`` with ``a = r^2/d0^2`` and
    ``b = r*sqrt(d0^2 - r^2)/d0^2``; the sign follows the entry side.
    """
    s = _branch(config, entry)
    c0, _, v, d0_sq = _center_offset(config, entry, d)
    r = config.turn_radius_r
    a = r * r / d0_sq
    b = r * math.sqrt(d0_sq - r * r) / d0_sq
    # v_perp = (-vy, vx)
    return Point(c0.x + a * v.x - s * b * v.y, c0.y + a * v.y + s * b * v.x)


def short_arc_angle(center, tangent, north: bool) -> float:
    """Angle in [0, pi] between the tangent-point radius and the exit radius."""
    px = tangent[0] - center[0]
    py = tangent[1] - center[1]
    return math.atan2(abs(px), -py if north else py)


def rf_angle(config: GeometryConfig, entry, d: float) -> float:
    """Central angle of the RF turn, in [0, 2*pi).

    The short arc is taken first.  If the inbound tangent leg would have to
    reverse to fly that short arc, the aircraft flies the complementary
    (reflex) arc instead.
    """
    s = _branch(config, entry)
    c0, c0p = turn_center(config, entry, d)
    cl = tangent_point(config, entry, d)
    theta = short_arc_angle(c0, cl, s > 0)
    if theta == 0.0:
        return 0.0
    radial = cl - c0
    # direction along the short arc from C_L toward C'_0
    ccw = _cross(radial, c0p - c0) > 0
    arc_dir = Point(-radial.y, radial.x) if ccw else Point(radial.y, -radial.x)
    inbound = cl - Point(*entry)
    if _dot(inbound, arc_dir) <= 0:
        theta = TWO_PI - theta
    return theta


def path_geometry(config: GeometryConfig, entry, d: float) -> PathGeometry:
    c0, c0p, _, d0_sq = _center_offset(config, entry, d)
    r = config.turn_radius_r
    d_l = math.sqrt(d0_sq - r * r)
    theta = rf_angle(config, entry, d)
    d_theta = r * theta
    return PathGeometry(
        turn_center=c0,
        reference_projection=c0p,
        tangent_point=tangent_point(config, entry, d),
        d_L=d_l,
        theta=theta,
        d_theta=d_theta,
        d_final=d,
        total_length=d_l + d_theta + d,
    )


def segment_times(geom: PathGeometry, speeds: SpeedProfile) -> Tuple[float, float, float]:
    return (
        SECONDS_PER_HOUR * geom.d_L / speeds.v_L,
        SECONDS_PER_HOUR * geom.d_theta / speeds.v_theta,
        SECONDS_PER_HOUR * geom.d_final / speeds.v_f,
    )


def travel_time(config: GeometryConfig, entry, d: float, speeds: SpeedProfile) -> float:
    """Seconds from gate entry to the FAF."""
    return sum(segment_times(path_geometry(config, entry, d), speeds))


def path_derivatives(config: GeometryConfig, entry, d: float) -> Tuple[float, float]:
    """Return (d d_L/dd, d theta/dd)."""
    c0, _, v, d0_sq = _center_offset(config, entry, d)
    r = config.turn_radius_r
    d0 = math.sqrt(d0_sq)
    if d0 - r < EPS_SING:
        raise GradientUnreliableError(f"d0 - r = {d0 - r} below {EPS_SING}")
    d_l = math.sqrt(d0_sq - r * r)
    # C_L sits at polar angle atan2(vy, vx) +/- acos(r/d0) around the center and
    # the arc sweeps from there to the exit radius, so theta moves opposite to it.
    dtheta = (abs(v.y) - r * v.x / d_l) / d0_sq
    return v.x / d_l, dtheta


def travel_time_gradient(
    config: GeometryConfig, entry, d: float, speeds: SpeedProfile
) -> Tuple[float, float, float, float]:
    """Partials of travel_time with respect to (d, v_L, v_theta, v_f)."""
    geom = path_geometry(config, entry, d)
    dl_dd, th_dd = path_derivatives(config, entry, d)
    h = SECONDS_PER_HOUR
    r = config.turn_radius_r
    return (
        h * (dl_dd / speeds.v_L + r * th_dd / speeds.v_theta + 1.0 / speeds.v_f),
        -h * geom.d_L / speeds.v_L ** 2,
        -h * geom.d_theta / speeds.v_theta ** 2,
        -h * geom.d_final / speeds.v_f ** 2,
    )


def position_along(
    config: GeometryConfig, entry, geom: PathGeometry, speeds: SpeedProfile, elapsed: float
) -> Point:
    """Aircraft position ``elapsed`` seconds after gate entry (clamped to the FAF)."""
    entry = Point(*entry)
    t_l, t_th, t_f = segment_times(geom, speeds)
    if elapsed <= 0.0:
        return entry
    if elapsed < t_l:
        frac = elapsed / t_l
        return entry + Point(*(frac * c for c in (geom.tangent_point - entry)))
    elapsed -= t_l
    if elapsed < t_th:
        # north arrivals turn left (counter-clockwise), south arrivals right
        turn = 1.0 if geom.turn_center.y > config.faf.y else -1.0
        radial = geom.tangent_point - geom.turn_center
        phi = math.atan2(radial.y, radial.x) + turn * geom.theta * (elapsed / t_th)
        r = config.turn_radius_r
        return Point(geom.turn_center.x + r * math.cos(phi), geom.turn_center.y + r * math.sin(phi))
    elapsed -= t_th
    start = geom.reference_projection
    if elapsed < t_f:
        return Point(start.x + geom.d_final * elapsed / t_f, start.y)
    return Point(config.faf.x, config.faf.y)


def sample_trajectory(
    config: GeometryConfig, entry, d: float, speeds: SpeedProfile, dt: float
) -> List[Tuple[float, Point]]:
    """Positions every ``dt`` seconds from entry, ending exactly at the FAF."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    geom = path_geometry(config, entry, d)
    total = sum(segment_times(geom, speeds))
    n = int(math.floor(total / dt))
    out = [(k * dt, position_along(config, entry, geom, speeds, k * dt)) for k in range(n + 1)]
    if out[-1][0] < total:
        out.append((total, Point(config.faf.x, config.faf.y)))
    else:
        out[-1] = (total, Point(config.faf.x, config.faf.y))
    return out
