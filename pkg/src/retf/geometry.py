"""Road topology and specular-reflection geometry.

Coordinate chart: the road is the line ``y = 0`` with the vehicle moving
toward ``+x``; the serving base station sits at ``y < 0`` and the roadside
reflecting panels at ``y > 0``.  Everything that matters for reflection is
horizontal; heights only enter distances and antenna elevation angles.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidScenarioError


@dataclass(frozen=True)
class Vec3:
    x: float
    y: float
    z: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(c) for c in (self.x, self.y, self.z)):
            raise InvalidScenarioError(f"non-finite coordinate in {self!r}")

    def __add__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def scaled(self, k: float) -> "Vec3":
        return Vec3(k * self.x, k * self.y, k * self.z)

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def unit(self) -> "Vec3":
        n = self.norm()
        if n == 0.0:
            raise InvalidScenarioError("cannot normalise a zero vector")
        return self.scaled(1.0 / n)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


def distance(a: Vec3, b: Vec3) -> float:
    return (a - b).norm()


def _require_unit(v: Vec3, name: str) -> None:
    if abs(v.norm() - 1.0) > 1e-9:
        raise InvalidScenarioError(f"{name} must have unit norm, got {v.norm():.6g}")


@dataclass(frozen=True)
class Transmitter:
    position: Vec3
    orientation: Vec3
    tx_power: float
    index: int = 0

    def __post_init__(self):
        if not self.tx_power > 0:
            raise InvalidScenarioError("transmit power must be positive")
        if self.index < 0:
            raise InvalidScenarioError("transmitter index must be >= 0")
        _require_unit(self.orientation, "transmitter orientation")

    @property
    def is_serving(self) -> bool:
        return self.index == 0


PAP_DEFAULT = Vec3(0.0, -1.0, 0.0)
SAP_DEFAULT = Vec3(0.0, 1.0, 0.0)


@dataclass(frozen=True)
class TargetVehicleState:
    position_x: float
    time: float
    speed: float
    pap_orientation: Vec3 = PAP_DEFAULT
    sap_orientation: Vec3 = SAP_DEFAULT
    height: float = 1.5

    def __post_init__(self):
        _require_unit(self.pap_orientation, "PAP orientation")
        _require_unit(self.sap_orientation, "SAP orientation")
        p, s = self.pap_orientation, self.sap_orientation
        if abs(p.x + s.x) > 1e-9 or abs(p.y + s.y) > 1e-9 or abs(p.z + s.z) > 1e-9:
            raise InvalidScenarioError("PAP and SAP must face opposite directions")

    @property
    def position(self) -> Vec3:
        return Vec3(self.position_x, 0.0, self.height)


@dataclass(frozen=True)
class SensitiveUser:
    """A user served by another transmitter.

    ``speed`` is signed: positive moves with the target vehicle, negative
    against it, zero is stationary.  ``encounter_x`` is where the target
    vehicle passes the user.
    """

    encounter_x: float
    lateral_y: float
    serving_index: int
    speed: float = 0.0
    height: float = 1.5

    def position_at(self, x: float) -> Vec3:
        return Vec3(x, self.lateral_y, self.height)

    @property
    def position(self) -> Vec3:
        return self.position_at(self.encounter_x)

    @property
    def is_mobile(self) -> bool:
        return self.speed != 0.0


@dataclass(frozen=True)
class EffectivePanel:
    """A straight reflecting panel.

    ``start``/``end`` describe the unrotated footprint (parallel to the road).
    A rotation pivots the panel about its centre; ``azimuth`` is the
    direction of the panel normal, ``pi/2`` meaning no rotation.
    """

    start: Vec3
    end: Vec3
    azimuth: float = math.pi / 2
    zenith: float = math.pi / 2

    def __post_init__(self):
        if not self.start.x < self.end.x:
            raise InvalidScenarioError("panel start must lie left of its end")
        if self.start.y != self.end.y:
            raise InvalidScenarioError("panel footprint must be parallel to the road")

    @property
    def length(self) -> float:
        return self.end.x - self.start.x

    @property
    def y(self) -> float:
        return self.start.y

    @property
    def center(self) -> Vec3:
        return Vec3(0.5 * (self.start.x + self.end.x), self.y, 0.5 * (self.start.z + self.end.z))

    @property
    def tangent(self) -> tuple[float, float]:
        return math.sin(self.azimuth), -math.cos(self.azimuth)

    @property
    def is_rotated(self) -> bool:
        return abs(self.azimuth - math.pi / 2) > 1e-12

    def rotated_endpoints(self) -> tuple[tuple[float, float], tuple[float, float]]:
        tx, ty = self.tangent
        c, h = self.center, 0.5 * self.length
        return (c.x - h * tx, c.y - h * ty), (c.x + h * tx, c.y + h * ty)

    def with_azimuth(self, azimuth: float) -> "EffectivePanel":
        return EffectivePanel(self.start, self.end, azimuth, self.zenith)


def idra_half_width(decay: float, threshold: float) -> float:
    """Width of one indirect reflection flank, where ``exp(-decay d^2)`` hits ``threshold``."""
    if not decay > 0:
        raise InvalidScenarioError("decay factor must be positive")
    if not 0 < threshold <= 1:
        raise InvalidScenarioError("threshold must lie in (0, 1]; zero gives an unbounded area")
    return math.sqrt(-math.log(threshold) / decay)


@dataclass(frozen=True)
class ReflectionArea:
    dra_start: float
    dra_end: float
    decay: float
    threshold: float
    ra_start: float = field(init=False)
    ra_end: float = field(init=False)

    def __post_init__(self):
        if self.dra_start > self.dra_end:
            raise InvalidScenarioError("DRA endpoints out of order")
        w = idra_half_width(self.decay, self.threshold)
        object.__setattr__(self, "ra_start", self.dra_start - w)
        object.__setattr__(self, "ra_end", self.dra_end + w)

    @property
    def ra_length(self) -> float:
        return self.ra_end - self.ra_start

    @property
    def dra_length(self) -> float:
        return self.dra_end - self.dra_start

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.dra_start + self.dra_end)

    def contains(self, x: float) -> bool:
        return self.ra_start <= x <= self.ra_end

    def label(self, x: float) -> str:
        if self.dra_start <= x <= self.dra_end:
            return "DRA"
        if self.contains(x):
            return "IDRA"
        return "GAP"

    def ratio(self, x: float) -> float:
        """Bias-loss power ratio of this area alone at road position ``x``."""
        if self.dra_start <= x <= self.dra_end:
            return 1.0
        d = self.dra_start - x if x < self.dra_start else x - self.dra_end
        r = math.exp(-self.decay * d * d)
        return r if r >= self.threshold else 0.0

    def ratio_array(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        d = np.maximum(np.maximum(self.dra_start - xs, xs - self.dra_end), 0.0)
        r = np.exp(-self.decay * d * d)
        return np.where(r >= self.threshold, r, 0.0)

    def on_road(self, length: float) -> "RoadSpan":
        """The part of the area the vehicle actually drives through, ``[0, length]``."""
        lo = min(max(self.ra_start, 0.0), length)
        return RoadSpan(lo, max(lo, min(self.ra_end, length)))


@dataclass(frozen=True)
class RoadSpan:
    """Stretch of road used for timing; duck-types the RA fields of :class:`ReflectionArea`."""

    ra_start: float
    ra_end: float

    @property
    def ra_length(self) -> float:
        return self.ra_end - self.ra_start

    def contains(self, x: float) -> bool:
        return self.ra_start <= x <= self.ra_end


def _mirror_factor(bs_y: float, panel_y: float, receiver_y: float) -> tuple[float, float]:
    # work in a chart where the receiver line is y = 0
    qy, py = bs_y - receiver_y, panel_y - receiver_y
    if qy == py:
        raise InvalidScenarioError("base station lies on the panel line")
    return (qy - 2.0 * py) / (qy - py), py / (qy - py)


def mirror_dra_endpoints(bs: Vec3, panel: EffectivePanel, receiver_y: float = 0.0) -> tuple[float, float]:
    """Road interval that an unrotated panel lights by pure specular reflection."""
    k, c = _mirror_factor(bs.y, panel.y, receiver_y)
    return k * panel.start.x + c * bs.x, k * panel.end.x + c * bs.x


def ra_length(panel: EffectivePanel, bs: Vec3, decay: float, threshold: float) -> float:
    k, _ = _mirror_factor(bs.y, panel.y, 0.0)
    return k * panel.length + 2.0 * idra_half_width(decay, threshold)


def reflect_across_line(px: float, py: float, ax: float, ay: float, tx: float, ty: float) -> tuple[float, float]:
    """Mirror image of ``(px, py)`` across the line through ``(ax, ay)`` with unit tangent ``(tx, ty)``."""
    dx, dy = px - ax, py - ay
    along = dx * tx + dy * ty
    return ax + 2.0 * along * tx - dx, ay + 2.0 * along * ty - dy


def landing_x(bs: Vec3, point: tuple[float, float], tangent: tuple[float, float], receiver_y: float = 0.0) -> float:
    """Where a ray from ``bs`` mirrored at ``point`` (on a line with ``tangent``) meets ``y = receiver_y``."""
    mx, my = reflect_across_line(bs.x, bs.y, point[0], point[1], *tangent)
    dy = point[1] - my
    if dy == 0.0:
        return math.copysign(math.inf, point[0] - mx)
    s = (receiver_y - my) / dy
    if s <= 0:
        # reflected ray heads away from the receiver line
        return math.nan
    x = mx + s * (point[0] - mx)
    nx, ny = -tangent[1], tangent[0]
    front = nx * (bs.x - point[0]) + ny * (bs.y - point[1])
    if front * (nx * (x - point[0]) + ny * (receiver_y - point[1])) <= 0:
        # the landing lies behind the panel: the ray would pass through it
        return math.nan
    return x


def reflection_area(bs: Vec3, panel: EffectivePanel, decay: float, threshold: float,
                    receiver_y: float = 0.0) -> ReflectionArea:
    if panel.is_rotated:
        p0, p1 = panel.rotated_endpoints()
        a = landing_x(bs, p0, panel.tangent, receiver_y)
        b = landing_x(bs, p1, panel.tangent, receiver_y)
        if not (math.isfinite(a) and math.isfinite(b)):
            raise InvalidScenarioError("rotated panel does not reflect onto the road")
        lo, hi = min(a, b), max(a, b)
    else:
        lo, hi = mirror_dra_endpoints(bs, panel, receiver_y)
    return ReflectionArea(lo, hi, decay, threshold)


@dataclass(frozen=True)
class ReflectingPoint:
    point: Vec3
    clamped: bool


def reflecting_point(bs: Vec3, vehicle: Vec3, panel: EffectivePanel) -> ReflectingPoint:
    """Specular point on the (possibly rotated) panel for the path ``bs -> panel -> vehicle``.

    Outside the direct reflection area the point is clamped to the nearer
    panel endpoint and flagged.
    """
    tx, ty = panel.tangent
    c = panel.center
    mx, my = reflect_across_line(bs.x, bs.y, c.x, c.y, tx, ty)
    # solve m + s (v - m) on the panel line: n . (p - c) = 0 with n = (-ty, tx)
    nx, ny = -ty, tx
    vx, vy = vehicle.x - mx, vehicle.y - my
    denom = nx * vx + ny * vy
    half = 0.5 * panel.length
    if denom == 0.0:
        along, clamped = half, True
    else:
        s = (nx * (c.x - mx) + ny * (c.y - my)) / denom
        qx, qy = mx + s * vx, my + s * vy
        along = (qx - c.x) * tx + (qy - c.y) * ty
        clamped = abs(along) > half
        along = max(-half, min(half, along))
    px, py = c.x + along * tx, c.y + along * ty
    d1 = math.hypot(px - bs.x, py - bs.y)
    d2 = math.hypot(vehicle.x - px, vehicle.y - py)
    frac = d1 / (d1 + d2) if d1 + d2 > 0 else 0.0
    pz = bs.z + (vehicle.z - bs.z) * frac
    return ReflectingPoint(Vec3(px, py, pz), clamped)


def specular_points(bs: Vec3, panel: EffectivePanel, rx_x, rx_y, rx_z):
    """Array version of :func:`reflecting_point`; returns ``(px, py, pz)`` arrays."""
    rx_x, rx_y, rx_z = np.broadcast_arrays(np.asarray(rx_x, float), np.asarray(rx_y, float),
                                           np.asarray(rx_z, float))
    tx, ty = panel.tangent
    c = panel.center
    mx, my = reflect_across_line(bs.x, bs.y, c.x, c.y, tx, ty)
    nx, ny = -ty, tx
    vx, vy = rx_x - mx, rx_y - my
    denom = nx * vx + ny * vy
    half = 0.5 * panel.length
    with np.errstate(divide="ignore", invalid="ignore"):
        s = (nx * (c.x - mx) + ny * (c.y - my)) / denom
        along = (mx + s * vx - c.x) * tx + (my + s * vy - c.y) * ty
    along = np.where(denom == 0.0, half, np.clip(along, -half, half))
    px, py = c.x + along * tx, c.y + along * ty
    d1 = np.hypot(px - bs.x, py - bs.y)
    d2 = np.hypot(rx_x - px, rx_y - py)
    pz = bs.z + (rx_z - bs.z) * d1 / (d1 + d2)
    return px, py, pz


def road_regions(length: float, n_regions: int = 3) -> list[tuple[float, float, str]]:
    """Centre/edge split of ``[0, length]``: the middle third is the centre."""
    a, b = length / n_regions, length * (n_regions - 1) / n_regions
    return [(0.0, a, "edge"), (a, b, "center"), (b, length, "edge")]


def region_of(x: float, length: float) -> str:
    return "center" if length / 3.0 <= x <= 2.0 * length / 3.0 else "edge"
