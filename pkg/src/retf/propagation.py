"""Antenna pattern, path loss, reflection loss and bias loss.

All ratios are linear power ratios in ``[0, 1]`` unless stated otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidScenarioError
from .geometry import (EffectivePanel, ReflectionArea, Transmitter, Vec3, distance, reflecting_point,
                       specular_points)

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class AntennaPattern:
    """3GPP-style sector pattern (horizontal and vertical parabolic cuts)."""

    max_gain_db: float = 8.0
    beamwidth_3db: float = 65.0
    sidelobe_floor_db: float = 30.0
    vertical_sla: float = 30.0
    omni: bool = False

    def __post_init__(self):
        if not math.isfinite(self.max_gain_db):
            raise InvalidScenarioError("max gain must be finite")
        if not self.beamwidth_3db > 0:
            raise InvalidScenarioError("beamwidth must be positive")

    def attenuation_db(self, azimuth_off: float, elevation_off: float) -> float:
        """Attenuation in dB (non-negative) for offsets from boresight, in degrees."""
        a_h = min(12.0 * (azimuth_off / self.beamwidth_3db) ** 2, self.sidelobe_floor_db)
        a_v = min(12.0 * (elevation_off / self.beamwidth_3db) ** 2, self.vertical_sla)
        return min(a_h + a_v, self.sidelobe_floor_db)


OMNI = AntennaPattern(max_gain_db=0.0, omni=True)


def _wrap_deg(a: float) -> float:
    return (a + 180.0) % 360.0 - 180.0


def pointing_offsets(src: Vec3, dst: Vec3, orient: Vec3) -> tuple[float, float]:
    """Azimuth and elevation offsets (degrees) of ``dst`` seen from ``src`` relative to ``orient``."""
    d = dst - src
    h = math.hypot(d.x, d.y)
    if h == 0.0 and d.z == 0.0:
        raise InvalidScenarioError("antenna gain requested toward its own position")
    az = math.degrees(math.atan2(d.y, d.x) - math.atan2(orient.y, orient.x))
    el = math.degrees(math.atan2(d.z, h) - math.atan2(orient.z, math.hypot(orient.x, orient.y)))
    return _wrap_deg(az), el


def antenna_gain(panel_pos: Vec3, target_pos: Vec3, panel_orient: Vec3, pattern: AntennaPattern) -> float:
    if pattern.omni:
        return 1.0
    az, el = pointing_offsets(panel_pos, target_pos, panel_orient)
    return 10.0 ** ((pattern.max_gain_db - pattern.attenuation_db(az, el)) / 10.0)


def free_space_intercept_db(carrier_hz: float) -> float:
    """Intercept (dB at 1 m) of the free-space law ``20 log10(d) + 20 log10(f) - 147.55``."""
    return 20.0 * math.log10(carrier_hz) - 147.55


def uma_los_intercept_db(carrier_hz: float) -> float:
    """UMa LOS (below breakpoint): ``28 + 22 log10(d) + 20 log10(f_GHz)``."""
    return 28.0 + 20.0 * math.log10(carrier_hz / 1e9)


@dataclass(frozen=True)
class LossModel:
    carrier_hz: float = 3.5e9
    pl_exponent: float = 2.2
    pl_intercept_db: float | None = None
    reflection_loss_db: float = 10.0
    decay: float = math.log(10.0) / 4.0
    threshold: float = 0.1

    def __post_init__(self):
        if self.pl_intercept_db is None:
            object.__setattr__(self, "pl_intercept_db", uma_los_intercept_db(self.carrier_hz))
        if not self.reflection_loss_db >= 0:
            raise InvalidScenarioError("reflection loss must be >= 0 dB")
        if not self.decay > 0:
            raise InvalidScenarioError("decay factor must be positive")
        if not 0 < self.threshold <= 1:
            raise InvalidScenarioError("threshold must lie in (0, 1]")

    @property
    def reflection_ratio(self) -> float:
        return 10.0 ** (-self.reflection_loss_db / 10.0)

    def path_loss_db(self, d):
        return self.pl_intercept_db + 10.0 * self.pl_exponent * np.log10(d)

    def ratio_at_distance(self, d):
        return 10.0 ** (-self.path_loss_db(d) / 10.0)


def path_loss_ratio(a: Vec3, b: Vec3, model: LossModel) -> float:
    d = distance(a, b)
    if d == 0.0:
        raise InvalidScenarioError("path loss undefined at zero distance")
    return float(model.ratio_at_distance(d))


def reflex_path_loss_ratio(a: Vec3, p: Vec3, b: Vec3, model: LossModel) -> float:
    """Path loss over the unfolded two-stage distance ``d(a, p) + d(p, b)``."""
    d = distance(a, p) + distance(p, b)
    if d == 0.0:
        raise InvalidScenarioError("path loss undefined at zero distance")
    return float(model.ratio_at_distance(d))


def bias_loss_ratio(x: float, areas: Iterable[tuple[ReflectionArea, bool]]) -> float:
    total = 0.0
    for area, active in areas:
        if active:
            total += area.ratio(x)
    return min(total, 1.0)


def spacing_sum(dx, spacing: float, decay: float):
    """Combined ratio of two neighbouring flanks at offset ``dx`` into a gap of width ``spacing``."""
    dx = np.asarray(dx, dtype=float)
    return np.exp(-decay * dx ** 2) + np.exp(-decay * (spacing - dx) ** 2)


def max_spacing(decay: float) -> float:
    """Largest patch spacing for which overlapping flanks never drop below unit ratio."""
    return 2.0 * math.sqrt(math.log(2.0) / decay)


def direct_power(tx: Transmitter, rx_pos: Vec3, rx_orient: Vec3 | None, model: LossModel,
                 tx_pattern: AntennaPattern, rx_pattern: AntennaPattern = OMNI) -> float:
    g_tx = antenna_gain(tx.position, rx_pos, tx.orientation, tx_pattern)
    g_rx = 1.0 if rx_orient is None else antenna_gain(rx_pos, tx.position, rx_orient, rx_pattern)
    return tx.tx_power * path_loss_ratio(tx.position, rx_pos, model) * g_tx * g_rx


def reflex_power(tx: Transmitter, rx_pos: Vec3, rx_orient: Vec3 | None, p_star: Vec3, bias: float,
                 model: LossModel, tx_pattern: AntennaPattern, rx_pattern: AntennaPattern = OMNI) -> float:
    """Power arriving over ``tx -> p_star -> rx`` with reflection and bias losses.

    ``rx_orient=None`` means an omnidirectional receiver.
    """
    if bias <= 0.0:
        return 0.0
    g_tx = antenna_gain(tx.position, p_star, tx.orientation, tx_pattern)
    g_rx = 1.0 if rx_orient is None else antenna_gain(rx_pos, p_star, rx_orient, rx_pattern)
    pl = reflex_path_loss_ratio(tx.position, p_star, rx_pos, model)
    return tx.tx_power * pl * model.reflection_ratio * bias * g_tx * g_rx


def received_power(tx: Transmitter, rx: tuple[Vec3, Vec3 | None], model: LossModel,
                   pattern: AntennaPattern, panel: EffectivePanel | None = None,
                   areas: Sequence[tuple[ReflectionArea, bool]] = (),
                   rx_pattern: AntennaPattern | None = None) -> float:
    """Received power over the direct path, or over ``panel`` when one is given."""
    rx_pos, rx_orient = rx
    rx_pattern = pattern if rx_pattern is None else rx_pattern
    if panel is None:
        return direct_power(tx, rx_pos, rx_orient, model, pattern, rx_pattern)
    bias = bias_loss_ratio(rx_pos.x, areas)
    if bias == 0.0:
        return 0.0
    p_star = reflecting_point(tx.position, rx_pos, panel).point
    return reflex_power(tx, rx_pos, rx_orient, p_star, bias, model, pattern, rx_pattern)


def pattern_params(pattern: AntennaPattern, orient: Vec3) -> tuple[float, ...]:
    """Flat ``(az, el, gmax, bw, am, sla)`` tuple for the array kernels."""
    az = math.degrees(math.atan2(orient.y, orient.x))
    el = math.degrees(math.atan2(orient.z, math.hypot(orient.x, orient.y)))
    if pattern.omni:
        return az, el, 0.0, 1.0, 0.0, 0.0
    return az, el, pattern.max_gain_db, pattern.beamwidth_3db, pattern.sidelobe_floor_db, pattern.vertical_sla


def gain_db_array(dx, dy, dz, params: tuple[float, ...]) -> np.ndarray:
    az0, el0, gmax, bw, am, sla = params
    az = np.degrees(np.arctan2(dy, dx)) - az0
    az = (az + 180.0) % 360.0 - 180.0
    el = np.degrees(np.arctan2(dz, np.hypot(dx, dy))) - el0
    a_h = np.minimum(12.0 * (az / bw) ** 2, am)
    a_v = np.minimum(12.0 * (el / bw) ** 2, sla)
    return gmax - np.minimum(a_h + a_v, am)


def direct_power_array(tx: Transmitter, rx_x, rx_y, rx_z, rx_orient: Vec3 | None, model: LossModel,
                       tx_pattern: AntennaPattern, rx_pattern: AntennaPattern = OMNI) -> np.ndarray:
    """Vectorised :func:`direct_power` over receiver coordinates."""
    rx_x, rx_y, rx_z = np.broadcast_arrays(np.asarray(rx_x, float), np.asarray(rx_y, float), np.asarray(rx_z, float))
    q = tx.position
    dx, dy, dz = rx_x - q.x, rx_y - q.y, rx_z - q.z
    d = np.sqrt(dx * dx + dy * dy + dz * dz)
    if np.any(d == 0.0):
        raise InvalidScenarioError("path loss undefined at zero distance")
    g = gain_db_array(dx, dy, dz, pattern_params(tx_pattern, tx.orientation))
    if rx_orient is not None:
        g = g + gain_db_array(-dx, -dy, -dz, pattern_params(rx_pattern, rx_orient))
    return tx.tx_power * 10.0 ** ((g - model.path_loss_db(d)) / 10.0)


def reflex_power_array(tx: Transmitter, panel: EffectivePanel, rx_x, rx_y, rx_z, bias,
                       rx_orient: Vec3 | None, model: LossModel, tx_pattern: AntennaPattern,
                       rx_pattern: AntennaPattern = OMNI) -> np.ndarray:
    """Vectorised :func:`reflex_power` through one (possibly rotated) panel."""
    q = tx.position
    px, py, pz = specular_points(q, panel, rx_x, rx_y, rx_z)
    rx_x, rx_y, rx_z = np.broadcast_arrays(np.asarray(rx_x, float), np.asarray(rx_y, float), np.asarray(rx_z, float))
    d = np.sqrt((px - q.x) ** 2 + (py - q.y) ** 2 + (pz - q.z) ** 2) + \
        np.sqrt((rx_x - px) ** 2 + (rx_y - py) ** 2 + (rx_z - pz) ** 2)
    g = gain_db_array(px - q.x, py - q.y, pz - q.z, pattern_params(tx_pattern, tx.orientation))
    if rx_orient is not None:
        g = g + gain_db_array(px - rx_x, py - rx_y, pz - rx_z, pattern_params(rx_pattern, rx_orient))
    out = tx.tx_power * model.reflection_ratio * np.asarray(bias, float) * 10.0 ** ((g - model.path_loss_db(d)) / 10.0)
    return np.where(np.asarray(bias) > 0.0, out, 0.0)
