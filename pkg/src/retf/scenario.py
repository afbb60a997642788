"""Runtime scenario: every entity and knob a simulation needs, already validated."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .channel import FadingConfig
from .errors import InvalidScenarioError
from .geometry import PAP_DEFAULT, SAP_DEFAULT, SensitiveUser, Transmitter, Vec3
from .propagation import AntennaPattern, LossModel
from .rpp import RppArray, VirtualGroup, VirtualGroupSet, group_area

MODES = ("geometry", "csi", "hybrid")
THERMAL_DBM_PER_HZ = -174.0


def thermal_noise_watts(bandwidth_hz: float, noise_figure_db: float = 0.0) -> float:
    return 10.0 ** ((THERMAL_DBM_PER_HZ + noise_figure_db - 30.0) / 10.0) * bandwidth_hz


@dataclass(frozen=True)
class CapacityParams:
    bandwidth_hz: float = 20e6
    num_rx: int = 2
    num_tx: int = 8
    noise_floor_w: float | None = None
    ilf: float = 1.0

    def __post_init__(self):
        if not self.bandwidth_hz > 0:
            raise InvalidScenarioError("bandwidth must be positive")
        if self.num_rx < 1:
            raise InvalidScenarioError("need at least one receive antenna")
        if self.num_tx < self.num_rx:
            raise InvalidScenarioError("need at least as many transmit as receive antennas")
        if self.noise_floor_w is None:
            object.__setattr__(self, "noise_floor_w", thermal_noise_watts(self.bandwidth_hz))
        if self.noise_floor_w < 0:
            raise InvalidScenarioError("noise floor must be >= 0")
        if self.ilf < 0:
            raise InvalidScenarioError("interference level factor must be >= 0")


@dataclass(frozen=True)
class Scenario:
    road_length: float
    transmitters: tuple[Transmitter, ...]
    sus: tuple[SensitiveUser, ...]
    array: RppArray
    loss: LossModel = field(default_factory=LossModel)
    bs_pattern: AntennaPattern = field(default_factory=AntennaPattern)
    tv_pattern: AntennaPattern = field(default_factory=AntennaPattern)
    capacity: CapacityParams = field(default_factory=CapacityParams)
    fading: FadingConfig = field(default_factory=FadingConfig)
    tv_speed: float = 15.0
    tv_height: float = 1.5
    time_step: float = 1e-3
    capacity_mode: str = "geometry"
    rct_team_size: int = 1
    rct_max_distance: float = math.inf
    eigen_threshold: float = 0.01
    su_power_factor: float = 1.0
    csi_age: float = 0.0
    csi_horizon: float = math.inf
    initial_groups: tuple[tuple[int, int], ...] | None = None
    seed: int = 0
    pap: Vec3 = PAP_DEFAULT
    sap: Vec3 = SAP_DEFAULT

    def __post_init__(self):
        if not self.road_length > 0:
            raise InvalidScenarioError("road length must be positive")
        if not self.transmitters:
            raise InvalidScenarioError("need at least the serving transmitter")
        if [t.index for t in self.transmitters] != list(range(len(self.transmitters))):
            raise InvalidScenarioError("transmitter indices must be 0..N_G in order")
        if not self.time_step > 0:
            raise InvalidScenarioError("time step must be positive")
        if not self.tv_speed > 0:
            raise InvalidScenarioError("rated speed must be positive")
        if self.capacity_mode not in MODES:
            raise InvalidScenarioError(f"capacity mode must be one of {MODES}")
        if self.rct_team_size < 1:
            raise InvalidScenarioError("team size must be >= 1")
        bs = self.transmitters[0].position
        if not bs.y < 0 < self.array.standoff:
            raise InvalidScenarioError("serving BS must sit at y < 0 and panels at y > 0")
        n_g = len(self.transmitters) - 1
        for j, su in enumerate(self.sus):
            if not 1 <= su.serving_index <= n_g:
                raise InvalidScenarioError(f"SU {j} serving index {su.serving_index} not in 1..{n_g}")

    @property
    def bs(self) -> Transmitter:
        return self.transmitters[0]

    @property
    def interferers(self) -> tuple[Transmitter, ...]:
        return self.transmitters[1:]

    @property
    def duration(self) -> float:
        return self.road_length / self.tv_speed

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.duration / self.time_step)))

    @property
    def dt(self) -> float:
        return self.duration / self.n_steps

    @cached_property
    def times(self) -> np.ndarray:
        return (np.arange(self.n_steps) + 0.5) * self.dt

    @cached_property
    def positions(self) -> np.ndarray:
        return self.tv_speed * self.times

    @property
    def min_group_size(self) -> int:
        return self.array.min_group_size(self.tv_speed)

    @property
    def csi_fresh(self) -> bool:
        return self.csi_age <= self.csi_horizon

    def effective_mode(self) -> str:
        if self.capacity_mode == "hybrid":
            return "csi" if self.csi_fresh else "geometry"
        return self.capacity_mode

    def area(self, group: VirtualGroup, receiver_y: float = 0.0):
        return group_area(group, self.array, self.bs.position, self.loss.decay, self.loss.threshold, receiver_y)

    def areas(self, groups: VirtualGroupSet, receiver_y: float = 0.0):
        return [self.area(g, receiver_y) for g in groups]

    def initial_group_set(self) -> VirtualGroupSet:
        if self.initial_groups is None:
            return VirtualGroupSet.single(self.array.count)
        return VirtualGroupSet.from_bounds(self.initial_groups, self.array.count)

    def tv_position(self, x: float) -> Vec3:
        return Vec3(x, 0.0, self.tv_height)
