"""Reflecting panel patch lattice and its partition into virtual groups.

A group set is fully described by which patches are organised into some
group: groups are the maximal runs of active patches, so two groups are
always separated by at least one idle patch.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import ConstraintViolation, InvalidScenarioError
from .geometry import EffectivePanel, ReflectionArea, SensitiveUser, Vec3, reflection_area
from .propagation import max_spacing


@dataclass(frozen=True)
class RppArray:
    count: int
    patch_length: float
    spacing: float
    standoff: float
    switch_time: float = 0.0
    height: float = 1.5
    decay: float | None = None

    def __post_init__(self):
        if self.count < 1:
            raise InvalidScenarioError("need at least one patch")
        if not self.patch_length > 0:
            raise InvalidScenarioError("patch length must be positive")
        if self.spacing < 0:
            raise InvalidScenarioError("patch spacing must be >= 0")
        if not self.standoff > 0:
            raise InvalidScenarioError("panels sit at y > 0 (standoff must be positive)")
        if self.switch_time < 0:
            raise InvalidScenarioError("switch time must be >= 0")
        if self.decay is not None and self.spacing > max_spacing(self.decay) + 1e-12:
            raise InvalidScenarioError(
                f"patch spacing {self.spacing:g} m exceeds 2*sqrt(ln2/decay) = {max_spacing(self.decay):.6g} m")

    @property
    def pitch(self) -> float:
        return self.patch_length + self.spacing

    def patch_span(self, e: int) -> tuple[float, float]:
        x0 = self.pitch * e
        return x0, x0 + self.patch_length

    def min_group_size(self, rated_speed: float) -> int:
        if self.switch_time == 0.0:
            return 0
        return math.ceil(rated_speed * self.switch_time / self.pitch - 1e-12)


@dataclass(frozen=True)
class VirtualGroup:
    start_idx: int
    end_idx: int
    active: bool = True
    rotation: float = math.pi / 2

    def __post_init__(self):
        if not 0 <= self.start_idx <= self.end_idx:
            raise InvalidScenarioError(f"bad group bounds ({self.start_idx}, {self.end_idx})")

    @property
    def size(self) -> int:
        return self.end_idx - self.start_idx + 1

    @property
    def bounds(self) -> tuple[int, int]:
        return self.start_idx, self.end_idx


@dataclass(frozen=True)
class VirtualGroupSet:
    groups: tuple[VirtualGroup, ...]
    n_patches: int
    ungrouped: frozenset[int] = field(init=False)

    def __post_init__(self):
        prev = -2
        for g in self.groups:
            if g.end_idx >= self.n_patches:
                raise InvalidScenarioError(f"group {g.bounds} exceeds the {self.n_patches}-patch array")
            if g.start_idx <= prev:
                raise InvalidScenarioError("groups must be sorted and must not overlap")
            prev = g.end_idx
        used = {e for g in self.groups for e in range(g.start_idx, g.end_idx + 1)}
        object.__setattr__(self, "ungrouped", frozenset(range(self.n_patches)) - used)

    def __len__(self) -> int:
        return len(self.groups)

    def __iter__(self):
        return iter(self.groups)

    def __getitem__(self, i: int) -> VirtualGroup:
        return self.groups[i]

    @classmethod
    def single(cls, n_patches: int) -> "VirtualGroupSet":
        return cls((VirtualGroup(0, n_patches - 1),), n_patches)

    @classmethod
    def from_bounds(cls, bounds: Iterable[Sequence[int]], n_patches: int) -> "VirtualGroupSet":
        return cls(tuple(VirtualGroup(int(a), int(b)) for a, b in sorted(bounds)), n_patches)

    @classmethod
    def from_mask(cls, mask: int | Sequence[bool], n_patches: int) -> "VirtualGroupSet":
        bits = _mask_bits(mask, n_patches)
        groups, start = [], None
        for e, on in enumerate(bits):
            if on and start is None:
                start = e
            elif not on and start is not None:
                groups.append(VirtualGroup(start, e - 1))
                start = None
        if start is not None:
            groups.append(VirtualGroup(start, n_patches - 1))
        return cls(tuple(groups), n_patches)

    def mask_bits(self) -> list[bool]:
        bits = [False] * self.n_patches
        for g in self.groups:
            for e in range(g.start_idx, g.end_idx + 1):
                bits[e] = True
        return bits

    def mask(self) -> int:
        return sum(1 << e for e, on in enumerate(self.mask_bits()) if on)

    def bounds(self) -> list[tuple[int, int]]:
        return [g.bounds for g in self.groups]

    def active_patches(self) -> int:
        return self.n_patches - len(self.ungrouped)

    def smallest(self) -> int:
        return min((g.size for g in self.groups), default=0)


def _mask_bits(mask, n: int) -> list[bool]:
    if isinstance(mask, int):
        return [bool((mask >> e) & 1) for e in range(n)]
    bits = [bool(b) for b in mask]
    if len(bits) != n:
        raise InvalidScenarioError("mask length does not match the array")
    return bits


def effective_panel(group: VirtualGroup, array: RppArray) -> EffectivePanel:
    x0 = array.pitch * group.start_idx
    x1 = array.pitch * group.end_idx + array.patch_length
    return EffectivePanel(Vec3(x0, array.standoff, array.height), Vec3(x1, array.standoff, array.height),
                          azimuth=group.rotation)


def patch_panel(e: int, array: RppArray, azimuth: float = math.pi / 2) -> EffectivePanel:
    x0, x1 = array.patch_span(e)
    return EffectivePanel(Vec3(x0, array.standoff, array.height), Vec3(x1, array.standoff, array.height),
                          azimuth=azimuth)


def group_area(group: VirtualGroup, array: RppArray, bs: Vec3, decay: float, threshold: float,
               receiver_y: float = 0.0) -> ReflectionArea:
    return reflection_area(bs, effective_panel(group, array), decay, threshold, receiver_y)


@dataclass(frozen=True)
class SsmEvent:
    time: float
    group: int
    action: str  # "activate" | "deactivate"


def ssm_schedule(areas: Sequence[ReflectionArea], rated_speed: float, switch_time: float,
                 check: bool = True) -> list[SsmEvent]:
    """Switching commands for a vehicle crossing the groups' reflection areas.

    Each activation is issued ``switch_time`` ahead of the area entry so the
    group is ready when the vehicle arrives; deactivation follows the exit.
    """
    if check:
        bad = [i for i, a in enumerate(areas) if a.ra_length < rated_speed * switch_time - 1e-12]
        if bad:
            raise ConstraintViolation(
                f"groups {bad} have reflection areas shorter than v_r*T_g = {rated_speed * switch_time:g} m")
    events = []
    for i, a in enumerate(areas):
        events.append(SsmEvent(a.ra_start / rated_speed - switch_time, i, "activate"))
        events.append(SsmEvent(a.ra_end / rated_speed, i, "deactivate"))
    events.sort(key=lambda ev: (ev.time, ev.group, ev.action != "deactivate"))
    return events


def active_at(events: Sequence[SsmEvent], t: float, switch_time: float) -> set[int]:
    """Groups whose activation has completed by ``t`` and not been revoked."""
    state: dict[int, bool] = {}
    for ev in events:
        if ev.action == "activate":
            if ev.time + switch_time <= t + 1e-12:
                state[ev.group] = True
        elif ev.time < t - 1e-12:
            state[ev.group] = False
    return {g for g, on in state.items() if on}


def colocation_time(su: SensitiveUser, area: ReflectionArea, rated_speed: float) -> float:
    """Time the vehicle and the user spend together inside ``area``."""
    t_in, t_out = area.ra_start / rated_speed, area.ra_end / rated_speed
    if su.speed == 0.0:
        return t_out - t_in if area.contains(su.encounter_x) else 0.0
    tj = su.encounter_x / rated_speed
    # user position x_j + v (t - t_j) inside [ra_start, ra_end]
    a = tj + (area.ra_start - su.encounter_x) / su.speed
    b = tj + (area.ra_end - su.encounter_x) / su.speed
    u_in, u_out = min(a, b), max(a, b)
    return max(0.0, min(t_out, u_out) - max(t_in, u_in))


def colocated_groups(su: SensitiveUser, areas: Sequence[ReflectionArea], rated_speed: float) -> list[int]:
    """Indices of all groups whose area the user shares with the vehicle, longest first."""
    scored = [(colocation_time(su, a, rated_speed), i) for i, a in enumerate(areas)]
    return [i for d, i in sorted(scored, key=lambda p: (-p[0], p[1])) if d > 0.0]


def influence_set(su: SensitiveUser, areas: Sequence[ReflectionArea], rated_speed: float) -> tuple[int, ...]:
    """Groups that can interfere with ``su``; at most two, in road order."""
    return tuple(sorted(colocated_groups(su, areas, rated_speed)[:2]))


def interference_duration(su: SensitiveUser, areas: Sequence[ReflectionArea], indices: Iterable[int],
                          rated_speed: float) -> float:
    total = 0.0
    for i in indices:
        a = areas[i]
        t_tv = a.ra_length / rated_speed
        if su.speed == 0.0:
            total += t_tv
            continue
        psi = a.ra_end - su.encounter_x if su.speed > 0 else su.encounter_x - a.ra_start
        total += min(t_tv, max(psi, 0.0) / abs(su.speed))
    return total


def split_comoving(su: SensitiveUser, areas: Sequence[ReflectionArea], rated_speed: float
                   ) -> list[tuple[SensitiveUser, tuple[int, ...]]]:
    """Treat a user that shares several areas with the vehicle as independent users.

    Users co-located with at most two groups come back unchanged with their
    influence set; otherwise one entry per group is returned.
    """
    groups = colocated_groups(su, areas, rated_speed)
    if len(groups) <= 2:
        return [(su, tuple(sorted(groups)))]
    return [(su, (i,)) for i in sorted(groups)]
