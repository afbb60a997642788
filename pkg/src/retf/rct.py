"""Rotational collaborative teams.

An assisting group (AVRG) rotates its patches so its reflections land on the
reflection area of the group currently serving the vehicle (MVRG).  Groups
alternate between two teams by road order: while one team serves, the other
pre-rotates for the next area.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .capacity import reflector_power, tv_reflex_power
from .errors import InvalidScenarioError
from .geometry import EffectivePanel, ReflectionArea, Vec3, landing_x, reflection_area, specular_points
from .rpp import RppArray, VirtualGroup, VirtualGroupSet, effective_panel, patch_panel
from .scenario import Scenario

UNROTATED = math.pi / 2


def rotation_angle(target_x: float, pivot: Vec3, bs: Vec3, receiver_y: float = 0.0) -> float:
    """Normal azimuth in ``(0, pi)`` that reflects the ray ``bs -> pivot`` onto ``(target_x, receiver_y)``.

    With ``h`` the offset from the pivot to the target, ``h0`` the offset from
    the BS to the target, ``d0`` the pivot's height above the receiver line and
    ``q0`` the BS's depth below it, the normal bisects the two unit rays, so
    ``tan(alpha) = ((sigma + 1) d0 + q0) / (h0 - (sigma + 1) h)`` with the
    distance factor ``sigma = sqrt((h - h0)^2 + (d0 + q0)^2) / sqrt(h^2 + d0^2)``.
    A zero denominator means the panel stays parallel to the road.
    """
    h = target_x - pivot.x
    h0 = target_x - bs.x
    d0 = pivot.y - receiver_y
    q0 = receiver_y - bs.y
    if d0 <= 0 or q0 <= 0:
        raise InvalidScenarioError("rotation needs the BS and the panel on opposite sides of the receiver line")
    sigma = distance_factor(h, h0, d0, q0)
    num = (sigma + 1.0) * d0 + q0
    den = h0 - (sigma + 1.0) * h
    if den == 0.0:
        return UNROTATED
    return math.atan2(num, den)


def distance_factor(h: float, h0: float, d0: float, q0: float) -> float:
    return math.hypot(h - h0, d0 + q0) / math.hypot(h, d0)


def group_rotation(mvrg: VirtualGroup, avrg: VirtualGroup, sc: Scenario) -> float:
    """Rotation of ``avrg`` that puts its centre's reflection on the MVRG's DRA midpoint."""
    if mvrg.bounds == avrg.bounds:
        raise InvalidScenarioError("a group cannot assist itself")
    target = sc.area(mvrg).midpoint
    return rotation_angle(target, effective_panel(avrg, sc.array).center, sc.bs.position)


def landing_of(bs: Vec3, panel: EffectivePanel, receiver_y: float = 0.0) -> tuple[float, float]:
    """Road interval hit by the specular rays off the panel's two ends (nan if they miss)."""
    p0, p1 = panel.rotated_endpoints()
    a = landing_x(bs, p0, panel.tangent, receiver_y)
    b = landing_x(bs, p1, panel.tangent, receiver_y)
    if not (math.isfinite(a) and math.isfinite(b)):
        return math.nan, math.nan
    return min(a, b), max(a, b)


def active_patch_bounds(mvrg: VirtualGroup, avrg: VirtualGroup, sc: Scenario,
                        rotation: float | None = None) -> tuple[int, int] | None:
    """First and last AVRG patch kept on after rotation; ``None`` when nothing lands usefully.

    Each patch pivots about its own centre.  Patches whose reflections fall
    wholly beyond the MVRG's DRA ends are switched off: the first kept patch
    is the last one whose landing starts at or before the DRA start, the last
    kept is the first one whose landing ends at or after the DRA end.
    """
    alpha = group_rotation(mvrg, avrg, sc) if rotation is None else rotation
    target = sc.area(mvrg)
    b_lo, b_hi = target.dra_start, target.dra_end
    idx = list(range(avrg.start_idx, avrg.end_idx + 1))
    lands = [landing_of(sc.bs.position, patch_panel(e, sc.array, alpha)) for e in idx]
    ok = [k for k, (lo, _) in enumerate(lands) if math.isfinite(lo)]
    if not ok:
        return None
    # walk patches in the order their landings advance along the road
    order = sorted(ok, key=lambda k: lands[k][0])
    first = order[0]
    for k in order:
        if lands[k][0] <= b_lo:
            first = k
    last = order[-1]
    for k in reversed(order):
        if lands[k][1] >= b_hi:
            last = k
    pos = {k: n for n, k in enumerate(order)}
    if pos[first] > pos[last]:
        return None
    kept = order[pos[first]:pos[last] + 1]
    if not any(lands[k][1] >= b_lo and lands[k][0] <= b_hi for k in kept):
        return None
    ks = sorted(kept)
    return idx[ks[0]], idx[ks[-1]]


@dataclass(frozen=True)
class RotationEntry:
    group: int
    rotation: float
    active_range: tuple[int, int] | None

    @property
    def contributes(self) -> bool:
        return self.active_range is not None


@dataclass(frozen=True)
class RotationPlan:
    mvrg: int
    entries: tuple[RotationEntry, ...]

    def as_dict(self) -> dict:
        return {"mvrg": self.mvrg,
                "entries": [{"group": e.group, "rotation": e.rotation,
                             "active_range": list(e.active_range) if e.active_range else None}
                            for e in self.entries]}


@dataclass(frozen=True)
class RctAssignment:
    teams: tuple[tuple[int, ...], tuple[int, ...]]

    def team_of(self, group: int) -> int:
        return 0 if group in self.teams[0] else 1


def ans_assign(n_groups: int | VirtualGroupSet) -> RctAssignment:
    """Alternate groups between two teams in road order."""
    n = len(n_groups) if isinstance(n_groups, VirtualGroupSet) else int(n_groups)
    if n < 0:
        raise InvalidScenarioError("group count must be >= 0")
    return RctAssignment((tuple(range(0, n, 2)), tuple(range(1, n, 2))))


def assistants(mvrg: int, groups: VirtualGroupSet, sc: Scenario, team_size: int | None = None) -> list[int]:
    """Same-team groups nearest to the MVRG, up to ``team_size - 1`` of them."""
    size = sc.rct_team_size if team_size is None else team_size
    if size <= 1:
        return []
    teams = ans_assign(len(groups))
    team = teams.teams[teams.team_of(mvrg)]
    c0 = effective_panel(groups[mvrg], sc.array).center.x
    cand = []
    for i in team:
        if i == mvrg:
            continue
        d = abs(effective_panel(groups[i], sc.array).center.x - c0)
        if d <= sc.rct_max_distance:
            cand.append((d, i))
    cand.sort()
    return [i for _, i in cand[:size - 1]]


def plan_for(mvrg: int, groups: VirtualGroupSet, sc: Scenario, team_size: int | None = None) -> RotationPlan:
    entries = []
    for i in assistants(mvrg, groups, sc, team_size):
        try:
            alpha = group_rotation(groups[mvrg], groups[i], sc)
            rng = active_patch_bounds(groups[mvrg], groups[i], sc, alpha)
        except InvalidScenarioError:
            alpha, rng = UNROTATED, None
        entries.append(RotationEntry(i, alpha, rng))
    return RotationPlan(mvrg, tuple(entries))


def entry_panels(entry: RotationEntry, array: RppArray) -> list[EffectivePanel]:
    if entry.active_range is None:
        return []
    a, b = entry.active_range
    return [patch_panel(e, array, entry.rotation) for e in range(a, b + 1)]


def assist_profile(entry: RotationEntry, sc: Scenario, xs, rx_orient: Vec3 | None = None,
                   rx_pattern=None, rx_y: float = 0.0, rx_z: float | None = None
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Reflex power of one rotated AVRG at road positions ``xs`` and the specular x used.

    The AVRG's patches combine like one effective panel: their bias ratios add
    up to at most one and the strongest patch provides the specular point.
    """
    xs = np.asarray(xs, dtype=float)
    panels = entry_panels(entry, sc.array)
    if not panels:
        return np.zeros_like(xs), np.full_like(xs, math.nan)
    z = sc.tv_height if rx_z is None else rx_z
    pattern = sc.tv_pattern if rx_pattern is None else rx_pattern
    orient = sc.sap if rx_orient is None else rx_orient
    power, dom = reflector_power(sc, panels, None, xs, rx_y, z, orient, pattern, receiver_y=rx_y)
    via = np.full_like(xs, math.nan)
    for i, p in enumerate(panels):
        sel = dom == i
        if np.any(sel):
            via[sel] = specular_points(sc.bs.position, p, xs[sel], rx_y, z)[0]
    return power, via


def rct_enhancement(x: float, plan: RotationPlan, sc: Scenario, groups: VirtualGroupSet) -> float:
    """Total SAP reflex power at ``x``: the MVRG's own reflection plus every assisting group."""
    base = tv_reflex_power(x, sc, VirtualGroupSet((groups[plan.mvrg],), groups.n_patches))
    extra = sum(float(assist_profile(e, sc, [x])[0][0]) for e in plan.entries)
    return base + extra


def pre_rotation_slack(areas: Sequence[ReflectionArea], rated_speed: float, switch_time: float) -> list[float]:
    """Spare time for each team to re-aim between serving area ``k-1`` and area ``k+1``.

    Entry ``k`` is ``t_in(k+1) - t_out(k-1) - T_g``; a negative value means
    the team cannot finish rotating in time.
    """
    out = []
    for k in range(1, len(areas) - 1):
        out.append((areas[k + 1].ra_start - areas[k - 1].ra_end) / rated_speed - switch_time)
    return out


def patch_landing_area(e: int, rotation: float, sc: Scenario, receiver_y: float = 0.0) -> ReflectionArea:
    return reflection_area(sc.bs.position, patch_panel(e, sc.array, rotation), sc.loss.decay,
                           sc.loss.threshold, receiver_y)


__all__ = [
    "rotation_angle", "distance_factor", "group_rotation", "landing_of", "active_patch_bounds",
    "RotationEntry", "RotationPlan", "RctAssignment", "ans_assign", "assistants", "plan_for",
    "entry_panels", "assist_profile", "rct_enhancement", "pre_rotation_slack", "patch_landing_area",
]
