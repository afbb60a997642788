"""Dynamic group virtualization: the greedy sub-case search and an exhaustive oracle."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .capacity import PhiEvaluator, ThroughputRatios
from .errors import InvalidScenarioError
from .geometry import SensitiveUser, distance
from .rpp import (RppArray, SsmEvent, VirtualGroup, VirtualGroupSet, active_at, effective_panel,  # noqa: F401
                  group_area, influence_set, interference_duration, patch_panel, ssm_schedule)
from .scenario import Scenario

# Activation patterns over patches (e-1, e, e+1), in table order A1, B2, B3, C4, C5, C6, D7.
# The single-patch island (N, A, N) is excluded because it is shorter than any useful group.
SUBCASES: tuple[tuple[str, tuple[bool, bool, bool]], ...] = (
    ("A1", (False, False, False)),
    ("B2", (True, False, False)),
    ("B3", (False, False, True)),
    ("C4", (True, True, False)),
    ("C5", (True, False, True)),
    ("C6", (False, True, True)),
    ("D7", (True, True, True)),
)
_FORBIDDEN = (False, True, False)
MAX_EXHAUSTIVE_PATCHES = 14


@dataclass(frozen=True)
class SubCase:
    label: str
    patches: tuple[int, ...]
    states: tuple[bool, ...]

    def apply(self, groups: VirtualGroupSet) -> VirtualGroupSet:
        bits = groups.mask_bits()
        for e, on in zip(self.patches, self.states):
            bits[e] = on
        return VirtualGroupSet.from_mask(bits, groups.n_patches)

    @property
    def active_count(self) -> int:
        return sum(self.states)


def subcase_states(e: int, n_patches: int) -> list[SubCase]:
    """Candidate activation patterns around patch ``e``.

    At the array ends the missing neighbour is dropped, patterns that become
    identical are kept once under their first table label, and the truncated
    form of the isolated single patch is left out, which leaves three patterns.
    """
    if not 0 <= e < n_patches:
        raise InvalidScenarioError(f"patch index {e} outside 0..{n_patches - 1}")
    keep = [k for k, p in enumerate((e - 1, e, e + 1)) if 0 <= p < n_patches]
    patches = tuple(e - 1 + k for k in keep)
    banned = tuple(_FORBIDDEN[k] for k in keep)
    seen: set[tuple[bool, ...]] = set()
    out = []
    for label, states in SUBCASES:
        s = tuple(states[k] for k in keep)
        if s in seen or (len(keep) < 3 and s == banned):
            continue
        seen.add(s)
        out.append(SubCase(label, patches, s))
    return out


def covering_patch(su: SensitiveUser, sc: Scenario, receiver_y: float = 0.0) -> int:
    """Index ``e`` of the patch whose DRA, or right-hand IDRA, holds the user."""
    e_best = 0
    for e in range(sc.array.count):
        a = group_area(VirtualGroup(e, e), sc.array, sc.bs.position, sc.loss.decay, sc.loss.threshold, receiver_y)
        if a.dra_start <= su.encounter_x:
            e_best = e
        else:
            break
    return e_best


def su_order(sc: Scenario) -> list[int]:
    """Users by increasing distance to the serving BS (stable on ties)."""
    q = sc.bs.position
    return sorted(range(len(sc.sus)), key=lambda j: (distance(q, sc.sus[j].position), j))


def feasible(groups: VirtualGroupSet, n0: int) -> bool:
    return all(g.size >= n0 for g in groups)


@dataclass
class GssaResult:
    groups: VirtualGroupSet
    ratios: ThroughputRatios
    history: list[float] = field(default_factory=list)
    choices: list[str | None] = field(default_factory=list)

    @property
    def phi(self) -> float:
        return self.ratios.joint


def gssa(sc: Scenario, mode: str | None = None, zeta: float | None = None,
         evaluator: PhiEvaluator | None = None, initial: VirtualGroupSet | None = None,
         max_passes: int = 8) -> GssaResult:
    """Greedy stepwise search over the per-user sub-cases.

    Starts from ``initial`` (default: one group spanning the array) and, user
    by user, commits the best sub-case that does not lower Φ and keeps every
    group at least ``n_0`` patches long.  Ties go to the pattern with more
    active patches, then to the earlier table entry.

    A user's term depends on the length of the group around it, so a later
    split can change the best choice for an earlier user.  With
    ``max_passes > 1`` the users are revisited until a full pass changes
    nothing; the first pass is the plain single sweep.
    """
    ev = evaluator or PhiEvaluator(sc, mode, zeta)
    n0 = sc.min_group_size
    groups = initial if initial is not None else sc.initial_group_set()
    if not feasible(groups, n0):
        groups = VirtualGroupSet.single(sc.array.count)
        if not feasible(groups, n0):
            groups = VirtualGroupSet((), sc.array.count)
    current = ev.evaluate(groups)
    result = GssaResult(groups, current, [current.joint], [])
    receiver = "lateral" if ev.mode == "csi" else "road"
    order = su_order(sc)
    windows = {j: covering_patch(sc.sus[j], sc, sc.sus[j].lateral_y if receiver == "lateral" else 0.0)
               for j in order}
    for _ in range(max(1, max_passes)):
        start = groups
        for j in order:
            best = None
            for rank, case in enumerate(subcase_states(windows[j], sc.array.count)):
                cand = case.apply(groups)
                if not feasible(cand, n0):
                    continue
                r = ev.evaluate(cand)
                if r.joint < current.joint:
                    continue
                key = (r.joint, case.active_count, -rank)
                if best is None or key > best[0]:
                    best = (key, cand, r, case.label)
            if best is None:
                result.choices.append(None)
            else:
                _, groups, current, label = best
                result.choices.append(label)
            result.history.append(current.joint)
        if groups == start:
            break
    result.groups, result.ratios = groups, current
    return result


def exhaustive_dgv(sc: Scenario, mode: str | None = None, zeta: float | None = None,
                   max_patches: int = MAX_EXHAUSTIVE_PATCHES, evaluator: PhiEvaluator | None = None,
                   free_patches: Iterable[int] | None = None,
                   base: VirtualGroupSet | None = None) -> tuple[VirtualGroupSet, ThroughputRatios]:
    """Best group set over every activation mask; ties go to the smallest mask.

    ``free_patches`` limits the search to masks that differ from ``base``
    (default: all patches active) only at those patches.
    """
    n = sc.array.count
    if max_patches > MAX_EXHAUSTIVE_PATCHES:
        raise InvalidScenarioError(f"exhaustive search is capped at {MAX_EXHAUSTIVE_PATCHES} patches")
    free = sorted(set(range(n) if free_patches is None else free_patches))
    if len(free) > max_patches:
        raise InvalidScenarioError(
            f"exhaustive search over {len(free)} patches refused (limit {max_patches}); "
            "the candidate count doubles with every patch")
    ev = evaluator or PhiEvaluator(sc, mode, zeta)
    n0 = sc.min_group_size
    base_mask = (base.mask() if base is not None else (1 << n) - 1)
    for e in free:
        base_mask &= ~(1 << e)
    best = None
    masks = sorted(base_mask | sum(1 << e for e, on in zip(free, bits) if on)
                   for bits in itertools.product((False, True), repeat=len(free)))
    for m in masks:
        groups = VirtualGroupSet.from_mask(m, n)
        if not feasible(groups, n0):
            continue
        r = ev.evaluate(groups)
        if best is None or r.joint > best[1].joint:
            best = (groups, r)
    if best is None:  # unreachable: the empty mask is always feasible
        groups = VirtualGroupSet((), n)
        best = (groups, ev.evaluate(groups))
    return best


def reoptimize(sc: Scenario, previous: VirtualGroupSet, evaluator: PhiEvaluator | None = None,
               mode: str | None = None, zeta: float | None = None) -> GssaResult:
    """Re-run the search after the user set changed, keeping the better of a warm and a cold start."""
    ev = evaluator or PhiEvaluator(sc, mode, zeta)
    cold = gssa(sc, evaluator=ev)
    if not feasible(previous, sc.min_group_size) or previous.n_patches != sc.array.count:
        return cold
    warm = gssa(sc, evaluator=ev, initial=previous)
    return warm if warm.phi > cold.phi else cold


def affected_patches(sc: Scenario, receiver: str = "road") -> list[int]:
    """Union of the three-patch windows around every user."""
    out: set[int] = set()
    for su in sc.sus:
        e = covering_patch(su, sc, su.lateral_y if receiver == "lateral" else 0.0)
        out.update(p for p in (e - 1, e, e + 1) if 0 <= p < sc.array.count)
    return sorted(out)


def min_group_size(array: RppArray, rated_speed: float) -> int:
    return array.min_group_size(rated_speed)


def schedule(sc: Scenario, groups: VirtualGroupSet, check: bool = True) -> list[SsmEvent]:
    return ssm_schedule(sc.areas(groups), sc.tv_speed, sc.array.switch_time, check)


__all__ = [
    "SUBCASES", "SubCase", "GssaResult", "RppArray", "VirtualGroup", "VirtualGroupSet", "SsmEvent",
    "subcase_states", "covering_patch", "su_order", "gssa", "exhaustive_dgv", "reoptimize",
    "affected_patches", "effective_panel", "patch_panel", "ssm_schedule", "active_at", "influence_set",
    "interference_duration", "schedule", "min_group_size", "feasible",
]
