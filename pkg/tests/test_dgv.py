import dataclasses
import math

import pytest

from conftest import small_config, su
from retf.capacity import PhiEvaluator
from retf.dgv import (MAX_EXHAUSTIVE_PATCHES, SUBCASES, affected_patches, covering_patch, exhaustive_dgv, feasible,
                      gssa, reoptimize, subcase_states, su_order)
from retf.errors import ConstraintViolation, InvalidScenarioError
from retf.geometry import ReflectionArea, SensitiveUser, Vec3
from retf.rpp import (RppArray, VirtualGroup, VirtualGroupSet, active_at, effective_panel, group_area,
                      influence_set, ssm_schedule)

ARRAY = RppArray(count=10, patch_length=4.0, spacing=1.0, standoff=10.0, switch_time=0.2)


class TestGroups:
    def test_single_patch_panel(self):
        p = effective_panel(VirtualGroup(0, 0), ARRAY)
        assert (p.start.x, p.end.x) == (0.0, 4.0)

    def test_three_patch_panel(self):
        p = effective_panel(VirtualGroup(0, 2), ARRAY)
        assert (p.start.x, p.end.x) == (0.0, 14.0)

    def test_composite_dra_covers_members(self):
        bs = Vec3(20, -35, 25)
        whole = group_area(VirtualGroup(1, 4), ARRAY, bs, 0.5, 0.1)
        for e in range(1, 5):
            part = group_area(VirtualGroup(e, e), ARRAY, bs, 0.5, 0.1)
            assert whole.dra_start <= part.dra_start and part.dra_end <= whole.dra_end

    def test_mask_round_trip(self):
        g = VirtualGroupSet.from_bounds([(0, 2), (5, 5), (7, 9)], 10)
        assert VirtualGroupSet.from_mask(g.mask(), 10) == g
        assert g.ungrouped == frozenset({3, 4, 6})

    def test_overlap_rejected(self):
        with pytest.raises(InvalidScenarioError):
            VirtualGroupSet.from_bounds([(0, 3), (3, 5)], 10)

    def test_min_group_size_rounds_up(self):
        assert ARRAY.min_group_size(15.0) == 1
        assert dataclasses.replace(ARRAY, switch_time=0.5).min_group_size(15.0) == 2

    def test_spacing_bound_enforced(self):
        chi = math.log(10) / 4
        with pytest.raises(InvalidScenarioError):
            RppArray(4, 4.0, 1.05 * 2 * math.sqrt(math.log(2) / chi), 10.0, decay=chi)


class TestSsm:
    areas = [ReflectionArea(31.0, 40.0, math.log(2), 0.5), ReflectionArea(60.0, 70.0, math.log(2), 0.5)]

    def test_activation_lead(self):
        ev = ssm_schedule(self.areas, 15.0, 0.2)
        first = [e for e in ev if e.group == 0 and e.action == "activate"][0]
        assert first.time == pytest.approx(30.0 / 15.0 - 0.2)

    def test_zero_switch_time(self):
        ev = ssm_schedule(self.areas, 15.0, 0.0)
        assert ev[0].time == pytest.approx(30.0 / 15.0)

    def test_sorted(self):
        ev = ssm_schedule(self.areas, 15.0, 0.2)
        assert [e.time for e in ev] == sorted(e.time for e in ev)

    def test_disjoint_areas_never_both_on(self):
        ev = ssm_schedule(self.areas, 15.0, 0.2)
        for t in (2.0, 2.5, 3.0, 3.5, 4.0, 4.5):
            assert len(active_at(ev, t, 0.2)) <= 1

    def test_short_area_infeasible(self):
        with pytest.raises(ConstraintViolation):
            ssm_schedule([ReflectionArea(0.0, 0.0, math.log(2), 0.5)], 15.0, 0.2)


class TestInfluence:
    areas = [ReflectionArea(0.0, 10.0, math.log(2), 0.5), ReflectionArea(12.0, 20.0, math.log(2), 0.5)]

    def test_centre_of_one_area(self):
        assert influence_set(SensitiveUser(5.0, 0.0, 1), self.areas, 15.0) == (0,)

    def test_gap(self):
        assert influence_set(SensitiveUser(40.0, 0.0, 1), self.areas, 15.0) == ()

    def test_overlap(self):
        assert influence_set(SensitiveUser(11.0, 0.0, 1), self.areas, 15.0) == (0, 1)

    def test_at_most_two(self):
        areas = self.areas + [ReflectionArea(21.0, 30.0, math.log(2), 0.5)]
        fast = SensitiveUser(15.0, 0.0, 1, speed=14.0)
        assert len(influence_set(fast, areas, 15.0)) <= 2


class TestSubcases:
    def test_interior(self):
        cases = subcase_states(4, 10)
        assert [c.label for c in cases] == [label for label, _ in SUBCASES]
        assert all(c.patches == (3, 4, 5) for c in cases)
        assert (False, True, False) not in [c.states for c in cases]

    def test_gap_and_full(self):
        cases = {c.label: c for c in subcase_states(4, 10)}
        g = VirtualGroupSet.single(10)
        assert cases["A1"].apply(g).bounds() == [(0, 2), (6, 9)]
        assert cases["D7"].apply(g) == g
        assert cases["C5"].apply(g).bounds() == [(0, 3), (5, 9)]

    @pytest.mark.parametrize("e, n", [(0, 10), (9, 10)])
    def test_boundary(self, e, n):
        cases = subcase_states(e, n)
        assert len(cases) == 3
        lone = (True, False) if e == 0 else (False, True)
        assert lone not in [c.states for c in cases]

    def test_out_of_range(self):
        with pytest.raises(InvalidScenarioError):
            subcase_states(10, 10)


class TestGssa:
    def test_no_users_keeps_single_group(self):
        sc = small_config(8).scenario
        res = gssa(sc)
        assert res.groups == VirtualGroupSet.single(8)
        assert res.ratios.su_ratio == 1.0

    def test_user_in_gap_keeps_initial(self):
        sc = small_config(8).scenario
        sc = dataclasses.replace(sc, sus=(SensitiveUser(-60.0, 1.0, 1),))
        assert gssa(sc).groups == VirtualGroupSet.single(8)

    def test_matches_restricted_oracle(self):
        sc = small_config(10, [su(8.0, 1.0, 1), su(37.0, -1.0, 2)], seed=1).scenario
        ev = PhiEvaluator(sc, "geometry", 5.0)
        aff = affected_patches(sc)
        assert len(aff) == 6
        res = gssa(sc, evaluator=ev)
        _, best = exhaustive_dgv(sc, evaluator=ev, free_patches=aff)
        assert res.phi == pytest.approx(best.joint, abs=1e-9)

    @pytest.mark.parametrize("y", [-2.0, 0.0, 2.0])
    def test_single_stationary_user_optimal(self, y):
        sc = small_config(8, [su(20.0, y)]).scenario
        ev = PhiEvaluator(sc, "geometry", 1.0)
        _, best = exhaustive_dgv(sc, evaluator=ev)
        assert gssa(sc, evaluator=ev).phi == best.joint

    def test_history_monotone_and_constraints(self):
        users = [su(4.0 + 4.5 * k, (-1) ** k * 1.5, 1 + k % 3, [0.0, 3.0, -4.0][k % 3]) for k in range(9)]
        sc = small_config(12, users, switch_time=0.6).scenario
        res = gssa(sc, max_passes=1)
        assert all(b >= a for a, b in zip(res.history, res.history[1:]))
        assert feasible(res.groups, sc.min_group_size)
        assert all(0 <= g.start_idx <= g.end_idx < 12 for g in res.groups)

    def test_oversized_minimum_gives_empty_set(self):
        sc = small_config(4, [su(10.0, 1.0)], switch_time=5.0).scenario
        assert sc.min_group_size > 4
        res = gssa(sc)
        assert len(res.groups) == 0
        assert res.ratios.tv_ratio == 1.0

    def test_users_sorted_by_distance(self):
        sc = small_config(10, [su(45.0, 0.0), su(25.0, 0.0), su(5.0, 0.0)]).scenario
        assert su_order(sc)[0] == 1

    def test_covering_patch(self):
        sc = small_config(10, [su(25.0, 0.0)]).scenario
        e = covering_patch(sc.sus[0], sc)
        a = sc.area(VirtualGroup(e, e))
        assert a.dra_start <= 25.0


class TestExhaustive:
    def test_one_patch(self):
        sc = small_config(1, switch_time=0.0).scenario
        groups, _ = exhaustive_dgv(sc)
        assert groups.bounds() == [(0, 0)]

    def test_all_forced_off(self):
        sc = small_config(4, switch_time=5.0).scenario
        groups, r = exhaustive_dgv(sc)
        assert len(groups) == 0
        assert r.tv_ratio == 1.0

    def test_refuses_large_arrays(self):
        sc = small_config(MAX_EXHAUSTIVE_PATCHES + 1).scenario
        with pytest.raises(InvalidScenarioError):
            exhaustive_dgv(sc)
        with pytest.raises(InvalidScenarioError):
            exhaustive_dgv(sc, max_patches=MAX_EXHAUSTIVE_PATCHES + 1)


def test_reoptimize_never_worse_than_cold_start():
    before = small_config(10, [su(12.0, 1.0), su(37.0, -1.0, 2)]).scenario
    prev = gssa(before).groups
    after = dataclasses.replace(before, sus=before.sus + (SensitiveUser(24.0, 0.5, 3),))
    ev = PhiEvaluator(after)
    assert reoptimize(after, prev, evaluator=ev).phi >= gssa(after, evaluator=ev).phi
