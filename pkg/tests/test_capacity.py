import math

import numpy as np
import pytest

from conftest import small_config, su
from retf.capacity import (PhiEvaluator, csi_capacity, geometry_capacity, geometry_capacity_tv, shannon,
                           su_capacities, throughput_ratios)
from retf.errors import InvalidScenarioError
from retf.geometry import ReflectionArea, SensitiveUser
from retf.rpp import VirtualGroupSet, interference_duration
from retf.scenario import CapacityParams

W = 1.0e6
QUIET = CapacityParams(bandwidth_hz=W, num_rx=2, num_tx=8, noise_floor_w=0.0)


class TestGeometryCapacity:
    def test_unit_sinr(self):
        c_org, c_enh = geometry_capacity(2.0, 2.0, 0.0, 1.0, QUIET)
        assert c_org == pytest.approx(W * 2)
        assert c_enh == c_org

    def test_sinr_three(self):
        c_org, _ = geometry_capacity(3.0, 1.0, 0.0, 1.0, QUIET)
        assert c_org == pytest.approx(2 * W * 2)

    def test_reflex_term_adds(self):
        _, c_enh = geometry_capacity(1.0, 1.0, 1.0, 1.0, QUIET)
        assert c_enh == pytest.approx(4 * W)

    def test_zero_floor_rejected(self):
        with pytest.raises(InvalidScenarioError, match="noise floor"):
            shannon(W, 1.0, 0.0)

    def test_gap_position(self):
        cfg = small_config(8)
        sc = cfg.scenario
        empty = VirtualGroupSet((), sc.array.count)
        c_org, c_enh = geometry_capacity_tv(20.0, sc, empty)
        assert c_enh == c_org

    def test_off_road_rejected(self):
        sc = small_config(8).scenario
        with pytest.raises(InvalidScenarioError):
            geometry_capacity_tv(-1.0, sc, VirtualGroupSet.single(8))

    def test_enhanced_never_below_original(self):
        sc = small_config(10).scenario
        g = VirtualGroupSet.single(10)
        for x in np.linspace(0, sc.road_length, 41):
            c_org, c_enh = geometry_capacity_tv(float(x), sc, g)
            assert c_enh >= c_org


class TestCsiCapacity:
    def test_single_layer(self):
        assert csi_capacity(1.0, np.array([1.0, 0.0]), 1, 1.0, W) == pytest.approx(W)

    def test_rank_is_not_chosen_by_capacity(self):
        two = csi_capacity(3.0, np.array([1.0, 1.0]), 2, 1.0, W)
        one = csi_capacity(3.0, np.array([2.0, 0.0]), 1, 1.0, W)
        assert two == pytest.approx(2 * W * math.log2(2.5))
        assert one == pytest.approx(W * math.log2(7.0))
        # the stack form evaluates row by row
        both = csi_capacity(np.array([3.0, 3.0]), np.array([[1.0, 1.0], [1.0, 1.0]]), np.array([2, 1]),
                            np.array([1.0, 1.0]), W)
        np.testing.assert_allclose(both, [2 * W * math.log2(2.5), W * math.log2(4.0)])


class TestSensitiveUsers:
    def test_substitution(self):
        s = 1.0
        assert shannon(W, s, s + s) == pytest.approx(W * math.log2(1.5))
        assert shannon(W, s, s + s + s) == pytest.approx(W * math.log2(4 / 3))

    def test_outside_every_area(self):
        sc = small_config(8, [su(10.0, 1.0)]).scenario
        empty = VirtualGroupSet((), 8)
        c_nrm, c_int = su_capacities(sc.sus[0], 10.0, sc, empty)
        assert c_int == c_nrm

    def test_inside_area_loses(self):
        sc = small_config(8, [su(20.0, 1.0)]).scenario
        c_nrm, c_int = su_capacities(sc.sus[0], 20.0, sc, VirtualGroupSet.single(8))
        assert c_int < c_nrm


class TestInterferenceDuration:
    area = ReflectionArea(10.0, 10.0 + 7.5 - 2 * math.sqrt(-math.log(0.5) / math.log(2)), math.log(2), 0.5)

    def test_stationary(self):
        assert self.area.ra_length == pytest.approx(7.5)
        u = SensitiveUser(12.0, 0.0, 1)
        assert interference_duration(u, [self.area], [0], 15.0) == pytest.approx(0.5)

    def test_empty_set(self):
        assert interference_duration(SensitiveUser(12.0, 0.0, 1), [self.area], [], 15.0) == 0.0

    def test_mobile_leaves_first(self):
        u = SensitiveUser(12.0, 0.0, 1, speed=10.0)
        psi = self.area.ra_end - 12.0
        assert psi / 10.0 < 0.5
        assert interference_duration(u, [self.area], [0], 15.0) == pytest.approx(psi / 10.0)


class TestThroughputRatios:
    def test_nothing_active(self):
        sc = small_config(8, [su(20.0, 1.0)]).scenario
        r = throughput_ratios(sc, VirtualGroupSet((), 8))
        assert (r.tv_ratio, r.su_ratio) == (1.0, 1.0)

    def test_zeta_zero(self):
        sc = small_config(8, [su(20.0, 1.0)]).scenario
        r = throughput_ratios(sc, VirtualGroupSet.single(8), zeta=0.0)
        assert r.joint == r.tv_ratio

    def test_no_users(self):
        sc = small_config(8).scenario
        assert throughput_ratios(sc, VirtualGroupSet.single(8)).su_ratio == 1.0

    def test_bounds(self):
        sc = small_config(10, [su(12.0, 1.0), su(33.0, -2.0, 2, 4.0)]).scenario
        for mode in ("geometry", "csi"):
            ev = PhiEvaluator(sc, mode, 1.0)
            r = ev.evaluate(VirtualGroupSet.single(10))
            assert r.tv_ratio >= 1.0
            assert 0.0 <= r.su_ratio <= 1.0
            assert r.su_ratio < 1.0

    def test_quadrature_converges(self):
        coarse = small_config(10, time_step=0.02).scenario
        fine = small_config(10, time_step=0.01).scenario
        g = VirtualGroupSet.from_bounds([(0, 3), (5, 9)], 10)
        a = throughput_ratios(coarse, g, "geometry").tv_ratio
        b = throughput_ratios(fine, g, "geometry").tv_ratio
        assert abs(a - b) / b < 1e-3

    def test_csi_gain_positive_on_average(self):
        gains = []
        for seed in range(100):
            sc = small_config(10, seed=seed).scenario
            ev = PhiEvaluator(sc, "csi", 0.0)
            gains.append(ev.tv_ratio(VirtualGroupSet.single(10)) - 1.0)
        assert np.mean(gains) > 0.0

    def test_unknown_mode(self):
        with pytest.raises(InvalidScenarioError):
            PhiEvaluator(small_config(4).scenario, "magic")
