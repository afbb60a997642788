import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from retf.errors import InvalidScenarioError
from retf.geometry import EffectivePanel, ReflectionArea, Transmitter, Vec3, reflection_area
from retf.propagation import (OMNI, AntennaPattern, LossModel, antenna_gain, bias_loss_ratio, direct_power,
                              direct_power_array, free_space_intercept_db, max_spacing, path_loss_ratio,
                              received_power, reflex_path_loss_ratio, reflex_power, reflex_power_array,
                              spacing_sum)

EAST = Vec3(1.0, 0.0, 0.0)
SECTOR = AntennaPattern()  # 8 dBi, 65 deg, 30 dB floor


class TestAntennaGain:
    def test_boresight(self):
        assert antenna_gain(Vec3(0, 0), Vec3(10, 0), EAST, SECTOR) == pytest.approx(10 ** 0.8)

    def test_omni(self):
        assert antenna_gain(Vec3(0, 0), Vec3(-3, 7, 2), EAST, OMNI) == 1.0

    def test_ninety_degrees_off(self):
        g = antenna_gain(Vec3(0, 0), Vec3(0, 10), EAST, SECTOR)
        assert 10 * math.log10(10 ** 0.8 / g) == pytest.approx(23.0, abs=0.01)

    def test_floor(self):
        g = antenna_gain(Vec3(0, 0), Vec3(-10, 0), EAST, SECTOR)
        assert 10 * math.log10(g) == pytest.approx(8.0 - 30.0)

    def test_same_point_rejected(self):
        with pytest.raises(InvalidScenarioError):
            antenna_gain(Vec3(1, 1), Vec3(1, 1), EAST, SECTOR)

    @given(st.floats(-179, 179))
    def test_symmetric_and_peaked(self, az):
        a = math.radians(az)
        left = antenna_gain(Vec3(0, 0), Vec3(math.cos(a), math.sin(a)), EAST, SECTOR)
        right = antenna_gain(Vec3(0, 0), Vec3(math.cos(a), -math.sin(a)), EAST, SECTOR)
        assert left == pytest.approx(right, rel=1e-12)
        assert left <= 10 ** 0.8 * (1 + 1e-12)


class TestPathLoss:
    def test_inverse_square(self):
        m = LossModel(pl_exponent=2.0, pl_intercept_db=30.0)
        near = path_loss_ratio(Vec3(0, 0), Vec3(10, 0), m)
        far = path_loss_ratio(Vec3(0, 0), Vec3(20, 0), m)
        assert near / far == pytest.approx(4.0, rel=1e-12)

    def test_free_space_at_100m(self):
        m = LossModel(carrier_hz=3.5e9, pl_exponent=2.0, pl_intercept_db=free_space_intercept_db(3.5e9))
        pl_db = -10 * math.log10(path_loss_ratio(Vec3(0, 0), Vec3(100, 0), m))
        assert pl_db == pytest.approx(83.3, abs=0.1)

    def test_zero_distance(self):
        with pytest.raises(InvalidScenarioError):
            path_loss_ratio(Vec3(1, 2), Vec3(1, 2), LossModel())

    @given(st.floats(-50, 50), st.floats(1, 50))
    def test_two_stage_not_above_direct(self, px, py):
        m = LossModel()
        a, b = Vec3(-20, -30, 25), Vec3(15, 0, 1.5)
        assert reflex_path_loss_ratio(a, Vec3(px, py, 5), b, m) <= path_loss_ratio(a, b, m) * (1 + 1e-12)

    def test_strictly_decreasing(self):
        d = np.linspace(1, 500, 200)
        assert np.all(np.diff(LossModel().ratio_at_distance(d)) < 0)


class TestBiasLoss:
    area = ReflectionArea(10.0, 20.0, math.log(10) / 4, 0.1)

    def test_inside_dra(self):
        assert bias_loss_ratio(15.0, [(self.area, True)]) == 1.0

    def test_gap(self):
        assert bias_loss_ratio(40.0, [(self.area, True)]) == 0.0

    def test_inactive(self):
        assert bias_loss_ratio(15.0, [(self.area, False)]) == 0.0

    def test_overlap_midpoint_of_max_spacing(self):
        chi = 0.7
        mu = max_spacing(chi)
        left = ReflectionArea(0.0, 5.0, chi, 0.1)
        right = ReflectionArea(5.0 + mu, 10.0 + mu, chi, 0.1)
        x = 5.0 + mu / 2
        assert left.ratio(x) == pytest.approx(0.5, rel=1e-12)
        assert bias_loss_ratio(x, [(left, True), (right, True)]) == pytest.approx(1.0, rel=1e-12)
        assert float(spacing_sum(mu / 2, mu, chi)) == pytest.approx(1.0, rel=1e-12)

    def test_continuous_at_dra_edge(self):
        eps = 1e-9
        assert bias_loss_ratio(20.0 + eps, [(self.area, True)]) == pytest.approx(1.0, abs=1e-12)

    def test_cutoff_jump_bounded_by_threshold(self):
        edge = self.area.ra_end
        inside = bias_loss_ratio(edge - 1e-9, [(self.area, True)])
        outside = bias_loss_ratio(edge + 1e-9, [(self.area, True)])
        assert outside == 0.0
        assert inside - outside <= self.area.threshold + 1e-6

    @given(st.floats(-20, 60))
    def test_in_unit_interval(self, x):
        other = ReflectionArea(18.0, 30.0, self.area.decay, 0.1)
        assert 0.0 <= bias_loss_ratio(x, [(self.area, True), (other, True)]) <= 1.0


def _tx(pos=Vec3(0, -30, 25), power=20.0):
    return Transmitter(pos, Vec3(0, 1, 0), power)


class TestReceivedPower:
    def test_identity_chain(self):
        m = LossModel(pl_exponent=1e-12, pl_intercept_db=0.0)
        p = received_power(Transmitter(Vec3(0, 0), EAST, 3.0), (Vec3(5, 0), None), m, OMNI)
        assert p == pytest.approx(3.0, rel=1e-9)

    def test_reflex_ten_db_below_direct(self):
        m = LossModel(reflection_loss_db=10.0)
        tx = Transmitter(Vec3(0, 0), EAST, 1.0)
        rx = Vec3(40, 0)
        direct = direct_power(tx, rx, None, m, OMNI)
        # a reflecting point on the straight path keeps the two-stage distance equal
        reflex = reflex_power(tx, rx, None, Vec3(15, 0), 1.0, m, OMNI)
        assert reflex / direct == pytest.approx(0.1, rel=1e-12)

    def test_zero_bias_is_zero_not_error(self):
        panel = EffectivePanel(Vec3(0, 10), Vec3(5, 10))
        area = reflection_area(Vec3(0, -30), panel, 0.5, 0.1)
        p = received_power(_tx(), (Vec3(300, 0, 1.5), None), LossModel(), SECTOR, panel, [(area, True)])
        assert p == 0.0

    def test_su_receiver_is_omni(self):
        m, tx, rx, p = LossModel(), _tx(), Vec3(3, 0, 1.5), Vec3(1, 10, 5)
        assert reflex_power(tx, rx, None, p, 1.0, m, SECTOR) == reflex_power(tx, rx, None, p, 1.0, m, SECTOR, OMNI)

    def test_reflex_monotone_through_idra(self):
        m = LossModel()
        tx = _tx()
        panel = EffectivePanel(Vec3(0, 10, 1.5), Vec3(20, 10, 1.5))
        area = reflection_area(tx.position, panel, m.decay, m.threshold)
        xs = np.linspace(area.dra_end, area.ra_end, 50)
        ps = [received_power(tx, (Vec3(x, 0, 1.5), Vec3(0, 1, 0)), m, SECTOR, panel, [(area, True)]) for x in xs]
        assert np.all(np.diff(ps) <= 0)

    def test_array_versions_agree(self):
        m, tx = LossModel(), _tx()
        panel = EffectivePanel(Vec3(0, 10, 1.5), Vec3(20, 10, 1.5))
        area = reflection_area(tx.position, panel, m.decay, m.threshold)
        xs = np.linspace(area.ra_start, area.ra_end, 40)
        bias = area.ratio_array(xs)
        sap = Vec3(0, 1, 0)
        arr = reflex_power_array(tx, panel, xs, 0.0, 1.5, bias, sap, m, SECTOR, SECTOR)
        ref = [received_power(tx, (Vec3(x, 0, 1.5), sap), m, SECTOR, panel, [(area, True)]) for x in xs]
        np.testing.assert_allclose(arr, ref, rtol=1e-9)
        d_arr = direct_power_array(tx, xs, 0.0, 1.5, Vec3(0, -1, 0), m, SECTOR, SECTOR)
        d_ref = [direct_power(tx, Vec3(x, 0, 1.5), Vec3(0, -1, 0), m, SECTOR, SECTOR) for x in xs]
        np.testing.assert_allclose(d_arr, d_ref, rtol=1e-9)


class TestSpacingBound:
    @settings(max_examples=50)
    @given(st.floats(0.01, 10.0))
    def test_bound_holds(self, chi):
        mu = max_spacing(chi)
        dx = np.linspace(0.0, mu, 2001)
        assert spacing_sum(dx, mu, chi).min() >= 1 - 1e-9

    def test_bound_is_tight(self):
        chi = 0.5
        mu = 1.05 * max_spacing(chi)
        assert spacing_sum(mu / 2, mu, chi) < 1.0

    def test_rejects_negative_loss(self):
        with pytest.raises(InvalidScenarioError):
            LossModel(reflection_loss_db=-1.0)
