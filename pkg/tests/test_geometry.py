import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from retf.errors import InvalidScenarioError
from retf.geometry import (EffectivePanel, ReflectionArea, TargetVehicleState, Transmitter, Vec3,
                           idra_half_width, landing_x, mirror_dra_endpoints, ra_length, reflecting_point,
                           reflection_area, region_of, road_regions)


def panel(x0, x1, y=10.0, azimuth=math.pi / 2):
    return EffectivePanel(Vec3(x0, y, 0.0), Vec3(x1, y, 0.0), azimuth)


def mirror_oracle(bs, px, py):
    """Reflect the BS across y = py and intersect the ray through (px, py) with y = 0."""
    my = 2 * py - bs.y
    s = my / (my - py)
    return bs.x + s * (px - bs.x)


class TestMirrorEndpoints:
    def test_symmetric_start(self):
        assert mirror_dra_endpoints(Vec3(0, -10), panel(0, 5))[0] == pytest.approx(0.0, abs=1e-12)

    def test_offset_start(self):
        lo, hi = mirror_dra_endpoints(Vec3(0, -10), panel(5, 10))
        assert lo == pytest.approx(7.5, abs=1e-12)
        assert hi == pytest.approx(15.0, abs=1e-12)

    def test_panel_on_road_reflects_onto_itself(self):
        lo, _ = mirror_dra_endpoints(Vec3(3, -10), panel(5, 10, y=1e-9))
        assert lo == pytest.approx(5.0, abs=1e-6)

    def test_bs_on_panel_line_is_rejected(self):
        with pytest.raises(InvalidScenarioError):
            mirror_dra_endpoints(Vec3(0, 10), panel(0, 5))

    @settings(max_examples=200, deadline=None)
    @given(st.floats(-200, 200), st.floats(-80, -1), st.floats(1, 40), st.floats(-100, 100), st.floats(0.1, 50))
    def test_matches_ray_oracle(self, qx, qy, py, x0, length):
        bs = Vec3(qx, qy, 25.0)
        lo, hi = mirror_dra_endpoints(bs, panel(x0, x0 + length, py))
        assert lo == pytest.approx(mirror_oracle(bs, x0, py), abs=1e-9)
        assert hi == pytest.approx(mirror_oracle(bs, x0 + length, py), abs=1e-9)
        k = (qy - 2 * py) / (qy - py)
        assert hi - lo == pytest.approx(k * length, rel=1e-12, abs=1e-9)


class TestReflectingPoint:
    def test_symmetric_case(self):
        rp = reflecting_point(Vec3(0, -10, 20), Vec3(0, 0, 0), panel(-5, 5))
        assert rp.point.x == pytest.approx(0.0, abs=1e-12)
        assert not rp.clamped

    def test_dra_end_maps_to_panel_end(self):
        rp = reflecting_point(Vec3(0, -10), Vec3(7.5, 0), panel(0, 5))
        assert (rp.point.x, rp.point.y) == pytest.approx((5.0, 10.0), abs=1e-12)

    def test_dra_midpoint_maps_to_panel_midpoint(self):
        bs = Vec3(0, -10)
        lo, hi = mirror_dra_endpoints(bs, panel(0, 5))
        rp = reflecting_point(bs, Vec3(0.5 * (lo + hi), 0), panel(0, 5))
        assert rp.point.x == pytest.approx(2.5, abs=1e-12)

    def test_idra_location_is_clamped(self):
        rp = reflecting_point(Vec3(0, -10), Vec3(20, 0), panel(0, 5))
        assert rp.clamped
        assert rp.point.x == 5.0

    @settings(max_examples=200, deadline=None)
    @given(st.floats(-50, 50), st.floats(0.01, 0.99), st.floats(-0.6, 0.6))
    def test_specular_law_on_rotated_panel(self, qx, frac, tilt):
        bs = Vec3(qx, -30.0)
        p = panel(0, 20, azimuth=math.pi / 2 + tilt)
        (ax, ay), (bx, by) = p.rotated_endpoints()
        # aim at a vehicle that the panel point at ``frac`` reflects onto
        sx, sy = ax + frac * (bx - ax), ay + frac * (by - ay)
        x = landing_x(bs, (sx, sy), p.tangent)
        if not math.isfinite(x) or abs(x) > 1e4:
            return
        rp = reflecting_point(bs, Vec3(x, 0.0), p)
        nx, ny = math.cos(p.azimuth), math.sin(p.azimuth)
        ux, uy = bs.x - rp.point.x, bs.y - rp.point.y
        vx, vy = x - rp.point.x, -rp.point.y
        a_in = math.acos((ux * nx + uy * ny) / math.hypot(ux, uy))
        a_out = math.acos((vx * nx + vy * ny) / math.hypot(vx, vy))
        assert a_in == pytest.approx(a_out, abs=1e-9)


class TestReflectionArea:
    def test_ra_length_without_idra(self):
        assert ra_length(panel(0, 5), Vec3(0, -10), 1.0, 1.0) == pytest.approx(7.5)

    def test_half_width_closed_case(self):
        assert idra_half_width(math.log(2), 0.5) == pytest.approx(1.0, abs=1e-15)

    def test_zero_threshold_refused(self):
        with pytest.raises(InvalidScenarioError):
            idra_half_width(1.0, 0.0)

    def test_ra_matches_area_span(self):
        bs = Vec3(10, -35)
        a = reflection_area(bs, panel(0, 20), 0.5, 0.1)
        assert a.ra_length == pytest.approx(ra_length(panel(0, 20), bs, 0.5, 0.1))
        w = idra_half_width(0.5, 0.1)
        assert a.dra_start - a.ra_start == pytest.approx(w)
        assert a.ra_end - a.dra_end == pytest.approx(w)

    @given(st.floats(0.5, 40), st.floats(0.5, 40), st.floats(0.01, 0.99), st.floats(0.01, 0.99))
    def test_ra_length_monotone(self, l1, l2, w1, w2):
        bs = Vec3(0, -35)
        lo_l, hi_l = sorted((l1, l2))
        lo_w, hi_w = sorted((w1, w2))
        assert ra_length(panel(0, lo_l), bs, 0.5, 0.1) <= ra_length(panel(0, hi_l), bs, 0.5, 0.1)
        assert ra_length(panel(0, 5), bs, 0.5, hi_w) <= ra_length(panel(0, 5), bs, 0.5, lo_w)

    def test_labels(self):
        a = ReflectionArea(10.0, 20.0, math.log(2), 0.5)
        assert [a.label(x) for x in (8.0, 9.5, 15.0, 20.5, 22.0)] == ["GAP", "IDRA", "DRA", "IDRA", "GAP"]

    def test_ratio_array_matches_scalar(self):
        a = ReflectionArea(10.0, 20.0, 0.5, 0.1)
        xs = np.linspace(0, 30, 301)
        np.testing.assert_allclose(a.ratio_array(xs), [a.ratio(x) for x in xs], rtol=1e-14, atol=0)

    def test_on_road_clips(self):
        a = ReflectionArea(-3.0, 5.0, math.log(2), 0.5)
        span = a.on_road(4.0)
        assert (span.ra_start, span.ra_end) == (0.0, 4.0)
        assert span.contains(2.0) and not span.contains(5.0)


class TestEntities:
    def test_vec3_rejects_nan(self):
        with pytest.raises(InvalidScenarioError):
            Vec3(math.nan, 0.0)

    def test_transmitter_orientation_must_be_unit(self):
        with pytest.raises(InvalidScenarioError):
            Transmitter(Vec3(0, -1), Vec3(0, 2, 0), 1.0)

    def test_vehicle_panels_must_face_apart(self):
        with pytest.raises(InvalidScenarioError):
            TargetVehicleState(0.0, 0.0, 15.0, Vec3(0, -1, 0), Vec3(0, -1, 0))

    def test_panel_must_run_left_to_right(self):
        with pytest.raises(InvalidScenarioError):
            panel(5, 5)

    def test_regions(self):
        assert [r[2] for r in road_regions(300.0)] == ["edge", "center", "edge"]
        assert region_of(150.0, 300.0) == "center"
        assert region_of(10.0, 300.0) == "edge"
