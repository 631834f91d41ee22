import numpy as np
import pytest

from vma.errors import VmaError
from vma.geometry import distance_to_polyline, polyline_length
from vma.model import GeomKind
from vma.synth import FULL_FURNITURE, SceneSpec, generate_scene


class TestSceneSpec:
    def test_validation(self):
        with pytest.raises(VmaError):
            SceneSpec(road_length=-5)
        with pytest.raises(VmaError):
            SceneSpec(num_lanes=0)
        with pytest.raises(VmaError):
            SceneSpec(profile="spiral")
        with pytest.raises(VmaError):
            SceneSpec(profile="arc")  # radius missing
        with pytest.raises(VmaError):
            SceneSpec(furniture={"fountain": 1})

    def test_round_trip(self):
        spec = SceneSpec(road_length=200, profile="arc", radius=150, furniture={"arrow": 3})
        again = SceneSpec.from_dict(spec.to_dict())
        assert again == spec


class TestStraightScene:
    def test_two_lane_layout(self):
        m, traj = generate_scene(SceneSpec(road_length=100, num_lanes=2, lane_width=3.5))
        by_id = {e.id: e for e in m.elements}
        assert set(by_id) == {"curb_left", "curb_right", "divider_00"}
        left = by_id["curb_left"].points_array()
        right = by_id["curb_right"].points_array()
        div = by_id["divider_00"].points_array()
        assert np.allclose(left[:, 1], 3.5)
        assert np.allclose(right[:, 1], -3.5)
        assert np.allclose(div[:, 1], 0.0)
        assert polyline_length(left) == pytest.approx(100.0, abs=1e-9)
        assert len(traj) == 101

    def test_divider_attrs_alternate(self):
        m, _ = generate_scene(SceneSpec(road_length=50, num_lanes=4))
        dividers = [e for e in m.elements if e.semantic == "lane_divider"]
        assert [e.attrs["lane_type"] for e in dividers] == ["solid", "dotted", "solid"]
        assert all(e.attrs["direction"] == "unidirectional" for e in dividers)

    def test_zero_furniture_only_lines(self):
        m, _ = generate_scene(SceneSpec(road_length=80))
        assert all(e.kind is GeomKind.LINE for e in m.elements)


class TestArcScene:
    def test_curb_lengths_scale_with_radius(self):
        radius, length, lanes, lw = 150.0, 120.0, 2, 3.5
        m, _ = generate_scene(SceneSpec(road_length=length, profile="arc",
                                        radius=radius, num_lanes=lanes, lane_width=lw))
        by_id = {e.id: e for e in m.elements}
        sweep = length / radius
        w = lanes * lw / 2.0
        # inner curb (left of a left turn) is shorter, outer longer
        inner = polyline_length(by_id["curb_left"].points_array())
        outer = polyline_length(by_id["curb_right"].points_array())
        assert inner == pytest.approx((radius - w) * sweep, rel=1e-4)
        assert outer == pytest.approx((radius + w) * sweep, rel=1e-4)

    def test_s_curve_continuous(self):
        m, traj = generate_scene(SceneSpec(road_length=200, profile="s_curve", radius=100))
        pos = traj.positions()
        gaps = np.hypot(*np.diff(pos, axis=0).T)
        assert np.all(gaps <= 1.0 + 1e-6)  # no jumps at the arc switch
        yaws = np.array([p.yaw for p in traj.poses])
        assert np.all(np.abs(np.diff(yaws)) < 0.05)


class TestDeterminismAndValidity:
    def test_same_seed_identical(self):
        spec = SceneSpec(road_length=150, num_lanes=3, furniture=dict(FULL_FURNITURE), rng_seed=4)
        a, ta = generate_scene(spec)
        b, tb = generate_scene(spec)
        assert a.elements == b.elements
        assert ta.poses == tb.poses

    def test_different_seed_moves_furniture(self):
        f = {"arrow": 2}
        a, _ = generate_scene(SceneSpec(road_length=150, furniture=f, rng_seed=1))
        b, _ = generate_scene(SceneSpec(road_length=150, furniture=f, rng_seed=2))
        pa = [e.points for e in a.elements if e.semantic == "arrow"]
        pb = [e.points for e in b.elements if e.semantic == "arrow"]
        assert pa != pb

    def test_all_elements_valid_and_counts(self):
        spec = SceneSpec(road_length=300, num_lanes=3, furniture=dict(FULL_FURNITURE), rng_seed=2)
        m, traj = generate_scene(spec)
        # construction already validates invariants; check the census
        for sem, count in FULL_FURNITURE.items():
            assert sum(1 for e in m.elements if e.semantic == sem) == count

    def test_trajectory_within_curbs(self):
        spec = SceneSpec(road_length=200, profile="arc", radius=120, num_lanes=3, rng_seed=0)
        m, traj = generate_scene(spec)
        by_id = {e.id: e for e in m.elements}
        for p in traj.poses:
            d_left = distance_to_polyline(np.array([[p.x, p.y]]), by_id["curb_left"].points_array())
            d_right = distance_to_polyline(np.array([[p.x, p.y]]), by_id["curb_right"].points_array())
            w = spec.road_width / 2.0
            assert d_left[0] <= w + 1e-6 and d_right[0] <= w + 1e-6

    def test_overflow_reduces_count(self, caplog):
        spec = SceneSpec(road_length=60, furniture={"crosswalk": 40}, rng_seed=1)
        with caplog.at_level("WARNING"):
            m, _ = generate_scene(spec)
        placed = sum(1 for e in m.elements if e.semantic == "crosswalk")
        assert placed < 40
        assert any("reducing count" in r.message for r in caplog.records)
