import math

import numpy as np
import pytest

from vma.errors import InvalidGeometry, SchemaError, VmaError
from vma.mapio import dumps_map, element_to_dict, loads_map, map_from_dict, map_to_dict
from vma.model import (
    Frame,
    GLOBAL_FRAME,
    GeomKind,
    MapElement,
    VectorizedMap,
    frames_equal,
    normalize_angle,
)


def line(eid="l0", pts=((0, 0), (10, 0)), semantic="curb", **kw):
    return MapElement(eid, GeomKind.LINE, semantic, tuple(pts), **kw)


def arrow(eid="a0", center=(0.0, 0.0)):
    cx, cy = center
    pts = ((cx + 1.5, cy + 0.5), (cx + 1.5, cy - 0.5), (cx - 1.5, cy - 0.5), (cx - 1.5, cy + 0.5))
    return MapElement(eid, GeomKind.DISCRETE, "arrow", pts)


def crosswalk(eid="c0"):
    return MapElement(eid, GeomKind.AREA, "crosswalk", ((0, 0), (4, 0), (4, 2), (0, 2)))


class TestMapElementInvariants:
    def test_line_needs_two_points(self):
        with pytest.raises(InvalidGeometry):
            line(pts=((0, 0),))

    def test_line_rejects_repeated_consecutive(self):
        with pytest.raises(InvalidGeometry):
            line(pts=((0, 0), (0, 0), (1, 1)))

    def test_discrete_needs_exactly_four(self):
        with pytest.raises(InvalidGeometry):
            MapElement("d", GeomKind.DISCRETE, "arrow", ((0, 0), (1, 0), (1, 1)))

    def test_discrete_rejects_bowtie(self):
        with pytest.raises(InvalidGeometry):
            MapElement("d", GeomKind.DISCRETE, "arrow", ((0, 0), (1, 1), (1, 0), (0, 1)))

    def test_discrete_rejects_counterclockwise(self):
        # FL, FR, BR, BL listed counterclockwise (positive signed area)
        with pytest.raises(InvalidGeometry):
            MapElement("d", GeomKind.DISCRETE, "arrow", ((1.5, -0.5), (1.5, 0.5), (-1.5, 0.5), (-1.5, -0.5)))

    def test_area_needs_simple_polygon(self):
        with pytest.raises(InvalidGeometry):
            MapElement("p", GeomKind.AREA, "crosswalk", ((0, 0), (1, 1), (1, 0), (0, 1)))

    def test_area_needs_three_points(self):
        with pytest.raises(InvalidGeometry):
            MapElement("p", GeomKind.AREA, "crosswalk", ((0, 0), (1, 1)))

    def test_confidence_range(self):
        with pytest.raises(VmaError):
            line(confidence=1.5)
        with pytest.raises(VmaError):
            line(confidence=-0.1)

    def test_semantic_kind_compatibility(self):
        with pytest.raises(VmaError):
            MapElement("x", GeomKind.LINE, "arrow", ((0, 0), (1, 0)))
        with pytest.raises(VmaError):
            MapElement("x", GeomKind.AREA, "curb", ((0, 0), (1, 0), (1, 1)))

    def test_unknown_semantic_allowed_any_kind(self):
        e = MapElement("x", GeomKind.LINE, "guardrail_extension", ((0, 0), (1, 0)))
        assert e.semantic == "guardrail_extension"

    def test_attr_registry_enforced(self):
        with pytest.raises(VmaError):
            line(attrs={"lane_type": "solid"})  # curb has no lane_type
        with pytest.raises(VmaError):
            line(attrs={"curb_type": "plastic"})
        ok = line(attrs={"curb_type": "guardrail"})
        assert ok.attrs["curb_type"] == "guardrail"

    def test_non_finite_rejected(self):
        with pytest.raises(InvalidGeometry):
            line(pts=((0, 0), (math.inf, 0)))

    def test_attrs_are_immutable(self):
        e = line(attrs={"curb_type": "road_side"})
        with pytest.raises(TypeError):
            e.attrs["curb_type"] = "guardrail"

    def test_random_invalid_quads_rejected(self):
        rng = np.random.default_rng(21)
        rejected = 0
        for _ in range(200):
            pts = tuple(map(tuple, rng.uniform(-2, 2, size=(4, 2))))
            try:
                MapElement("q", GeomKind.DISCRETE, "arrow", pts)
            except (InvalidGeometry, VmaError):
                rejected += 1
        # random corner soups are mostly invalid (wrong order or crossing)
        assert rejected > 100


class TestFrame:
    def test_global_must_not_carry_transform(self):
        with pytest.raises(VmaError):
            Frame(name="global", theta=0.1, tx=0, ty=0)

    def test_local_needs_transform(self):
        with pytest.raises(VmaError):
            Frame(name="unit:u000")

    def test_round_trip(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            f = Frame(
                name="unit:u", theta=float(rng.uniform(-np.pi, np.pi)),
                tx=float(rng.uniform(-100, 100)), ty=float(rng.uniform(-100, 100)),
            )
            pts = rng.uniform(-50, 50, size=(12, 2))
            back = f.to_local(f.to_global(pts))
            assert np.allclose(back, pts, atol=1e-9)

    def test_frames_equal(self):
        a = Frame(name="unit:u", theta=0.5, tx=1, ty=2)
        b = Frame(name="unit:u", theta=0.5, tx=1, ty=2)
        assert frames_equal(a, b)
        assert not frames_equal(a, GLOBAL_FRAME)


class TestVectorizedMap:
    def test_unique_ids(self):
        with pytest.raises(VmaError):
            VectorizedMap(elements=(line("a"), line("a", pts=((0, 1), (1, 1)))))

    def test_to_global_transforms_points(self):
        f = Frame(name="unit:u", theta=math.pi / 2, tx=10.0, ty=0.0)
        m = VectorizedMap(frame=f, elements=(line(pts=((1, 0), (2, 0))),))
        g = m.to_global()
        assert g.frame.is_global
        assert np.allclose(g.elements[0].points_array(), [(10, 1), (10, 2)])


class TestNormalizeAngle:
    @pytest.mark.parametrize(
        "angle,expected",
        [(0.0, 0.0), (math.pi, math.pi), (-math.pi, math.pi), (3 * math.pi, math.pi), (2 * math.pi, 0.0)],
    )
    def test_range(self, angle, expected):
        out = normalize_angle(angle)
        assert -math.pi < out <= math.pi
        assert out == pytest.approx(expected, abs=1e-12)


class TestMapJson:
    def test_round_trip_full_precision(self):
        x = 1.0 / 3.0
        m = VectorizedMap(elements=(
            line(pts=((x, 2 * x), (5.0, -x))),
            arrow(),
            crosswalk(),
        ))
        again = loads_map(dumps_map(m))
        assert again.frame == m.frame
        for a, b in zip(again.elements, m.elements):
            assert a.id == b.id and a.kind == b.kind and a.semantic == b.semantic
            assert a.points == b.points
            assert dict(a.attrs) == dict(b.attrs)
            assert a.confidence == b.confidence

    def test_strict_rejects_unknown_fields(self):
        d = map_to_dict(VectorizedMap(elements=(line(),)))
        d["surprise"] = 1
        with pytest.raises(SchemaError):
            map_from_dict(d, strict=True)
        assert map_from_dict(d, strict=False).elements[0].id == "l0"

    def test_strict_rejects_unknown_element_fields(self):
        d = map_to_dict(VectorizedMap(elements=(line(),)))
        d["elements"][0]["vendor_blob"] = {}
        with pytest.raises(SchemaError):
            map_from_dict(d, strict=True)
        map_from_dict(d, strict=False)

    def test_schema_version_checked(self):
        d = map_to_dict(VectorizedMap())
        d["schema_version"] = 99
        with pytest.raises(SchemaError):
            map_from_dict(d)

    def test_element_dict_shape(self):
        d = element_to_dict(arrow())
        assert d["kind"] == "discrete"
        assert len(d["points"]) == 4
        assert d["confidence"] == 1.0

    def test_local_frame_round_trip(self):
        f = Frame(name="unit:u007", theta=0.25, tx=3.5, ty=-1.25)
        m = VectorizedMap(frame=f, elements=(line(),))
        again = loads_map(dumps_map(m))
        assert frames_equal(again.frame, f, tol=0.0)
