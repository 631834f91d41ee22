import numpy as np
import pytest

from vma.errors import VmaError
from vma.geometry import distance_to_polyline
from vma.model import GeomKind, MapElement
from vma.sparsify import SparsifyConfig, douglas_peucker, sparsify_element, sparsify_map
from vma.model import VectorizedMap


def random_polyline(rng, n=None):
    n = n or int(rng.integers(3, 30))
    x = np.cumsum(rng.uniform(0.2, 2.0, size=n))
    y = rng.uniform(-3.0, 3.0, size=n)
    return np.column_stack([x, y])


def is_subsequence(sub, full):
    i = 0
    for p in full:
        if i < len(sub) and np.array_equal(sub[i], p):
            i += 1
    return i == len(sub)


class TestDouglasPeucker:
    def test_near_collinear_collapses(self):
        out = douglas_peucker([(0, 0), (1, 0.001), (2, 0)], 0.01)
        assert np.allclose(out, [(0, 0), (2, 0)])

    def test_apex_above_epsilon_kept(self):
        pts = [(0, 0), (1, 1), (2, 0)]
        out = douglas_peucker(pts, 0.5)
        assert np.allclose(out, pts)

    def test_zero_epsilon_keeps_noncollinear(self):
        rng = np.random.default_rng(41)
        pts = random_polyline(rng, 12)
        out = douglas_peucker(pts, 0.0)
        # only exactly-collinear points may be dropped; here none are
        assert len(out) == len(pts)

    def test_zero_epsilon_drops_exactly_collinear(self):
        out = douglas_peucker([(0, 0), (1, 0), (2, 0), (2, 1)], 0.0)
        assert np.allclose(out, [(0, 0), (2, 0), (2, 1)])

    def test_negative_epsilon_rejected(self):
        with pytest.raises(VmaError):
            douglas_peucker([(0, 0), (1, 0)], -0.1)

    def test_subsequence_property(self):
        rng = np.random.default_rng(43)
        for _ in range(100):
            pts = random_polyline(rng)
            out = douglas_peucker(pts, float(rng.uniform(0, 2)))
            assert is_subsequence(out, pts)
            assert np.array_equal(out[0], pts[0]) and np.array_equal(out[-1], pts[-1])

    def test_deviation_bound(self):
        rng = np.random.default_rng(47)
        for _ in range(100):
            pts = random_polyline(rng)
            eps = float(rng.uniform(0.01, 2))
            out = douglas_peucker(pts, eps)
            d = distance_to_polyline(pts, out)
            assert float(d.max()) <= eps + 1e-9

    def test_monotone_in_epsilon(self):
        rng = np.random.default_rng(53)
        grid = [0.01, 0.05, 0.1, 0.5, 1.0, 2.0]
        for _ in range(50):
            pts = random_polyline(rng)
            counts = [len(douglas_peucker(pts, e)) for e in grid]
            assert all(b <= a for a, b in zip(counts, counts[1:]))

    def test_idempotent(self):
        rng = np.random.default_rng(59)
        for _ in range(100):
            pts = random_polyline(rng)
            eps = float(rng.uniform(0.01, 1.5))
            once = douglas_peucker(pts, eps)
            twice = douglas_peucker(once, eps)
            assert np.array_equal(once, twice)


def curb(pts):
    return MapElement("c", GeomKind.LINE, "curb", tuple(map(tuple, pts)))


class TestSparsifyElement:
    def test_discrete_untouched(self):
        quad = ((1.5, 0.5), (1.5, -0.5), (-1.5, -0.5), (-1.5, 0.5))
        e = MapElement("a", GeomKind.DISCRETE, "arrow", quad)
        assert sparsify_element(e, SparsifyConfig(0.1)) == e

    def test_straight_fifty_point_line_collapses_to_two(self):
        pts = [(i, 0.0) for i in np.linspace(0, 49, 50)]
        out = sparsify_element(curb(pts), SparsifyConfig(0.05))
        assert len(out.points) == 2

    def test_polygon_keeps_simplicity_and_vertices(self):
        theta = np.linspace(0, 2 * np.pi, 51)[:-1]
        ring = np.column_stack([10 * np.cos(theta), 10 * np.sin(theta)])
        e = MapElement("d", GeomKind.AREA, "diversion", tuple(map(tuple, ring)))
        counts = []
        for eps in (0.01, 0.1, 1.0):
            out = sparsify_element(e, SparsifyConfig(eps))
            assert out.kind is GeomKind.AREA
            assert len(out.points) >= 3
            counts.append(len(out.points))
        assert all(b <= a for a, b in zip(counts, counts[1:]))

    def test_polygon_rotation_independent_for_rect(self):
        ring = [(0, 0), (10, 0), (10, 4), (0, 4)]
        outs = []
        for k in range(4):
            rotated = tuple(ring[k:] + ring[:k])
            e = MapElement("c", GeomKind.AREA, "crosswalk", rotated)
            out = sparsify_element(e, SparsifyConfig(0.1))
            outs.append(set(out.points))
        assert all(o == outs[0] for o in outs)

    def test_polygon_idempotent(self):
        theta = np.linspace(0, 2 * np.pi, 41)[:-1]
        ring = np.column_stack([5 * np.cos(theta), 3 * np.sin(theta)])
        e = MapElement("d", GeomKind.AREA, "diversion", tuple(map(tuple, ring)))
        once = sparsify_element(e, SparsifyConfig(0.2))
        twice = sparsify_element(once, SparsifyConfig(0.2))
        assert once.points == twice.points

    def test_map_level(self):
        m = VectorizedMap(elements=(curb([(i, 0.0) for i in range(30)]),))
        out = sparsify_map(m, SparsifyConfig(0.1))
        assert len(out.elements[0].points) == 2
