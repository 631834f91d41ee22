"""Planar geometry primitives: lengths, resampling, distances, polygon overlap.

All functions take point sequences as anything convertible to an Nx2 float
array and return plain numpy arrays or floats. Coordinates are meters unless
the caller's frame says otherwise; nothing here cares about units.
"""
from __future__ import annotations

import numpy as np
from shapely.geometry import Polygon as _ShapelyPolygon

from vma.errors import InvalidGeometry

_EPS = 1e-12


def as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise InvalidGeometry(f"expected an Nx2 point array, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise InvalidGeometry("points contain NaN or Inf")
    return pts


def segment_lengths(points) -> np.ndarray:
    pts = as_points(points)
    d = np.diff(pts, axis=0)
    return np.hypot(d[:, 0], d[:, 1])


def polyline_length(points) -> float:
    """Total Euclidean length of an open polyline (at least 2 points)."""
    pts = as_points(points)
    if len(pts) < 2:
        raise InvalidGeometry("polyline needs at least 2 points")
    return float(segment_lengths(pts).sum())


def cumulative_arclength(points) -> np.ndarray:
    """Arc-length position of every vertex, starting at 0."""
    return np.concatenate([[0.0], np.cumsum(segment_lengths(points))])


def _dedupe_consecutive(pts: np.ndarray, tol: float = 0.0) -> np.ndarray:
    if len(pts) < 2:
        return pts
    keep = np.ones(len(pts), dtype=bool)
    d = np.hypot(*(np.diff(pts, axis=0).T))
    keep[1:] = d > tol
    return pts[keep]


def resample_uniform(points, n: int) -> np.ndarray:
    """n points along the polyline at equal arc-length spacing.

    Endpoints are preserved exactly; interior points are linearly
    interpolated at arc positions i*L/(n-1).
    """
    if n < 2:
        raise InvalidGeometry(f"resample target must be >= 2, got {n}")
    pts = as_points(points)
    if len(pts) < 2:
        raise InvalidGeometry("polyline needs at least 2 points")
    pts = _dedupe_consecutive(pts)
    if len(pts) < 2:
        raise InvalidGeometry("degenerate zero-length polyline")
    cs = cumulative_arclength(pts)
    total = cs[-1]
    if total <= 0.0:
        raise InvalidGeometry("degenerate zero-length polyline")
    targets = np.linspace(0.0, total, n)
    out = np.column_stack([
        np.interp(targets, cs, pts[:, 0]),
        np.interp(targets, cs, pts[:, 1]),
    ])
    out[0] = pts[0]
    out[-1] = pts[-1]
    return out


def resample_closed(points, n: int) -> np.ndarray:
    """n points along a closed ring at equal spacing, starting at vertex 0.

    Input and output omit the repeated closing vertex.
    """
    if n < 3:
        raise InvalidGeometry(f"ring resample target must be >= 3, got {n}")
    pts = as_points(points)
    if len(pts) < 3:
        raise InvalidGeometry("ring needs at least 3 points")
    ring = np.vstack([pts, pts[:1]])
    ring = _dedupe_consecutive(ring)
    if len(ring) < 2:
        raise InvalidGeometry("degenerate zero-length ring")
    cs = cumulative_arclength(ring)
    total = cs[-1]
    if total <= 0.0:
        raise InvalidGeometry("degenerate zero-length ring")
    targets = np.arange(n) * (total / n)
    out = np.column_stack([
        np.interp(targets, cs, ring[:, 0]),
        np.interp(targets, cs, ring[:, 1]),
    ])
    out[0] = pts[0]
    return out


def point_segment_distance(p, a, b) -> float:
    """Distance from p to the closed segment ab (a == b degenerates to a point)."""
    p = np.asarray(p, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ab = b - a
    denom = float(ab @ ab)
    if denom <= _EPS:
        return float(np.hypot(*(p - a)))
    t = float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
    return float(np.hypot(*(p - (a + t * ab))))


def point_line_distance(p, a, b) -> float:
    """Distance from p to the unbounded line through a and b."""
    p = np.asarray(p, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ab = b - a
    norm = float(np.hypot(*ab))
    if norm <= _EPS:
        return float(np.hypot(*(p - a)))
    return float(abs(ab[0] * (p[1] - a[1]) - ab[1] * (p[0] - a[0])) / norm)


def _segments_of(points) -> tuple[np.ndarray, np.ndarray]:
    pts = as_points(points)
    if len(pts) == 1:
        return pts, pts
    return pts[:-1], pts[1:]


def points_to_polyline(query, polyline) -> tuple[np.ndarray, np.ndarray]:
    """Distance and arc-length position of the closest polyline point,
    for every query point. Returns (distances, arc_positions), each (M,).
    """
    q = as_points(query)
    pts = as_points(polyline)
    if len(pts) == 0:
        raise InvalidGeometry("polyline is empty")
    a, b = _segments_of(pts)
    ab = b - a                                      # (S, 2)
    denom = np.einsum("ij,ij->i", ab, ab)           # (S,)
    safe = np.where(denom <= _EPS, 1.0, denom)
    ap = q[:, None, :] - a[None, :, :]              # (M, S, 2)
    t = np.einsum("msj,sj->ms", ap, ab) / safe[None, :]
    t = np.clip(np.where(denom[None, :] <= _EPS, 0.0, t), 0.0, 1.0)
    proj = a[None, :, :] + t[:, :, None] * ab[None, :, :]
    d = np.hypot(q[:, None, 0] - proj[:, :, 0], q[:, None, 1] - proj[:, :, 1])
    idx = np.argmin(d, axis=1)
    rows = np.arange(len(q))
    seg_start = cumulative_arclength(pts)[:-1] if len(pts) > 1 else np.zeros(1)
    seg_len = np.sqrt(denom)
    arcs = seg_start[idx] + t[rows, idx] * seg_len[idx]
    return d[rows, idx], arcs


def distance_to_polyline(query, polyline) -> np.ndarray:
    return points_to_polyline(query, polyline)[0]


def chamfer_distance(a_points, b_points) -> float:
    """Symmetric chamfer between two point sets: the two directed
    mean-of-minimum distances, averaged.
    """
    a = as_points(a_points)
    b = as_points(b_points)
    if len(a) == 0 or len(b) == 0:
        raise InvalidGeometry("chamfer distance needs non-empty point sets")
    d = np.hypot(a[:, None, 0] - b[None, :, 0], a[:, None, 1] - b[None, :, 1])
    return float((d.min(axis=1).mean() + d.min(axis=0).mean()) / 2.0)


def hausdorff_distance(a_points, b_points) -> float:
    """Symmetric Hausdorff distance between two point sets."""
    a = as_points(a_points)
    b = as_points(b_points)
    if len(a) == 0 or len(b) == 0:
        raise InvalidGeometry("Hausdorff distance needs non-empty point sets")
    d = np.hypot(a[:, None, 0] - b[None, :, 0], a[:, None, 1] - b[None, :, 1])
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def polygon_signed_area(points) -> float:
    pts = as_points(points)
    x, y = pts[:, 0], pts[:, 1]
    return float(0.5 * (np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def to_shapely_polygon(points) -> _ShapelyPolygon:
    pts = as_points(points)
    if len(pts) < 3:
        raise InvalidGeometry("polygon needs at least 3 vertices")
    poly = _ShapelyPolygon(pts)
    if not poly.is_valid:
        raise InvalidGeometry("polygon is self-intersecting or degenerate")
    return poly


def is_simple_polygon(points) -> bool:
    try:
        pts = as_points(points)
    except InvalidGeometry:
        return False
    if len(pts) < 3:
        return False
    poly = _ShapelyPolygon(pts)
    return bool(poly.is_valid and poly.area > 0.0)


def polygon_iou(p_points, q_points) -> float:
    """Intersection area over union area of two simple polygons."""
    p = to_shapely_polygon(p_points)
    q = to_shapely_polygon(q_points)
    inter = p.intersection(q).area
    union = p.union(q).area
    if union <= 0.0:
        raise InvalidGeometry("polygons have zero total area")
    return float(inter / union)


def densify(points, step: float, closed: bool = False) -> np.ndarray:
    """Points along the polyline (or ring) with spacing <= step,
    always including the original vertices.
    """
    if step <= 0.0:
        raise InvalidGeometry(f"densify step must be positive, got {step}")
    pts = as_points(points)
    if closed:
        pts = np.vstack([pts, pts[:1]])
    if len(pts) < 2:
        return pts.copy()
    chunks = [pts[:1]]
    for i in range(len(pts) - 1):
        a, b = pts[i], pts[i + 1]
        seg = float(np.hypot(*(b - a)))
        k = max(int(np.ceil(seg / step)), 1)
        ts = np.arange(1, k + 1) / k
        chunks.append(a[None, :] + ts[:, None] * (b - a)[None, :])
    out = np.vstack(chunks)
    if closed:
        out = out[:-1]
    return out


def rotation_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])
