"""Point sparsification: Douglas-Peucker simplification of merged elements.

Line elements are simplified as open polylines. Area rings are anchored at
their two mutually farthest vertices and each half is simplified separately,
which keeps the result independent of where the ring happens to start.
Discrete elements already carry the minimal 4 corners and pass through.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from vma.errors import InvalidGeometry, VmaError
from vma.geometry import as_points, is_simple_polygon
from vma.model import GeomKind, MapElement, VectorizedMap

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SparsifyConfig:
    epsilon: float = 0.1  # max perpendicular deviation, meters

    def __post_init__(self):
        if self.epsilon < 0.0:
            raise VmaError(f"epsilon must be >= 0, got {self.epsilon}")


def _deviations(pts: np.ndarray, i: int, j: int) -> np.ndarray:
    """Distance of points i+1..j-1 from the chord segment (i, j)."""
    a, b = pts[i], pts[j]
    seg = b - a
    denom = float(seg @ seg)
    mid = pts[i + 1 : j]
    if denom <= 1e-24:
        return np.hypot(mid[:, 0] - a[0], mid[:, 1] - a[1])
    t = np.clip(((mid - a) @ seg) / denom, 0.0, 1.0)
    proj = a + t[:, None] * seg
    return np.hypot(mid[:, 0] - proj[:, 0], mid[:, 1] - proj[:, 1])


def douglas_peucker(points, epsilon: float) -> np.ndarray:
    """Classic recursive farthest-point simplification, iterative form.

    Returns a subsequence of the input always containing the first and last
    points; every removed point lies within epsilon of the output polyline.
    """
    if epsilon < 0.0:
        raise VmaError(f"epsilon must be >= 0, got {epsilon}")
    pts = as_points(points)
    if len(pts) < 2:
        raise InvalidGeometry("polyline needs at least 2 points")
    keep = np.zeros(len(pts), dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, len(pts) - 1)]
    while stack:
        i, j = stack.pop()
        if j - i < 2:
            continue
        dev = _deviations(pts, i, j)
        k = int(np.argmax(dev))
        if dev[k] > epsilon:
            mid = i + 1 + k
            keep[mid] = True
            stack.append((i, mid))
            stack.append((mid, j))
    return pts[keep]


def _farthest_vertex_pair(ring: np.ndarray) -> tuple[int, int]:
    d = np.hypot(ring[:, None, 0] - ring[None, :, 0], ring[:, None, 1] - ring[None, :, 1])
    best = np.unravel_index(np.argmax(d), d.shape)
    i, j = int(min(best)), int(max(best))
    return i, j


def _sparsify_ring(ring: np.ndarray, epsilon: float) -> np.ndarray:
    i, j = _farthest_vertex_pair(ring)
    rolled = np.roll(ring, -i, axis=0)
    split = j - i
    half1 = rolled[: split + 1]
    half2 = np.vstack([rolled[split:], rolled[:1]])
    out1 = douglas_peucker(half1, epsilon)
    out2 = douglas_peucker(half2, epsilon)
    return np.vstack([out1[:-1], out2[:-1]])


def sparsify_element(e: MapElement, cfg: SparsifyConfig) -> MapElement:
    """Simplify one element. If polygon simplification breaks simplicity the
    epsilon is halved up to 4 times, after which the input is returned.
    """
    if e.kind is GeomKind.DISCRETE:
        return e
    pts = e.points_array()
    if e.kind is GeomKind.LINE:
        return e.with_points(douglas_peucker(pts, cfg.epsilon))
    eps = cfg.epsilon
    for _ in range(5):
        ring = _sparsify_ring(pts, eps)
        if len(ring) >= 3 and is_simple_polygon(ring):
            return e.with_points(ring)
        eps /= 2.0
    log.warning("element %s left unsimplified: polygon simplicity kept breaking", e.id)
    return e


def sparsify_map(m: VectorizedMap, cfg: SparsifyConfig) -> VectorizedMap:
    return m.with_elements(sparsify_element(e, cfg) for e in m.elements)
