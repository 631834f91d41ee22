"""Synthetic ground-truth scenes: an analytic road (straight, arc, or
s-curve) with curbs, lane dividers, road furniture, and a centerline
trajectory. Geometry is computed on the analytic centerline and sampled at
1 m, so generated maps are exact and deterministic per seed.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from vma.errors import SchemaError, VmaError
from vma.model import GeomKind, MapElement, VectorizedMap
from vma.split import Pose2D, Trajectory

log = logging.getLogger(__name__)

PROFILES = ("straight", "arc", "s_curve")

FULL_FURNITURE = {
    "arrow": 4,
    "stop_line": 2,
    "crosswalk": 2,
    "speed_bump": 2,
    "marking": 2,
    "lane_sign": 2,
    "diversion": 2,
}

_ARROW_TYPES = ("straight", "turn_off", "merge_right", "no_turn_left")
_MARKING_TYPES = ("diamond_marking", "inverted_triangle_marking")
_LANE_SIGN_TYPES = ("bike_lane", "bus_lane")
_CURB_TYPES = ("road_side", "ground_side")


@dataclass(frozen=True)
class SceneSpec:
    road_length: float = 300.0
    profile: str = "straight"
    radius: float | None = None
    num_lanes: int = 3
    lane_width: float = 3.5
    furniture: Mapping[str, int] = field(default_factory=dict)
    rng_seed: int = 0

    def __post_init__(self):
        if self.road_length <= 0.0 or self.lane_width <= 0.0:
            raise VmaError("road_length and lane_width must be positive")
        if self.num_lanes < 1:
            raise VmaError("num_lanes must be >= 1")
        if self.profile not in PROFILES:
            raise VmaError(f"unknown curvature profile {self.profile!r}")
        if self.profile != "straight":
            if self.radius is None or self.radius <= 0.0:
                raise VmaError(f"profile {self.profile!r} needs a positive radius")
            if self.radius <= self.road_width:
                raise VmaError("radius must exceed the road width")
        object.__setattr__(self, "furniture", dict(self.furniture))
        for sem, count in self.furniture.items():
            if sem not in FULL_FURNITURE:
                raise VmaError(f"unknown furniture semantic {sem!r}")
            if count < 0:
                raise VmaError(f"negative furniture count for {sem!r}")

    @property
    def road_width(self) -> float:
        return self.num_lanes * self.lane_width

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "road_length": self.road_length,
            "profile": self.profile,
            "radius": self.radius,
            "num_lanes": self.num_lanes,
            "lane_width": self.lane_width,
            "furniture": dict(self.furniture),
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "SceneSpec":
        if not isinstance(obj, dict):
            raise SchemaError("scene spec must be an object")
        known = {
            "schema_version", "road_length", "profile", "radius",
            "num_lanes", "lane_width", "furniture", "rng_seed",
        }
        unknown = set(obj) - known
        if unknown:
            raise SchemaError(f"unknown scene spec fields {sorted(unknown)}")
        return cls(
            road_length=float(obj.get("road_length", 300.0)),
            profile=obj.get("profile", "straight"),
            radius=None if obj.get("radius") is None else float(obj["radius"]),
            num_lanes=int(obj.get("num_lanes", 3)),
            lane_width=float(obj.get("lane_width", 3.5)),
            furniture=obj.get("furniture", {}),
            rng_seed=int(obj.get("rng_seed", 0)),
        )


class Centerline:
    """Analytic centerline, parameterized by arc length."""

    def __init__(self, spec: SceneSpec):
        self.spec = spec
        if spec.profile == "s_curve":
            half = spec.road_length / 2.0
            x, y, theta = self._arc_pose(np.array([half]), spec.radius, 0.0, 0.0, 0.0, left=True)
            self._mid = (float(x[0]), float(y[0]), float(theta[0]), half)

    @staticmethod
    def _arc_pose(s, radius, x0, y0, theta0, left: bool):
        sign = 1.0 if left else -1.0
        theta = theta0 + sign * s / radius
        # turning center sits one radius along the left (or right) normal
        cx = x0 + radius * sign * (-math.sin(theta0))
        cy = y0 + radius * sign * math.cos(theta0)
        x = cx - radius * sign * (-np.sin(theta))
        y = cy - radius * sign * np.cos(theta)
        return x, y, theta

    def pose(self, s) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        spec = self.spec
        if spec.profile == "straight":
            return s.copy(), np.zeros_like(s), np.zeros_like(s)
        if spec.profile == "arc":
            return self._arc_pose(s, spec.radius, 0.0, 0.0, 0.0, left=True)
        x0, y0, theta0, half = self._mid
        first = s <= half
        xa, ya, ta = self._arc_pose(np.minimum(s, half), spec.radius, 0.0, 0.0, 0.0, left=True)
        xb, yb, tb = self._arc_pose(np.maximum(s - half, 0.0), spec.radius, x0, y0, theta0, left=False)
        return np.where(first, xa, xb), np.where(first, ya, yb), np.where(first, ta, tb)

    def offset(self, s, d) -> np.ndarray:
        """Point(s) at lateral offset d (positive = left of heading)."""
        x, y, theta = self.pose(s)
        d = np.broadcast_to(np.asarray(d, dtype=float), x.shape)
        return np.column_stack([x - d * np.sin(theta), y + d * np.cos(theta)])


def _stations(length: float, spacing: float = 1.0) -> np.ndarray:
    s = np.arange(0.0, length, spacing)
    if length - s[-1] > 1e-9:
        s = np.append(s, length)
    return s


def _quad(cl: Centerline, s: float, d: float, half_len: float, half_width: float) -> np.ndarray:
    # front-left, front-right, back-right, back-left: clockwise
    corners = [
        (s + half_len, d + half_width),
        (s + half_len, d - half_width),
        (s - half_len, d - half_width),
        (s - half_len, d + half_width),
    ]
    return np.vstack([cl.offset(si, di) for si, di in corners])


def generate_scene(spec: SceneSpec) -> tuple[VectorizedMap, Trajectory]:
    """Build the ground-truth map and centerline trajectory for a spec."""
    cl = Centerline(spec)
    length = spec.road_length
    width = spec.road_width
    rng = np.random.default_rng(spec.rng_seed)
    stations = _stations(length)
    elements: list[MapElement] = []

    for i, side in enumerate((+1.0, -1.0)):
        pts = cl.offset(stations, side * width / 2.0)
        elements.append(
            MapElement(
                id=f"curb_{'left' if side > 0 else 'right'}",
                kind=GeomKind.LINE,
                semantic="curb",
                points=tuple(map(tuple, pts)),
                attrs={"curb_type": _CURB_TYPES[i % len(_CURB_TYPES)]},
            )
        )
    for k in range(1, spec.num_lanes):
        d = width / 2.0 - k * spec.lane_width
        pts = cl.offset(stations, d)
        elements.append(
            MapElement(
                id=f"divider_{k - 1:02d}",
                kind=GeomKind.LINE,
                semantic="lane_divider",
                points=tuple(map(tuple, pts)),
                attrs={
                    "lane_type": "solid" if k % 2 == 1 else "dotted",
                    "direction": "unidirectional",
                },
            )
        )

    # furniture placement: reserved longitudinal intervals keep instances apart
    reserved: list[tuple[float, float]] = []

    def place(extent_s: float, tries: int = 200) -> float | None:
        margin = min(10.0, length / 10.0)
        lo, hi = margin, length - margin
        if hi <= lo:
            return None
        for _ in range(tries):
            s = float(rng.uniform(lo, hi))
            span = (s - extent_s - 3.0, s + extent_s + 3.0)
            if all(span[1] < a or span[0] > b for a, b in reserved):
                reserved.append(span)
                return s
        return None

    def lane_center(lane: int) -> float:
        return width / 2.0 - (lane + 0.5) * spec.lane_width

    counts = {sem: int(spec.furniture.get(sem, 0)) for sem in FULL_FURNITURE}
    for sem in FULL_FURNITURE:  # fixed order keeps rng use deterministic
        for idx in range(counts[sem]):
            lane = int(rng.integers(0, spec.num_lanes))
            eid = f"{sem}_{idx:02d}"
            if sem == "arrow":
                s = place(1.5)
                if s is None:
                    log.warning("could not place %s; reducing count", eid)
                    continue
                pts = _quad(cl, s, lane_center(lane), 1.5, 0.5)
                elements.append(MapElement(eid, GeomKind.DISCRETE, sem, tuple(map(tuple, pts)),
                                           {"arrow_type": _ARROW_TYPES[lane % len(_ARROW_TYPES)]}))
            elif sem == "stop_line":
                s = place(0.5)
                if s is None:
                    log.warning("could not place %s; reducing count", eid)
                    continue
                n = max(int(math.ceil(width)), 2)
                ds = np.linspace(-width / 2.0 + 0.2, width / 2.0 - 0.2, n)
                pts = np.vstack([cl.offset(s, d)[0] for d in ds])
                elements.append(MapElement(eid, GeomKind.LINE, sem, tuple(map(tuple, pts)), {}))
            elif sem == "crosswalk":
                s = place(3.5)
                if s is None:
                    log.warning("could not place %s; reducing count", eid)
                    continue
                d = width / 2.0 - 0.2
                ring = np.vstack([
                    cl.offset(s, d), cl.offset(s + 3.0, d),
                    cl.offset(s + 3.0, -d), cl.offset(s, -d),
                ])
                elements.append(MapElement(eid, GeomKind.AREA, sem, tuple(map(tuple, ring)), {}))
            elif sem == "speed_bump":
                s = place(0.75)
                if s is None:
                    log.warning("could not place %s; reducing count", eid)
                    continue
                pts = _quad(cl, s, 0.0, 0.25, width / 2.0 - 0.3)
                elements.append(MapElement(eid, GeomKind.DISCRETE, sem, tuple(map(tuple, pts)), {}))
            elif sem == "marking":
                s = place(1.0)
                if s is None:
                    log.warning("could not place %s; reducing count", eid)
                    continue
                pts = _quad(cl, s, lane_center(lane), 0.45, 0.35)
                elements.append(MapElement(eid, GeomKind.DISCRETE, sem, tuple(map(tuple, pts)),
                                           {"marking_type": _MARKING_TYPES[lane % len(_MARKING_TYPES)]}))
            elif sem == "lane_sign":
                s = place(1.25)
                if s is None:
                    log.warning("could not place %s; reducing count", eid)
                    continue
                pts = _quad(cl, s, lane_center(lane), 1.0, 0.5)
                elements.append(MapElement(eid, GeomKind.DISCRETE, sem, tuple(map(tuple, pts)),
                                           {"lane_sign_type": _LANE_SIGN_TYPES[lane % len(_LANE_SIGN_TYPES)]}))
            elif sem == "diversion":
                s = place(2.5)
                if s is None:
                    log.warning("could not place %s; reducing count", eid)
                    continue
                d = lane_center(lane)
                hw = spec.lane_width / 2.0 - 0.5
                ring = np.vstack([
                    cl.offset(s - 2.0, d + hw), cl.offset(s + 2.0, d + hw),
                    cl.offset(s + 2.0, d - hw), cl.offset(s - 2.0, d - hw),
                ])
                elements.append(MapElement(eid, GeomKind.AREA, sem, tuple(map(tuple, ring)), {}))

    x, y, theta = cl.pose(stations)
    poses = tuple(
        Pose2D(t=float(i), x=float(x[i]), y=float(y[i]), yaw=float(theta[i]))
        for i in range(len(stations))
    )
    return VectorizedMap(elements=tuple(elements)), Trajectory(poses)
