"""Domain types: map elements, frames, and whole vectorized maps.

Everything here is an immutable value validated at construction time, so
instances can be shared freely between parallel workers.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

from vma.errors import InvalidGeometry, VmaError
from vma.geometry import as_points, is_simple_polygon, polygon_signed_area

Point = tuple[float, float]


class GeomKind(enum.Enum):
    LINE = "line"
    DISCRETE = "discrete"
    AREA = "area"


# Known semantic types and their geometric class. Unregistered semantics are
# allowed (open extension) and may carry any kind.
SEMANTIC_KINDS: dict[str, GeomKind] = {
    "lane_divider": GeomKind.LINE,
    "curb": GeomKind.LINE,
    "stop_line": GeomKind.LINE,
    "arrow": GeomKind.DISCRETE,
    "speed_bump": GeomKind.DISCRETE,
    "lane_sign": GeomKind.DISCRETE,
    "marking": GeomKind.DISCRETE,
    "crosswalk": GeomKind.AREA,
    "diversion": GeomKind.AREA,
}

# Attribute schema per semantic type: attribute name -> legal tags.
ATTRIBUTE_SCHEMA: dict[str, dict[str, tuple[str, ...]]] = {
    "lane_divider": {
        "direction": ("unidirectional", "bidirectional"),
        "lane_type": ("solid", "dotted", "fishbone"),
        "lane_property": ("general", "stay", "tide", "bus", "three_color"),
        "lane_flag": ("single", "double", "triple"),
        "lane_width": ("normal", "wide"),
    },
    "curb": {
        "curb_type": ("ground_side", "road_side", "guardrail"),
    },
    "stop_line": {},
    "arrow": {
        "arrow_type": ("straight", "turn_off", "merge_right", "no_turn_left"),
    },
    "speed_bump": {},
    "lane_sign": {
        "lane_sign_type": ("bike_lane", "bus_lane"),
    },
    "marking": {
        "marking_type": ("diamond_marking", "inverted_triangle_marking"),
    },
    "crosswalk": {},
    "diversion": {},
}


def register_semantic(name: str, kind: GeomKind, attributes: Mapping[str, Iterable[str]] | None = None) -> None:
    """Extend the semantic registry with a new type."""
    SEMANTIC_KINDS[name] = kind
    ATTRIBUTE_SCHEMA[name] = {k: tuple(v) for k, v in (attributes or {}).items()}


def legal_tags(semantic: str, attribute: str) -> tuple[str, ...]:
    return ATTRIBUTE_SCHEMA.get(semantic, {}).get(attribute, ())


def validate_attrs(semantic: str, attrs: Mapping[str, str]) -> None:
    schema = ATTRIBUTE_SCHEMA.get(semantic)
    if schema is None:
        return  # unregistered semantic: attributes are free-form
    for name, tag in attrs.items():
        if name not in schema:
            raise VmaError(f"unknown attribute {name!r} for semantic {semantic!r}")
        if tag not in schema[name]:
            raise VmaError(f"illegal tag {tag!r} for attribute {name!r} of {semantic!r}")


def _check_finite(points: Iterable[Point]) -> tuple[Point, ...]:
    out = []
    for p in points:
        x, y = float(p[0]), float(p[1])
        if not (math.isfinite(x) and math.isfinite(y)):
            raise InvalidGeometry(f"non-finite point {p!r}")
        out.append((x, y))
    return tuple(out)


def _is_simple_quad(pts: tuple[Point, ...]) -> bool:
    # A quadrilateral is simple iff neither pair of opposite edges crosses.
    def crosses(a, b, c, d):
        def ccw(p, q, r):
            return (r[1] - p[1]) * (q[0] - p[0]) - (q[1] - p[1]) * (r[0] - p[0])
        d1, d2 = ccw(c, d, a), ccw(c, d, b)
        d3, d4 = ccw(a, b, c), ccw(a, b, d)
        return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))

    p0, p1, p2, p3 = pts
    return not crosses(p0, p1, p2, p3) and not crosses(p1, p2, p3, p0)


@dataclass(frozen=True)
class MapElement:
    """One vectorized map element: an ordered point sequence plus semantics.

    Line elements are open polylines (>= 2 points), discrete elements are
    exactly the 4 box corners ordered front-left, front-right, back-right,
    back-left (clockwise), and area elements are simple polygons without a
    repeated closing vertex.
    """

    id: str
    kind: GeomKind
    semantic: str
    points: tuple[Point, ...]
    attrs: Mapping[str, str] = field(default_factory=dict)
    confidence: float = 1.0

    def __post_init__(self):
        if not self.id:
            raise VmaError("element id must be non-empty")
        pts = _check_finite(self.points)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "attrs", MappingProxyType(dict(self.attrs)))
        if not 0.0 <= self.confidence <= 1.0:
            raise VmaError(f"confidence {self.confidence} outside [0, 1]")
        expected = SEMANTIC_KINDS.get(self.semantic)
        if expected is not None and expected is not self.kind:
            raise VmaError(
                f"semantic {self.semantic!r} requires kind {expected.value}, got {self.kind.value}"
            )
        validate_attrs(self.semantic, self.attrs)
        if self.kind is GeomKind.LINE:
            if len(pts) < 2:
                raise InvalidGeometry("line element needs >= 2 points")
            d = np.hypot(*(np.diff(as_points(pts), axis=0).T))
            if np.any(d == 0.0):
                raise InvalidGeometry("line element has repeated consecutive points")
        elif self.kind is GeomKind.DISCRETE:
            if len(pts) != 4:
                raise InvalidGeometry(f"discrete element needs exactly 4 corners, got {len(pts)}")
            if len(set(pts)) != 4:
                raise InvalidGeometry("discrete element has repeated corners")
            if not _is_simple_quad(pts):
                raise InvalidGeometry("discrete element corners form a self-intersecting quad")
            if polygon_signed_area(pts) >= 0.0:
                raise InvalidGeometry(
                    "discrete corners must be ordered front-left, front-right, back-right, back-left (clockwise)"
                )
        elif self.kind is GeomKind.AREA:
            if len(pts) < 3:
                raise InvalidGeometry("area element needs >= 3 vertices")
            if not is_simple_polygon(pts):
                raise InvalidGeometry("area element polygon is not simple")

    def points_array(self) -> np.ndarray:
        return as_points(self.points)

    def with_points(self, points) -> "MapElement":
        pts = tuple((float(x), float(y)) for x, y in np.asarray(points, dtype=float))
        return MapElement(self.id, self.kind, self.semantic, pts, dict(self.attrs), self.confidence)

    def with_attrs(self, attrs: Mapping[str, str]) -> "MapElement":
        return MapElement(self.id, self.kind, self.semantic, self.points, dict(attrs), self.confidence)

    def with_id(self, new_id: str) -> "MapElement":
        return MapElement(new_id, self.kind, self.semantic, self.points, dict(self.attrs), self.confidence)


@dataclass(frozen=True)
class Frame:
    """Coordinate frame of a map; non-global frames carry the rigid
    local-to-global transform (rotation theta, then translation).
    """

    name: str = "global"
    unit: str = "meter"
    theta: float | None = None
    tx: float | None = None
    ty: float | None = None

    def __post_init__(self):
        if self.unit not in ("meter", "pixel"):
            raise VmaError(f"frame unit must be 'meter' or 'pixel', got {self.unit!r}")
        has_transform = self.theta is not None
        if has_transform and (self.tx is None or self.ty is None):
            raise VmaError("frame transform needs theta, tx and ty together")
        if self.name == "global" and has_transform:
            raise VmaError("the global frame must not carry a transform")
        if self.name != "global" and not has_transform:
            raise VmaError(f"frame {self.name!r} needs a transform to global")
        if has_transform and not all(math.isfinite(v) for v in (self.theta, self.tx, self.ty)):
            raise VmaError("frame transform must be finite")

    @property
    def is_global(self) -> bool:
        return self.theta is None

    def to_global(self, points) -> np.ndarray:
        pts = as_points(points)
        if self.is_global:
            return pts.copy()
        c, s = math.cos(self.theta), math.sin(self.theta)
        x = c * pts[:, 0] - s * pts[:, 1] + self.tx
        y = s * pts[:, 0] + c * pts[:, 1] + self.ty
        return np.column_stack([x, y])

    def to_local(self, points) -> np.ndarray:
        pts = as_points(points)
        if self.is_global:
            return pts.copy()
        c, s = math.cos(self.theta), math.sin(self.theta)
        dx = pts[:, 0] - self.tx
        dy = pts[:, 1] - self.ty
        return np.column_stack([c * dx + s * dy, -s * dx + c * dy])


GLOBAL_FRAME = Frame()
GLOBAL_PIXEL_FRAME = Frame(unit="pixel")


def frames_equal(a: Frame, b: Frame, tol: float = 1e-9) -> bool:
    if a.name != b.name or a.unit != b.unit or a.is_global != b.is_global:
        return False
    if a.is_global:
        return True
    return (
        abs(a.theta - b.theta) <= tol
        and abs(a.tx - b.tx) <= tol
        and abs(a.ty - b.ty) <= tol
    )


@dataclass(frozen=True)
class VectorizedMap:
    """A set of map elements sharing one coordinate frame."""

    frame: Frame = GLOBAL_FRAME
    elements: tuple[MapElement, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        ids = [e.id for e in self.elements]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise VmaError(f"duplicate element ids in map: {dupes}")

    def __len__(self) -> int:
        return len(self.elements)

    def get(self, element_id: str) -> MapElement | None:
        for e in self.elements:
            if e.id == element_id:
                return e
        return None

    def by_kind(self, kind: GeomKind) -> tuple[MapElement, ...]:
        return tuple(e for e in self.elements if e.kind is kind)

    def semantics(self) -> tuple[str, ...]:
        return tuple(sorted({e.semantic for e in self.elements}))

    def with_elements(self, elements: Iterable[MapElement]) -> "VectorizedMap":
        return VectorizedMap(self.frame, tuple(elements))

    def to_global(self) -> "VectorizedMap":
        """Re-express all elements in the global frame."""
        if self.frame.is_global:
            return self
        moved = [e.with_points(self.frame.to_global(e.points_array())) for e in self.elements]
        return VectorizedMap(Frame(name="global", unit=self.frame.unit), tuple(moved))


def normalize_angle(angle: float) -> float:
    """Normalize to (-pi, pi]."""
    a = math.fmod(angle, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    elif a > math.pi:
        a -= 2.0 * math.pi
    return a
