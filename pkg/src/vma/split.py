"""Odometry-based scene splitting: sample ego poses along the trajectory and
crop the global map into overlapped, heading-aligned square annotation units.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from shapely.geometry import GeometryCollection, LineString, MultiLineString, MultiPolygon, Polygon, box

from vma.errors import EmptyTrajectory, SchemaError, VmaError
from vma.geometry import cumulative_arclength
from vma.model import Frame, GeomKind, MapElement, VectorizedMap, normalize_angle

log = logging.getLogger(__name__)

DEFAULT_EXTENT = 50.0
DEFAULT_STRIDE = 25.0


@dataclass(frozen=True)
class Pose2D:
    t: float
    x: float
    y: float
    yaw: float

    def __post_init__(self):
        for v in (self.t, self.x, self.y, self.yaw):
            if not math.isfinite(v):
                raise VmaError(f"non-finite pose field in {self!r}")
        object.__setattr__(self, "yaw", normalize_angle(self.yaw))


@dataclass(frozen=True)
class Trajectory:
    poses: tuple[Pose2D, ...]

    def __post_init__(self):
        object.__setattr__(self, "poses", tuple(self.poses))
        if not self.poses:
            raise EmptyTrajectory("trajectory has no poses")
        ts = [p.t for p in self.poses]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise VmaError("trajectory timestamps must be strictly increasing")

    def positions(self) -> np.ndarray:
        return np.array([[p.x, p.y] for p in self.poses])

    def __len__(self) -> int:
        return len(self.poses)


def trajectory_to_list(traj: Trajectory) -> list[dict]:
    return [{"t": p.t, "x": p.x, "y": p.y, "yaw": p.yaw} for p in traj.poses]


def trajectory_from_list(obj) -> Trajectory:
    if not isinstance(obj, list):
        raise SchemaError("trajectory JSON must be an array of poses")
    try:
        poses = tuple(Pose2D(float(p["t"]), float(p["x"]), float(p["y"]), float(p["yaw"])) for p in obj)
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed pose entry: {exc}") from exc
    return Trajectory(poses)


def save_trajectory(traj: Trajectory, path) -> None:
    Path(path).write_text(json.dumps(trajectory_to_list(traj), indent=2) + "\n", encoding="utf-8")


def load_trajectory(path) -> Trajectory:
    return trajectory_from_list(json.loads(Path(path).read_text(encoding="utf-8")))


def _interp_pose(a: Pose2D, b: Pose2D, frac: float) -> Pose2D:
    dyaw = normalize_angle(b.yaw - a.yaw)
    return Pose2D(
        t=a.t + frac * (b.t - a.t),
        x=a.x + frac * (b.x - a.x),
        y=a.y + frac * (b.y - a.y),
        yaw=normalize_angle(a.yaw + frac * dyaw),
    )


def sample_positions(traj: Trajectory, stride: float) -> list[Pose2D]:
    """Poses at fixed arc-length intervals along the trajectory.

    The first pose is always included, then one sample per full stride of
    travelled distance, and finally the last pose.
    """
    if stride <= 0.0:
        raise VmaError(f"stride must be positive, got {stride}")
    poses = traj.poses
    if len(poses) == 1:
        return [poses[0]]
    cs = cumulative_arclength(traj.positions())
    total = float(cs[-1])
    if total <= 0.0:
        return [poses[0]]
    targets = list(np.arange(0.0, total, stride))
    if total - targets[-1] > 1e-9:
        targets.append(total)
    out: list[Pose2D] = []
    for s in targets:
        if s >= total:
            out.append(poses[-1])
            continue
        i = int(np.searchsorted(cs, s, side="right") - 1)
        i = min(max(i, 0), len(poses) - 2)
        seg = cs[i + 1] - cs[i]
        frac = 0.0 if seg <= 0.0 else float((s - cs[i]) / seg)
        out.append(_interp_pose(poses[i], poses[i + 1], frac))
    return out


@dataclass(frozen=True)
class AnnotationUnit:
    """One square crop of the scene, expressed in its own local frame."""

    id: str
    center: Pose2D
    extent: float
    frame: Frame
    elements: tuple[MapElement, ...]
    provenance: dict = None  # fragment id -> source element id; diagnostics only

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        object.__setattr__(self, "provenance", dict(self.provenance or {}))
        if self.extent <= 0.0:
            raise VmaError(f"unit extent must be positive, got {self.extent}")
        half = self.extent / 2.0 + 1e-6
        for e in self.elements:
            if e.kind is GeomKind.DISCRETE:
                continue  # included whole by the centroid rule; may overhang
            pts = e.points_array()
            if np.any(np.abs(pts) > half):
                raise VmaError(f"element {e.id!r} exceeds the unit square")

    def local_map(self) -> VectorizedMap:
        return VectorizedMap(frame=self.frame, elements=self.elements)


def unit_frame(unit_id: str, center: Pose2D, heading_aligned: bool = True, unit: str = "meter") -> Frame:
    theta = center.yaw if heading_aligned else 0.0
    return Frame(name=f"unit:{unit_id}", unit=unit, theta=theta, tx=center.x, ty=center.y)


def _line_fragments(local_pts: np.ndarray, clip: Polygon, half: float) -> list[np.ndarray]:
    if np.all(np.abs(local_pts) <= half):
        return [local_pts]  # fully inside: no clipping, keep exact coords
    geom = LineString(local_pts).intersection(clip)
    pieces: list[LineString] = []
    if isinstance(geom, LineString):
        pieces = [geom]
    elif isinstance(geom, (MultiLineString, GeometryCollection)):
        pieces = [g for g in geom.geoms if isinstance(g, LineString)]
    out = []
    for piece in pieces:
        if piece.length <= 1e-9:
            continue
        pts = np.asarray(piece.coords, dtype=float)
        keep = np.concatenate([[True], np.hypot(*(np.diff(pts, axis=0).T)) > 1e-12])
        pts = pts[keep]
        if len(pts) >= 2:
            out.append(pts)
    # deterministic order: along the original line
    out.sort(key=lambda p: LineString(local_pts).project(_first_point(p)))
    return out


def _first_point(pts: np.ndarray):
    from shapely.geometry import Point

    return Point(pts[0])


def _area_fragments(local_pts: np.ndarray, clip: Polygon, half: float) -> list[np.ndarray]:
    if np.all(np.abs(local_pts) <= half):
        return [local_pts]
    poly = Polygon(local_pts)
    if not poly.is_valid:
        poly = poly.buffer(0.0)
    geom = poly.intersection(clip)
    pieces: list[Polygon] = []
    if isinstance(geom, Polygon):
        pieces = [geom]
    elif isinstance(geom, (MultiPolygon, GeometryCollection)):
        pieces = [g for g in geom.geoms if isinstance(g, Polygon)]
    out = []
    for piece in pieces:
        if piece.area <= 1e-9:
            continue
        if piece.interiors:
            log.warning("dropping %d hole(s) produced by area clipping", len(piece.interiors))
        ring = np.asarray(piece.exterior.coords, dtype=float)[:-1]
        keep = np.ones(len(ring), dtype=bool)
        keep[1:] = np.hypot(*(np.diff(ring, axis=0).T)) > 1e-12
        ring = ring[keep]
        if len(ring) >= 3:
            out.append(ring)
    out.sort(key=lambda r: (r[0, 0], r[0, 1]))
    return out


def crop_unit(
    vmap: VectorizedMap,
    center: Pose2D,
    extent: float = DEFAULT_EXTENT,
    unit_id: str = "u000",
    heading_aligned: bool = True,
) -> AnnotationUnit:
    """Crop one annotation unit around a sampled ego pose.

    Line and area elements are clipped to the unit square, each connected
    piece becoming a fragment with the source id suffixed ':0', ':1', ...
    Discrete elements are copied whole when their centroid falls inside.
    """
    if not vmap.frame.is_global:
        raise VmaError("crop_unit expects a map in the global frame")
    if extent <= 0.0:
        raise VmaError(f"extent must be positive, got {extent}")
    frame = unit_frame(unit_id, center, heading_aligned, unit=vmap.frame.unit)
    half = extent / 2.0
    clip = box(-half, -half, half, half)
    fragments: list[MapElement] = []
    provenance: dict[str, str] = {}
    for e in vmap.elements:
        local = frame.to_local(e.points_array())
        if e.kind is GeomKind.DISCRETE:
            cx, cy = local.mean(axis=0)
            if abs(cx) <= half and abs(cy) <= half:
                fragments.append(e.with_points(local))
                provenance[e.id] = e.id
            continue
        if e.kind is GeomKind.LINE:
            pieces = _line_fragments(local, clip, half)
        else:
            pieces = _area_fragments(local, clip, half)
        for k, pts in enumerate(pieces):
            frag_id = f"{e.id}:{k}"
            fragments.append(e.with_points(pts).with_id(frag_id))
            provenance[frag_id] = e.id
    return AnnotationUnit(
        id=unit_id,
        center=center,
        extent=extent,
        frame=frame,
        elements=tuple(fragments),
        provenance=provenance,
    )


def unit_from_map(m: VectorizedMap, extent: float = DEFAULT_EXTENT) -> AnnotationUnit:
    """Rebuild an annotation unit from a persisted unit map JSON.

    The unit id comes from the frame name and the center pose from the
    frame transform (the pose timestamp is not stored and reads back as 0).
    """
    if m.frame.is_global or not m.frame.name.startswith("unit:"):
        raise VmaError(f"not a unit-frame map: {m.frame.name!r}")
    unit_id = m.frame.name.split(":", 1)[1]
    center = Pose2D(t=0.0, x=m.frame.tx, y=m.frame.ty, yaw=m.frame.theta)
    return AnnotationUnit(
        id=unit_id,
        center=center,
        extent=extent,
        frame=m.frame,
        elements=m.elements,
        provenance={},
    )


def split_scene(
    vmap: VectorizedMap,
    traj: Trajectory,
    extent: float = DEFAULT_EXTENT,
    stride: float = DEFAULT_STRIDE,
    heading_aligned: bool = True,
) -> list[AnnotationUnit]:
    """Split the scene into overlapped annotation units along the trajectory."""
    if stride >= extent:
        log.warning(
            "stride %.3f >= extent %.3f: adjacent units will not overlap", stride, extent
        )
    centers = sample_positions(traj, stride)
    return [
        crop_unit(vmap, c, extent=extent, unit_id=f"u{i:03d}", heading_aligned=heading_aligned)
        for i, c in enumerate(centers)
    ]
