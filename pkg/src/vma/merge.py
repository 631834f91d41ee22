"""Incremental vectorized map merging.

Per-unit maps are folded one by one into a growing global map. Association
and fusion are kind-specific: polylines are spliced after an overlap test,
boxes go through non-maximum suppression on chamfer distance, polygons are
unioned when their IoU is high enough, and attributes are resolved by
majority vote over every contributing source element.
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np
from shapely.geometry import MultiPolygon, Polygon
from shapely.ops import unary_union

from vma.errors import FrameMismatch, InternalGeometryError, VmaError
from vma.geometry import (
    as_points,
    chamfer_distance,
    cumulative_arclength,
    densify,
    distance_to_polyline,
    points_to_polyline,
    polygon_iou,
    polyline_length,
)
from vma.model import GeomKind, MapElement, VectorizedMap

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MergeConfig:
    theta_line: float = 3.0      # minimum overlapped arc length
    eps_lateral: float = 0.5     # lateral tube radius defining overlap / closeness
    delta_discrete: float = 1.0  # chamfer association threshold
    delta_area: float = 0.3      # IoU association threshold

    def __post_init__(self):
        for name in ("theta_line", "eps_lateral", "delta_discrete", "delta_area"):
            if getattr(self, name) <= 0.0:
                raise VmaError(f"{name} must be positive")
        if self.delta_area >= 1.0:
            raise VmaError("delta_area must be < 1")


class VoteRecord:
    """Attribute ballots of one merged element: name -> tag -> count."""

    def __init__(self, votes: Mapping[str, Mapping[str, int]] | None = None):
        self.votes: dict[str, Counter] = {}
        for name, tags in (votes or {}).items():
            self.votes[name] = Counter(tags)

    @classmethod
    def for_element(cls, e: MapElement) -> "VoteRecord":
        rec = cls()
        rec.add(e.attrs)
        return rec

    def add(self, attrs: Mapping[str, str]) -> None:
        for name, tag in attrs.items():
            self.votes.setdefault(name, Counter())[tag] += 1

    def absorb(self, other: "VoteRecord") -> None:
        for name, tags in other.votes.items():
            self.votes.setdefault(name, Counter()).update(tags)

    def to_dict(self) -> dict[str, dict[str, int]]:
        return {name: dict(tags) for name, tags in self.votes.items()}


def vote_attributes(record: VoteRecord) -> dict[str, str]:
    """Majority tag per attribute; ties go to the lexicographically smallest."""
    out = {}
    for name, tags in record.votes.items():
        out[name] = min(tags.items(), key=lambda kv: (-kv[1], kv[0]))[0]
    return out


# ---------------------------------------------------------------------------
# Line association and fusion
# ---------------------------------------------------------------------------


def _tube_step(eps: float) -> float:
    return max(min(eps / 2.0, 0.5), 1e-3)


def _overlap_interval(a: np.ndarray, b: np.ndarray, eps: float) -> tuple[float, float]:
    """Arc interval of a's longest contiguous run inside b's eps-tube;
    (0, -1) when a never enters the tube.
    """
    dense = densify(a, _tube_step(eps))
    arcs = cumulative_arclength(dense)
    mask = distance_to_polyline(dense, b) <= eps
    if not mask.any():
        return 0.0, -1.0
    best_lo, best_hi = 0.0, -1.0
    i, n = 0, len(mask)
    while i < n:
        if not mask[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and mask[j + 1]:
            j += 1
        if arcs[j] - arcs[i] > best_hi - best_lo:
            best_lo, best_hi = float(arcs[i]), float(arcs[j])
        i = j + 1
    return best_lo, best_hi


def _contained_in_tube(short: np.ndarray, long: np.ndarray, eps: float) -> bool:
    dense = densify(short, _tube_step(eps))
    return bool(np.all(distance_to_polyline(dense, long) <= eps))


def associate_lines(a, b, cfg: MergeConfig) -> bool:
    """True when a and b overlap along an arc of at least theta_line and each
    polyline has an endpoint close to the other. A polyline lying entirely
    inside the other's tube (a duplicate or a border sliver of it) is
    associated regardless of its length.
    """
    a = as_points(a)
    b = as_points(b)
    short, long = (a, b) if polyline_length(a) <= polyline_length(b) else (b, a)
    if _contained_in_tube(short, long, cfg.eps_lateral):
        return True
    lo, hi = _overlap_interval(a, b, cfg.eps_lateral)
    if hi < lo or (hi - lo) < cfg.theta_line:
        return False
    ends_a = distance_to_polyline(np.array([a[0], a[-1]]), b)
    ends_b = distance_to_polyline(np.array([b[0], b[-1]]), a)
    return bool(ends_a.min() <= cfg.eps_lateral and ends_b.min() <= cfg.eps_lateral)


def _tangent_at(pts: np.ndarray, cum: np.ndarray, arc: float) -> np.ndarray:
    i = int(np.searchsorted(cum, arc, side="right") - 1)
    i = min(max(i, 0), len(pts) - 2)
    d = pts[i + 1] - pts[i]
    n = float(np.hypot(*d))
    return d / n if n > 0 else d


def _oriented_like(a: np.ndarray, b: np.ndarray, eps: float) -> np.ndarray:
    """b, reversed when its direction disagrees with a's over the overlap
    (mean tangent dot product below zero).
    """
    dense = densify(a, _tube_step(eps))
    dists, arcs_b = points_to_polyline(dense, b)
    near = np.nonzero(dists <= eps)[0]
    if len(near) == 0:
        return b
    arcs_a = cumulative_arclength(dense)
    cum_a, cum_b = arcs_a, cumulative_arclength(b)
    dots = 0.0
    for i in near:
        ta = _tangent_at(dense, cum_a, float(arcs_a[i]))
        tb = _tangent_at(b, cum_b, float(arcs_b[i]))
        dots += float(ta @ tb)
    return b[::-1] if dots < 0.0 else b


def fuse_lines(a, b, cfg: MergeConfig) -> np.ndarray:
    """Splice two associated polylines into one, keeping a's geometry through
    the overlap and attaching only the parts of b that extend past a's ends.
    """
    a = as_points(a)
    b = _oriented_like(a, as_points(b), cfg.eps_lateral)
    lo, hi = _overlap_interval(a, b, cfg.eps_lateral)
    len_a = float(cumulative_arclength(a)[-1])
    tol = max(cfg.eps_lateral, 1e-9)
    arcs_b = cumulative_arclength(b)

    parts: list[np.ndarray] = []
    if lo <= tol:
        # overlap reaches a's start, so b may extend backwards
        _, splice = points_to_polyline(a[:1], b)
        head = b[arcs_b < splice[0] - 1e-9]
        if len(head):
            parts.append(head)
    parts.append(a)
    if hi >= len_a - tol:
        # overlap reaches a's end, so b may extend forwards
        _, splice = points_to_polyline(a[-1:], b)
        tail = b[arcs_b > splice[0] + 1e-9]
        if len(tail):
            parts.append(tail)
    fused = np.vstack(parts)
    keep = np.concatenate([[True], np.hypot(*(np.diff(fused, axis=0).T)) > 1e-12])
    return fused[keep]


# ---------------------------------------------------------------------------
# Non-maximum suppression and polygon union
# ---------------------------------------------------------------------------


def _nms_survivor(members: list[MapElement]) -> MapElement:
    return min(members, key=lambda e: (-e.confidence, e.id))


# a polygon mostly contained in another (a unit-border sliver of the same
# source region) is associated even when its IoU is small
_AREA_CONTAINMENT = 0.8


def _areas_related(p, q, delta_area: float) -> bool:
    from shapely.geometry import Polygon

    a, b = Polygon(p), Polygon(q)
    inter = a.intersection(b).area
    union = a.union(b).area
    if union <= 0.0:
        return False
    if inter / union > delta_area:
        return True
    smaller = min(a.area, b.area)
    return smaller > 0.0 and inter / smaller >= _AREA_CONTAINMENT


def merge_discrete(group: Iterable[MapElement], cfg: MergeConfig) -> MapElement:
    """Non-maximum suppression over a chamfer-associated group: the highest
    confidence element survives, ties broken by the smaller id.
    """
    members = sorted(group, key=lambda e: e.id)
    if not members:
        raise VmaError("merge_discrete needs a non-empty group")
    if len({e.semantic for e in members}) != 1:
        raise VmaError("merge_discrete group must share one semantic type")
    return _nms_survivor(members)


def _union_ring(polys: list[np.ndarray]) -> np.ndarray:
    union = unary_union([Polygon(p) for p in polys])
    if isinstance(union, MultiPolygon) or not isinstance(union, Polygon) or union.is_empty:
        raise InternalGeometryError(
            "union of IoU-associated polygons did not produce a single polygon"
        )
    if union.interiors:
        log.warning("discarding %d hole(s) from polygon union", len(union.interiors))
    ring = np.asarray(union.exterior.coords, dtype=float)[:-1]
    keep = np.ones(len(ring), dtype=bool)
    if len(ring) > 1:
        keep[1:] = np.hypot(*(np.diff(ring, axis=0).T)) > 1e-12
    return ring[keep]


def merge_area(group: Iterable[MapElement], cfg: MergeConfig) -> MapElement:
    """Boolean union of an IoU-associated polygon group. The merged element
    keeps the lexicographically smallest contributing id.
    """
    members = sorted(group, key=lambda e: e.id)
    if not members:
        raise VmaError("merge_area needs a non-empty group")
    if len({e.semantic for e in members}) != 1:
        raise VmaError("merge_area group must share one semantic type")
    ring = _union_ring([e.points_array() for e in members])
    return MapElement(
        id=members[0].id,
        kind=GeomKind.AREA,
        semantic=members[0].semantic,
        points=tuple(map(tuple, ring)),
        attrs=dict(members[0].attrs),
        confidence=max(e.confidence for e in members),
    )


# ---------------------------------------------------------------------------
# Incremental merger
# ---------------------------------------------------------------------------


class _Entry:
    __slots__ = ("element", "votes")

    def __init__(self, element: MapElement, votes: VoteRecord):
        self.element = element
        self.votes = votes


def _components(n: int, related) -> list[list[int]]:
    """Connected components of indices 0..n-1 under the related predicate."""
    seen = [False] * n
    comps: list[list[int]] = []
    for start in range(n):
        if seen[start]:
            continue
        comp = [start]
        seen[start] = True
        frontier = [start]
        while frontier:
            cur = frontier.pop()
            for other in range(n):
                if not seen[other] and related(cur, other):
                    seen[other] = True
                    comp.append(other)
                    frontier.append(other)
        comps.append(sorted(comp))
    return comps


class Merger:
    """Stateful fold of unit maps into one global map with vote records."""

    def __init__(
        self,
        cfg: MergeConfig,
        base: VectorizedMap | None = None,
        votes: Mapping[str, VoteRecord] | None = None,
    ):
        self.cfg = cfg
        self.entries: list[_Entry] = []
        if base is not None:
            if not base.frame.is_global:
                raise FrameMismatch("merging accumulates in the global frame")
            for e in base.elements:
                prior = (votes or {}).get(e.id)
                rec = VoteRecord(prior.votes) if prior else VoteRecord.for_element(e)
                self.entries.append(_Entry(e, rec))

    def result(self) -> VectorizedMap:
        return VectorizedMap(elements=tuple(en.element for en in self.entries))

    def vote_records(self) -> dict[str, VoteRecord]:
        return {en.element.id: en.votes for en in self.entries}

    def voted_result(self) -> VectorizedMap:
        """Final map with every element's attributes resolved by majority."""
        out = []
        for en in self.entries:
            voted = vote_attributes(en.votes)
            e = en.element
            out.append(e.with_attrs(voted) if voted else e)
        return VectorizedMap(elements=tuple(out))

    # -- folding ------------------------------------------------------------

    def add_map(self, unit_map: VectorizedMap) -> None:
        if not unit_map.frame.is_global:
            raise FrameMismatch(
                f"unit map in frame {unit_map.frame.name!r} must be transformed to global first"
            )
        incoming = sorted(unit_map.elements, key=lambda e: e.id)
        self._merge_grouped(
            [e for e in incoming if e.kind is GeomKind.DISCRETE],
            GeomKind.DISCRETE,
            lambda x, y: chamfer_distance(x.points_array(), y.points_array()) < self.cfg.delta_discrete,
            self._fuse_discrete_group,
        )
        self._merge_grouped(
            [e for e in incoming if e.kind is GeomKind.AREA],
            GeomKind.AREA,
            lambda x, y: _areas_related(x.points_array(), y.points_array(), self.cfg.delta_area),
            self._fuse_area_group,
        )
        for e in incoming:
            if e.kind is GeomKind.LINE:
                self._insert_line(e, VoteRecord.for_element(e))

    def _merge_grouped(self, incoming: list[MapElement], kind: GeomKind, related, fuse_group) -> None:
        """Transitive-closure grouping over existing entries plus the unit's
        incoming elements, then one fusion per group.
        """
        if not incoming:
            return
        old_idx = [i for i, en in enumerate(self.entries) if en.element.kind is kind]
        nodes: list[tuple[MapElement, VoteRecord]] = [
            (self.entries[i].element, self.entries[i].votes) for i in old_idx
        ] + [(e, VoteRecord.for_element(e)) for e in incoming]

        def rel(i: int, j: int) -> bool:
            a, b = nodes[i][0], nodes[j][0]
            if a.semantic != b.semantic:
                return False
            return related(a, b)

        comps = _components(len(nodes), rel)
        n_old = len(old_idx)
        replacements: dict[int, _Entry | None] = {}
        appended: list[_Entry] = []
        for comp in comps:
            members = [nodes[i] for i in comp]
            if len(members) == 1 and comp[0] >= n_old:
                appended.append(_Entry(*members[0]))
                continue
            if len(members) == 1:
                continue  # untouched existing entry
            fused = fuse_group([m[0] for m in members])
            votes = VoteRecord()
            for _, v in members:
                votes.absorb(v)
            entry = _Entry(fused, votes)
            olds = [i for i in comp if i < n_old]
            if olds:
                replacements[old_idx[olds[0]]] = entry
                for i in olds[1:]:
                    replacements[old_idx[i]] = None
            else:
                appended.append(entry)
        if replacements or appended:
            rebuilt: list[_Entry] = []
            for i, en in enumerate(self.entries):
                if i in replacements:
                    if replacements[i] is not None:
                        rebuilt.append(replacements[i])
                else:
                    rebuilt.append(en)
            rebuilt.extend(appended)
            self.entries = rebuilt

    def _fuse_discrete_group(self, members: list[MapElement]) -> MapElement:
        return _nms_survivor(members)

    def _fuse_area_group(self, members: list[MapElement]) -> MapElement:
        members = sorted(members, key=lambda e: e.id)
        ring = _union_ring([e.points_array() for e in members])
        return MapElement(
            id=members[0].id,
            kind=GeomKind.AREA,
            semantic=members[0].semantic,
            points=tuple(map(tuple, ring)),
            attrs=dict(members[0].attrs),
            confidence=max(e.confidence for e in members),
        )

    def _insert_line(self, e: MapElement, rec: VoteRecord) -> None:
        """Insert one polyline, fusing with associated entries until no
        association remains (the merged map is a fixpoint of associate_lines).
        """
        work: list[tuple[MapElement, VoteRecord]] = [(e, rec)]
        while work:
            w, w_rec = work.pop()
            partner = None
            for idx, en in enumerate(self.entries):
                r = en.element
                if r.kind is not GeomKind.LINE or r.semantic != w.semantic:
                    continue
                if associate_lines(r.points_array(), w.points_array(), self.cfg):
                    partner = idx
                    break
            if partner is None:
                self.entries.append(_Entry(w, w_rec))
                continue
            en = self.entries.pop(partner)
            fused = fuse_lines(en.element.points_array(), w.points_array(), self.cfg)
            merged = MapElement(
                id=en.element.id,
                kind=GeomKind.LINE,
                semantic=w.semantic,
                points=tuple(map(tuple, fused)),
                attrs=dict(en.element.attrs),
                confidence=max(en.element.confidence, w.confidence),
            )
            en.votes.absorb(w_rec)
            work.append((merged, en.votes))


def merge_maps(
    acc: VectorizedMap,
    unit_map: VectorizedMap,
    cfg: MergeConfig,
    votes: dict[str, VoteRecord] | None = None,
) -> VectorizedMap:
    """One fold step: fuse a unit's global-frame map into the accumulator.

    When a votes dict is passed it is updated in place with the new ballots.
    """
    merger = Merger(cfg, base=acc, votes=votes)
    merger.add_map(unit_map)
    if votes is not None:
        votes.clear()
        votes.update(merger.vote_records())
    return merger.result()


def merge_all(unit_maps: Iterable[VectorizedMap], cfg: MergeConfig) -> VectorizedMap:
    """Left fold of merge steps over trajectory-ordered unit maps, then a
    final majority vote over every element's attributes.
    """
    merger = Merger(cfg)
    for m in unit_maps:
        merger.add_map(m)
    return merger.voted_result()
