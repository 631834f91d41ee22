"""Unit annotation stage.

The production system would run a neural annotator on each unit; here the
stage
is a pluggable interface with two implementations: a configurable noisy
oracle that corrupts the unit's ground truth, and a subprocess bridge for an
external model. The geometric supervision used to train such a model
(one-to-one hierarchical assignment, point-to-point and point-to-line
constraints) is provided as pure library functions.
"""
from __future__ import annotations

import hashlib
import json
import logging
import subprocess
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from vma.errors import FrameMismatch, VmaError
from vma.geometry import resample_closed, resample_uniform
from vma.mapio import dumps_map, element_to_dict, map_from_dict
from vma.model import GeomKind, MapElement, VectorizedMap, frames_equal, legal_tags
from vma.split import AnnotationUnit

log = logging.getLogger(__name__)

POINTS_PER_ELEMENT = 50

_LINE_SEMS = ("lane_divider", "curb", "stop_line")
_DISCRETE_SEMS = ("arrow", "speed_bump", "lane_sign", "marking")


@dataclass(frozen=True)
class AnnotatorConfig:
    """Error model of the noisy oracle."""

    jitter_sigma: float = 0.0
    drop_prob: float = 0.0
    spurious_rate: float = 0.0
    confidence_model: str = "constant"  # "constant" | "noise_coupled"
    constant_confidence: float = 1.0
    attr_flip_prob: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.jitter_sigma < 0.0:
            raise VmaError("jitter_sigma must be >= 0")
        for name in ("drop_prob", "attr_flip_prob", "constant_confidence"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise VmaError(f"{name} must lie in [0, 1], got {v}")
        if self.spurious_rate < 0.0:
            raise VmaError("spurious_rate must be >= 0")
        if self.confidence_model not in ("constant", "noise_coupled"):
            raise VmaError(f"unknown confidence model {self.confidence_model!r}")


def unit_rng(seed: int, unit_id: str) -> np.random.Generator:
    """Per-unit generator so parallel processing order never changes output."""
    digest = hashlib.sha256(f"{seed}:{unit_id}".encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


class Annotator:
    """Turns one annotation unit into a local-frame vectorized map."""

    def annotate(self, unit: AnnotationUnit) -> VectorizedMap:
        raise NotImplementedError


class OracleAnnotator(Annotator):
    """Reads the unit's ground truth and re-emits it through an error model."""

    def __init__(self, cfg: AnnotatorConfig):
        self.cfg = cfg

    def annotate(self, unit: AnnotationUnit) -> VectorizedMap:
        cfg = self.cfg
        rng = unit_rng(cfg.rng_seed, unit.id)
        out: list[MapElement] = []
        for e in unit.elements:
            if rng.random() < cfg.drop_prob:
                continue
            out.append(self._emit(e, unit, rng))
        n_spurious = int(rng.poisson(cfg.spurious_rate))
        for k in range(n_spurious):
            out.append(self._spurious(unit, rng, k))
        return VectorizedMap(frame=unit.frame, elements=tuple(out))

    def _emit(self, e: MapElement, unit: AnnotationUnit, rng: np.random.Generator) -> MapElement:
        cfg = self.cfg
        base = self._resampled(e)
        pts, mean_mag = self._jitter(e, base, rng)
        attrs = dict(e.attrs)
        for name in sorted(attrs):
            if rng.random() < cfg.attr_flip_prob:
                others = [t for t in legal_tags(e.semantic, name) if t != attrs[name]]
                if others:
                    attrs[name] = str(rng.choice(others))
        conf = self._confidence(mean_mag, rng)
        return MapElement(
            id=f"{unit.id}/{e.id}",
            kind=e.kind,
            semantic=e.semantic,
            points=tuple(map(tuple, pts)),
            attrs=attrs,
            confidence=conf,
        )

    def _resampled(self, e: MapElement) -> np.ndarray:
        pts = e.points_array()
        try:
            if e.kind is GeomKind.LINE:
                resampled = resample_uniform(pts, POINTS_PER_ELEMENT)
            elif e.kind is GeomKind.AREA:
                resampled = resample_closed(pts, POINTS_PER_ELEMENT)
            else:
                return pts
            e.with_points(resampled)  # validity probe
            return resampled
        except VmaError:
            log.warning("element %s kept unresampled (resampling broke validity)", e.id)
            return pts

    def _jitter(self, e: MapElement, base: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, float]:
        cfg = self.cfg
        if cfg.jitter_sigma <= 0.0:
            return base, 0.0
        for _ in range(10):
            delta = rng.normal(0.0, cfg.jitter_sigma, size=base.shape)
            candidate = base + delta
            try:
                e.with_points(candidate)
            except VmaError:
                continue
            return candidate, float(np.hypot(delta[:, 0], delta[:, 1]).mean())
        log.warning("element %s kept unjittered after 10 invalid draws", e.id)
        return base, 0.0

    def _confidence(self, mean_jitter_mag: float, rng: np.random.Generator) -> float:
        cfg = self.cfg
        if cfg.confidence_model == "constant":
            return cfg.constant_confidence
        if cfg.jitter_sigma <= 0.0:
            return 1.0
        return float(np.clip(np.exp(-mean_jitter_mag / cfg.jitter_sigma), 0.0, 1.0))

    def _spurious(self, unit: AnnotationUnit, rng: np.random.Generator, k: int) -> MapElement:
        cfg = self.cfg
        half = unit.extent / 2.0
        margin = min(5.0, half / 2.0)
        conf = cfg.constant_confidence if cfg.confidence_model == "constant" else 0.5
        eid = f"{unit.id}/spurious:{k}"
        if rng.random() < 0.5:
            start = rng.uniform(-half + margin, half - margin, size=2)
            heading = rng.uniform(-np.pi, np.pi)
            length = rng.uniform(3.0, 8.0)
            end = start + length * np.array([np.cos(heading), np.sin(heading)])
            pts = resample_uniform(np.vstack([start, end]), POINTS_PER_ELEMENT)
            semantic = str(rng.choice(_LINE_SEMS))
            return MapElement(eid, GeomKind.LINE, semantic, tuple(map(tuple, pts)), {}, conf)
        center = rng.uniform(-half + margin, half - margin, size=2)
        heading = rng.uniform(-np.pi, np.pi)
        c, s = np.cos(heading), np.sin(heading)
        rot = np.array([[c, -s], [s, c]])
        corners = np.array([[1.5, 0.5], [1.5, -0.5], [-1.5, -0.5], [-1.5, 0.5]])
        pts = corners @ rot.T + center
        semantic = str(rng.choice(_DISCRETE_SEMS))
        return MapElement(eid, GeomKind.DISCRETE, semantic, tuple(map(tuple, pts)), {}, conf)


class SubprocessAnnotator(Annotator):
    """Bridge to an external model: one unit map JSON per line on stdin,
    one local map JSON per line on stdout.
    """

    def __init__(self, command: Sequence[str]):
        self.command = list(command)
        self._proc: subprocess.Popen | None = None

    def _ensure(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        return self._proc

    def annotate(self, unit: AnnotationUnit) -> VectorizedMap:
        proc = self._ensure()
        line = json.dumps(json.loads(dumps_map(unit.local_map())), separators=(",", ":"))
        proc.stdin.write(line + "\n")
        proc.stdin.flush()
        reply = proc.stdout.readline()
        if not reply:
            raise VmaError(f"annotator subprocess {self.command} closed its output")
        return map_from_dict(json.loads(reply), strict=False)

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            self._proc.stdin.close()
            self._proc.wait(timeout=10)


def annotate(unit: AnnotationUnit, cfg: AnnotatorConfig) -> VectorizedMap:
    """Run the noisy oracle on one unit."""
    return OracleAnnotator(cfg).annotate(unit)


# ---------------------------------------------------------------------------
# Hierarchical assignment and geometric constraints
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AssignedPair:
    """One matched (predicted, ground-truth) element pair with its
    point-level pairing. index_map[i] is the gt point paired with predicted
    point i, both indexing the resampled sequences stored here.
    """

    pred_id: str
    gt_id: str
    kind: GeomKind
    mode: str
    cost: float
    pred_points: np.ndarray
    gt_points: np.ndarray
    index_map: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class AssignmentResult:
    pairs: tuple[AssignedPair, ...]
    unmatched_pred: tuple[str, ...]
    unmatched_gt: tuple[str, ...]

    def pair_for_pred(self, pred_id: str) -> AssignedPair | None:
        for p in self.pairs:
            if p.pred_id == pred_id:
                return p
        return None


def _aligned_points(e: MapElement, n: int) -> np.ndarray:
    pts = e.points_array()
    if e.kind is GeomKind.DISCRETE:
        return pts
    if e.kind is GeomKind.LINE:
        return pts if len(pts) == n else resample_uniform(pts, n)
    return pts if len(pts) == n else resample_closed(pts, n)


def _mode_index_maps(kind: GeomKind, n: int) -> list[tuple[str, np.ndarray]]:
    idx = np.arange(n)
    if kind is GeomKind.LINE:
        return [("forward", idx), ("reversed", idx[::-1])]
    if kind is GeomKind.DISCRETE:
        return [(f"rot:{r}", (idx + r) % 4) for r in range(4)]
    modes = []
    for k in range(n):
        modes.append((f"shift:{k}", (idx + k) % n))
        modes.append((f"shift:{k}:reversed", (k - idx) % n))
    return modes


def _best_alignment(pred: np.ndarray, gt: np.ndarray, kind: GeomKind) -> tuple[str, np.ndarray, float]:
    dists = np.hypot(
        pred[:, None, 0] - gt[None, :, 0],
        pred[:, None, 1] - gt[None, :, 1],
    )
    rows = np.arange(len(pred))
    best: tuple[str, np.ndarray, float] | None = None
    for mode, index_map in _mode_index_maps(kind, len(pred)):
        cost = float(dists[rows, index_map].mean())
        if best is None or cost < best[2] - 1e-15:
            best = (mode, index_map, cost)
    return best


def hierarchical_assign(pred: VectorizedMap, gt: VectorizedMap) -> AssignmentResult:
    """One-to-one minimum-cost matching between predicted and ground-truth
    elements, grouped by (kind, semantic). Pair cost is the smallest mean
    point distance over the kind's alignment modes (direction for lines,
    corner rotation for boxes, cyclic shift and direction for polygons).
    """
    if not frames_equal(pred.frame, gt.frame):
        raise FrameMismatch(f"{pred.frame.name!r} vs {gt.frame.name!r}")
    groups: dict[tuple[GeomKind, str], tuple[list[MapElement], list[MapElement]]] = {}
    for e in pred.elements:
        groups.setdefault((e.kind, e.semantic), ([], []))[0].append(e)
    for e in gt.elements:
        groups.setdefault((e.kind, e.semantic), ([], []))[1].append(e)

    pairs: list[AssignedPair] = []
    unmatched_pred: list[str] = []
    unmatched_gt: list[str] = []
    for key in sorted(groups, key=lambda k: (k[0].value, k[1])):
        preds, gts = groups[key]
        preds.sort(key=lambda e: e.id)
        gts.sort(key=lambda e: e.id)
        if not preds or not gts:
            unmatched_pred.extend(e.id for e in preds)
            unmatched_gt.extend(e.id for e in gts)
            continue
        kind = key[0]
        cache: dict[tuple[int, int], tuple[str, np.ndarray, float]] = {}
        cost = np.empty((len(preds), len(gts)))
        aligned: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}
        for i, p in enumerate(preds):
            for j, g in enumerate(gts):
                n = max(len(p.points), len(g.points))
                pp = _aligned_points(p, n)
                gp = _aligned_points(g, n)
                mode, index_map, c = _best_alignment(pp, gp, kind)
                cache[(i, j)] = (mode, index_map, c)
                aligned[(i, j)] = (pp, gp)
                cost[i, j] = c
        rows, cols = linear_sum_assignment(cost)
        taken_p, taken_g = set(), set()
        for i, j in zip(rows, cols):
            mode, index_map, c = cache[(i, j)]
            pp, gp = aligned[(i, j)]
            pairs.append(
                AssignedPair(
                    pred_id=preds[i].id,
                    gt_id=gts[j].id,
                    kind=kind,
                    mode=mode,
                    cost=c,
                    pred_points=pp,
                    gt_points=gp,
                    index_map=tuple(int(v) for v in index_map),
                )
            )
            taken_p.add(i)
            taken_g.add(j)
        unmatched_pred.extend(preds[i].id for i in range(len(preds)) if i not in taken_p)
        unmatched_gt.extend(gts[j].id for j in range(len(gts)) if j not in taken_g)
    pairs.sort(key=lambda p: p.pred_id)
    return AssignmentResult(tuple(pairs), tuple(sorted(unmatched_pred)), tuple(sorted(unmatched_gt)))


def _key_indices(pair: AssignedPair) -> list[int]:
    n = len(pair.pred_points)
    if pair.kind is GeomKind.LINE:
        return [0, n - 1]
    if pair.kind is GeomKind.DISCRETE:
        return list(range(4))
    return []


def p2p_loss(pair: AssignedPair) -> float:
    """Mean L2 distance over the pairing's key points (line endpoints and
    box corners); 0 when the kind has none.
    """
    keys = _key_indices(pair)
    if not keys:
        return 0.0
    total = 0.0
    for i in keys:
        p = pair.pred_points[i]
        q = pair.gt_points[pair.index_map[i]]
        total += float(np.hypot(*(p - q)))
    return total / len(keys)


def _line_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    ab = b - a
    norm = float(np.hypot(*ab))
    if norm <= 1e-12:
        return float(np.hypot(*(p - a)))
    return abs(float(ab[0] * (p[1] - a[1]) - ab[1] * (p[0] - a[0]))) / norm


def p2l_loss(pair: AssignedPair) -> float:
    """Mean, over interior points, of the summed distances from the
    predicted point to the unbounded lines through its gt point's two
    adjacent edges. A gt endpoint with a single adjacent edge contributes
    that edge's distance twice.
    """
    keys = set(_key_indices(pair))
    n = len(pair.pred_points)
    interior = [i for i in range(n) if i not in keys]
    if not interior:
        return 0.0
    gt = pair.gt_points
    ring = pair.kind is GeomKind.AREA
    total = 0.0
    for i in interior:
        p = pair.pred_points[i]
        j = pair.index_map[i]
        q = gt[j]
        if ring:
            left = gt[(j - 1) % n]
            right = gt[(j + 1) % n]
            total += _line_distance(p, left, q) + _line_distance(p, q, right)
            continue
        d_left = _line_distance(p, gt[j - 1], q) if j >= 1 else None
        d_right = _line_distance(p, q, gt[j + 1]) if j <= n - 2 else None
        if d_left is None and d_right is None:
            total += 2.0 * float(np.hypot(*(p - q)))
        elif d_left is None:
            total += 2.0 * d_right
        elif d_right is None:
            total += 2.0 * d_left
        else:
            total += d_left + d_right
    return total / len(interior)
