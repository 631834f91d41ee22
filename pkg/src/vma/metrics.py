"""Evaluation suite: rasterized precision/recall/F1, Naive Connectivity,
APLS, entropy-based connectivity (ECM), and attribute accuracy.

Connectivity metrics (Naive Connectivity, APLS, ECM) operate on line
elements. Everything is reported per semantic type plus aggregate means.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from vma.annotate import AssignmentResult, hierarchical_assign
from vma.errors import EmptyGroundTruth, FrameMismatch, VmaError
from vma.geometry import densify, points_to_polyline, polyline_length
from vma.model import GeomKind, VectorizedMap, frames_equal

log = logging.getLogger(__name__)

METER_THRESHOLDS = (0.30, 0.75, 1.50)
PIXEL_THRESHOLDS = (2.0, 5.0, 10.0)

_MAX_GRID_CELLS = 60_000_000


@dataclass(frozen=True)
class RasterConfig:
    """Rasterization and threshold setup for the pixel-level metrics."""

    resolution: float = 0.1          # meters per pixel; ignored for pixel frames
    thresholds: tuple[float, ...] | None = None  # native units; default per frame unit
    apls_pairs: int = 200
    apls_snap_radius: float | None = None        # native units; default 4 m / 25 px
    apls_seed: int = 0
    densify_step: float | None = None            # native units; default 0.5 px

    def __post_init__(self):
        if self.resolution <= 0.0:
            raise VmaError("resolution must be positive")
        if self.thresholds is not None:
            taus = tuple(float(t) for t in self.thresholds)
            if any(t <= 0.0 for t in taus) or any(b <= a for a, b in zip(taus, taus[1:])):
                raise VmaError("thresholds must be positive and ascending")
            object.__setattr__(self, "thresholds", taus)
        if self.apls_pairs < 1:
            raise VmaError("apls_pairs must be >= 1")

    def pixel_size(self, unit: str) -> float:
        return 1.0 if unit == "pixel" else self.resolution

    def taus(self, unit: str) -> tuple[float, ...]:
        if self.thresholds is not None:
            return self.thresholds
        return PIXEL_THRESHOLDS if unit == "pixel" else METER_THRESHOLDS

    def snap_radius(self, unit: str) -> float:
        if self.apls_snap_radius is not None:
            return self.apls_snap_radius
        return 25.0 if unit == "pixel" else 4.0

    def step(self, unit: str) -> float:
        if self.densify_step is not None:
            return self.densify_step
        return 0.5 * self.pixel_size(unit)

    def instance_step(self, unit: str) -> float:
        # instance metrics (Hausdorff, voting, projections) tolerate a
        # coarser sampling than rasterization
        return max(self.step(unit), 2.0 if unit == "pixel" else 0.2)


def _check_frames(pred: VectorizedMap, gt: VectorizedMap) -> str:
    if not frames_equal(pred.frame, gt.frame):
        raise FrameMismatch(f"{pred.frame.name!r} vs {gt.frame.name!r}")
    return pred.frame.unit


# ---------------------------------------------------------------------------
# Pixel-level precision / recall / F1
# ---------------------------------------------------------------------------


def pixel_set(m: VectorizedMap, cfg: RasterConfig) -> np.ndarray:
    """Densified, rounded pixel coordinates of all elements, unique rows."""
    px = cfg.pixel_size(m.frame.unit)
    step = cfg.step(m.frame.unit)
    chunks = []
    for e in m.elements:
        closed = e.kind in (GeomKind.DISCRETE, GeomKind.AREA)
        pts = densify(e.points_array(), step, closed=closed)
        chunks.append(np.rint(pts / px).astype(np.int64))
    if not chunks:
        return np.empty((0, 2), dtype=np.int64)
    return np.unique(np.vstack(chunks), axis=0)


def _pixel_distances(from_px: np.ndarray, to_px: np.ndarray) -> np.ndarray:
    """Exact Euclidean distance (pixel units) from each pixel in from_px to
    the nearest pixel of to_px, via a distance transform over their grid.
    """
    allpx = np.vstack([from_px, to_px])
    lo = allpx.min(axis=0)
    hi = allpx.max(axis=0)
    shape = hi - lo + 1
    if int(shape[0]) * int(shape[1]) > _MAX_GRID_CELLS:
        from scipy.spatial import cKDTree

        log.warning("pixel grid too large for a distance transform; using a KD-tree")
        return cKDTree(to_px).query(from_px)[0]
    mask = np.ones(shape, dtype=bool)
    t = to_px - lo
    mask[t[:, 0], t[:, 1]] = False
    dist = ndimage.distance_transform_edt(mask)
    f = from_px - lo
    return dist[f[:, 0], f[:, 1]]


def pixel_prf(pred: VectorizedMap, gt: VectorizedMap, cfg: RasterConfig) -> dict[float, dict[str, float]]:
    """Per-threshold precision/recall/F1 over the maps' pooled pixel sets."""
    unit = _check_frames(pred, gt)
    taus = cfg.taus(unit)
    px = cfg.pixel_size(unit)
    pred_px = pixel_set(pred, cfg)
    gt_px = pixel_set(gt, cfg)
    out: dict[float, dict[str, float]] = {}
    if len(pred_px) == 0 and len(gt_px) == 0:
        for tau in taus:
            out[tau] = {"precision": 1.0, "recall": 1.0, "f1": 1.0}
        return out
    if len(pred_px) == 0 or len(gt_px) == 0:
        for tau in taus:
            out[tau] = {"precision": 0.0, "recall": 0.0, "f1": 0.0}
        return out
    cd_pre = _pixel_distances(pred_px, gt_px)
    cd_gt = _pixel_distances(gt_px, pred_px)
    for tau in taus:
        tau_px = tau / px
        p = float((cd_pre < tau_px).sum() / len(pred_px))
        r = float((cd_gt < tau_px).sum() / len(gt_px))
        f1 = 0.0 if p + r == 0.0 else 2.0 * p * r / (p + r)
        out[tau] = {"precision": p, "recall": r, "f1": f1}
    return out


# ---------------------------------------------------------------------------
# Instance connectivity metrics (line elements)
# ---------------------------------------------------------------------------


def _line_instances(m: VectorizedMap) -> list[np.ndarray]:
    return [e.points_array() for e in m.elements if e.kind is GeomKind.LINE]


def _hausdorff_sets(a: np.ndarray, b: np.ndarray) -> float:
    from scipy.spatial import cKDTree

    d_ab = cKDTree(b).query(a)[0]
    d_ba = cKDTree(a).query(b)[0]
    return float(max(d_ab.max(), d_ba.max()))


def naive_connectivity(pred: VectorizedMap, gt: VectorizedMap, step: float = 0.1) -> float:
    """Mean over gt line instances of 1/M_i, where M_i predictions were
    assigned to instance i by smallest Hausdorff distance (0 when none).
    """
    _check_frames(pred, gt)
    gt_lines = _line_instances(gt)
    if not gt_lines:
        raise EmptyGroundTruth("no ground-truth line instances")
    pred_lines = _line_instances(pred)
    gt_dense = [densify(g, step) for g in gt_lines]
    counts = np.zeros(len(gt_lines), dtype=int)
    for p in pred_lines:
        pd = densify(p, step)
        dists = [_hausdorff_sets(pd, g) for g in gt_dense]
        counts[int(np.argmin(dists))] += 1
    conn = np.where(counts > 0, 1.0 / np.maximum(counts, 1), 0.0)
    return float(conn.mean())


class _LineGraph:
    """Undirected graph of polyline vertices and segments.

    Endpoints within fuse_radius become shared junction nodes, but every
    edge keeps its original segment geometry and length, so fusion never
    distorts path lengths or snapping. Node ids index `pos`; `edges` holds
    (u, v, weight, seg_start, seg_end).
    """

    def __init__(self, lines: list[np.ndarray], fuse_radius: float):
        raw_pos: list[tuple[float, float]] = []
        raw_edges: list[tuple[int, int]] = []
        endpoints: list[int] = []
        for pts in lines:
            first = len(raw_pos)
            for k, p in enumerate(pts):
                raw_pos.append((float(p[0]), float(p[1])))
                if k > 0:
                    raw_edges.append((len(raw_pos) - 2, len(raw_pos) - 1))
            endpoints.append(first)
            endpoints.append(len(raw_pos) - 1)

        parent = list(range(len(raw_pos)))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        if endpoints:
            pos = np.asarray([raw_pos[e] for e in endpoints])
            d = np.hypot(pos[:, None, 0] - pos[None, :, 0], pos[:, None, 1] - pos[None, :, 1])
            for i in range(len(endpoints)):
                for j in range(i + 1, len(endpoints)):
                    if d[i, j] <= fuse_radius:
                        ri, rj = find(endpoints[i]), find(endpoints[j])
                        if ri != rj:
                            parent[max(ri, rj)] = min(ri, rj)

        remap: dict[int, int] = {}
        self.pos: list[tuple[float, float]] = []
        for i in range(len(raw_pos)):
            root = find(i)
            if root not in remap:
                remap[root] = len(self.pos)
                self.pos.append(raw_pos[root])
            remap.setdefault(i, remap[root])
        self.edges: list[tuple[int, int, float, tuple, tuple]] = []
        for u, v in raw_edges:
            pu, pv = raw_pos[u], raw_pos[v]
            w = float(np.hypot(pv[0] - pu[0], pv[1] - pu[1]))
            self.edges.append((remap[find(u)], remap[find(v)], w, pu, pv))

    @property
    def n_nodes(self) -> int:
        return len(self.pos)

    def distance_matrix(self) -> np.ndarray:
        """All-pairs shortest path lengths (inf when disconnected)."""
        from scipy.sparse import coo_matrix
        from scipy.sparse.csgraph import dijkstra

        n = self.n_nodes
        if not self.edges:
            d = np.full((n, n), np.inf)
            np.fill_diagonal(d, 0.0)
            return d
        # parallel edges collapse to their minimum weight, which is all
        # shortest paths can ever use
        best: dict[tuple[int, int], float] = {}
        for u, v, w, _, _ in self.edges:
            if u == v:
                continue
            key = (u, v) if u < v else (v, u)
            if key not in best or w < best[key]:
                best[key] = w
        if not best:
            d = np.full((n, n), np.inf)
            np.fill_diagonal(d, 0.0)
            return d
        us = np.fromiter((k[0] for k in best), dtype=int)
        vs = np.fromiter((k[1] for k in best), dtype=int)
        ws = np.fromiter(best.values(), dtype=float)
        adj = coo_matrix(
            (np.concatenate([ws, ws]),
             (np.concatenate([us, vs]), np.concatenate([vs, us]))),
            shape=(n, n),
        ).tocsr()
        return dijkstra(adj, directed=False)

    def segments(self) -> tuple[np.ndarray, np.ndarray]:
        a = np.asarray([e[3] for e in self.edges], dtype=float)
        b = np.asarray([e[4] for e in self.edges], dtype=float)
        return a, b


def _snap_to_graph(point: np.ndarray, seg_a: np.ndarray, seg_b: np.ndarray, radius: float):
    """Nearest point on any graph edge: (segment index, t, distance) or None."""
    ab = seg_b - seg_a
    denom = np.einsum("ij,ij->i", ab, ab)
    safe = np.where(denom <= 1e-12, 1.0, denom)
    t = np.clip(((point - seg_a) * ab).sum(axis=1) / safe, 0.0, 1.0)
    proj = seg_a + t[:, None] * ab
    d = np.hypot(point[0] - proj[:, 0], point[1] - proj[:, 1])
    k = int(np.argmin(d))
    if d[k] > radius:
        return None
    return k, float(t[k]), float(d[k])


def _path_between_snaps(dist: np.ndarray, edges, snap_a, snap_b) -> float | None:
    """Shortest path length between two on-edge points, using precomputed
    node-to-node distances; edges are conceptually split at the snaps.
    """
    ka, ta, _ = snap_a
    kb, tb, _ = snap_b
    ua, va, wa = edges[ka][:3]
    ub, vb, wb = edges[kb][:3]
    best = abs(ta - tb) * wa if ka == kb else None
    for na, ca in ((ua, ta * wa), (va, (1.0 - ta) * wa)):
        for nb, cb in ((ub, tb * wb), (vb, (1.0 - tb) * wb)):
            mid = dist[na, nb]
            if not np.isfinite(mid):
                continue
            total = ca + mid + cb
            if best is None or total < best:
                best = total
    return best


def apls(
    pred: VectorizedMap,
    gt: VectorizedMap,
    num_pairs: int = 200,
    snap_radius: float = 4.0,
    seed: int = 0,
) -> float:
    """Average path length similarity between the gt and predicted line
    graphs over randomly sampled gt node pairs. Each gt node is snapped onto
    the nearest point of the predicted graph within snap_radius; a failed
    snap or a missing predicted path scores 1 (worst) for that pair.
    """
    _check_frames(pred, gt)
    gt_lines = _line_instances(gt)
    if not gt_lines:
        raise EmptyGroundTruth("no ground-truth line instances")
    g_gt = _LineGraph(gt_lines, snap_radius)
    if g_gt.n_nodes == 0:
        raise EmptyGroundTruth("empty ground-truth graph")
    g_pred = _LineGraph(_line_instances(pred), snap_radius)

    rng = np.random.default_rng(seed)
    n = g_gt.n_nodes
    if n < 2:
        return 1.0

    gt_dist = g_gt.distance_matrix()
    if g_pred.edges:
        seg_a, seg_b = g_pred.segments()
        pred_dist = g_pred.distance_matrix()
    else:
        seg_a = seg_b = None
        pred_dist = None

    gt_pos = np.asarray(g_gt.pos)
    scores = []
    attempts = 0
    max_attempts = 50 * num_pairs
    while len(scores) < num_pairs and attempts < max_attempts:
        attempts += 1
        i, j = rng.integers(0, n, size=2)
        if i == j:
            continue
        l_gt = gt_dist[i, j]
        if not np.isfinite(l_gt) or l_gt <= 1e-9:
            continue
        if seg_a is None:
            scores.append(1.0)
            continue
        snap_a = _snap_to_graph(gt_pos[int(i)], seg_a, seg_b, snap_radius)
        snap_b = _snap_to_graph(gt_pos[int(j)], seg_a, seg_b, snap_radius)
        if snap_a is None or snap_b is None:
            scores.append(1.0)
            continue
        l_pred = _path_between_snaps(pred_dist, g_pred.edges, snap_a, snap_b)
        if l_pred is None:
            scores.append(1.0)
            continue
        scores.append(min(1.0, abs(l_gt - l_pred) / l_gt))
    if not scores:
        return 1.0
    return float(1.0 - np.mean(scores))


def ecm(pred: VectorizedMap, gt: VectorizedMap, step: float = 0.1) -> float:
    """Entropy-based connectivity: per gt instance, completion weighted by
    e^(-entropy) of the length shares of its assigned predictions, averaged
    over gt instances. Assignment is by per-point nearest-instance voting.
    """
    _check_frames(pred, gt)
    gt_lines = _line_instances(gt)
    if not gt_lines:
        raise EmptyGroundTruth("no ground-truth line instances")
    pred_lines = _line_instances(pred)

    assigned: dict[int, list[int]] = {i: [] for i in range(len(gt_lines))}
    pred_dense = [densify(p, step) for p in pred_lines]
    for j, pd in enumerate(pred_dense):
        votes = np.zeros(len(gt_lines), dtype=int)
        dists = np.stack([points_to_polyline(pd, g)[0] for g in gt_lines], axis=1)
        nearest = np.argmin(dists, axis=1)
        for gi in nearest:
            votes[gi] += 1
        assigned[int(np.argmax(votes))].append(j)

    total = 0.0
    for i, gt_pts in enumerate(gt_lines):
        members = assigned[i]
        if not members:
            continue
        lengths = np.array([polyline_length(pred_lines[j]) for j in members])
        shares = lengths / lengths.sum()
        entropy = float(-(shares * np.log(shares)).sum())
        gt_len = polyline_length(gt_pts)
        arcs = np.sort(np.concatenate([points_to_polyline(pred_dense[j], gt_pts)[1] for j in members]))
        covered = 0.0
        lo = hi = None
        for s in arcs:
            if lo is None:
                lo = hi = s
            elif s - hi <= 2.0 * step:
                hi = s
            else:
                covered += hi - lo
                lo = hi = s
        if lo is not None:
            covered += hi - lo
        alpha = min(max(covered / gt_len, 0.0), 1.0)
        total += alpha * math.exp(-entropy)
    return total / len(gt_lines)


def attribute_accuracy(
    pred: VectorizedMap, gt: VectorizedMap, assignment: AssignmentResult
) -> dict[str, float]:
    """Per attribute name, the fraction of matched element pairs whose
    predicted tag equals the ground-truth tag.
    """
    totals: dict[str, int] = {}
    correct: dict[str, int] = {}
    for pair in assignment.pairs:
        p = pred.get(pair.pred_id)
        g = gt.get(pair.gt_id)
        if p is None or g is None:
            continue
        for name in sorted(set(p.attrs) | set(g.attrs)):
            totals[name] = totals.get(name, 0) + 1
            if name in p.attrs and name in g.attrs and p.attrs[name] == g.attrs[name]:
                correct[name] = correct.get(name, 0) + 1
    return {name: correct.get(name, 0) / totals[name] for name in sorted(totals)}


# ---------------------------------------------------------------------------
# Full report
# ---------------------------------------------------------------------------


@dataclass
class SemanticScores:
    precision: dict[float, float] = field(default_factory=dict)
    recall: dict[float, float] = field(default_factory=dict)
    f1: dict[float, float] = field(default_factory=dict)
    naive_connectivity: float | None = None
    apls: float | None = None
    ecm: float | None = None


@dataclass
class EvalReport:
    thresholds: tuple[float, ...]
    per_semantic: dict[str, SemanticScores]
    attribute_accuracy: dict[str, float]
    aggregate: dict[str, float]
    flags: list[str]

    def to_dict(self) -> dict:
        def taus(d: dict[float, float]) -> dict[str, float]:
            return {f"{tau:g}": v for tau, v in sorted(d.items())}

        sems = {}
        for sem in sorted(self.per_semantic):
            s = self.per_semantic[sem]
            entry = {
                "precision": taus(s.precision),
                "recall": taus(s.recall),
                "f1": taus(s.f1),
            }
            for name in ("naive_connectivity", "apls", "ecm"):
                v = getattr(s, name)
                if v is not None:
                    entry[name] = v
            sems[sem] = entry
        return {
            "schema_version": 1,
            "thresholds": list(self.thresholds),
            "per_semantic": sems,
            "attribute_accuracy": dict(sorted(self.attribute_accuracy.items())),
            "aggregate": dict(sorted(self.aggregate.items())),
            "flags": list(self.flags),
        }

    def format_table(self) -> str:
        taus = list(self.thresholds)
        header = ["semantic"]
        for name in ("P", "R", "F1"):
            header += [f"{name}@{t:g}" for t in taus]
        header += ["NaiveConn", "APLS", "ECM"]
        rows = [header]
        for sem in sorted(self.per_semantic):
            s = self.per_semantic[sem]
            row = [sem]
            for d in (s.precision, s.recall, s.f1):
                row += [f"{d.get(t, float('nan')):.3f}" for t in taus]
            for v in (s.naive_connectivity, s.apls, s.ecm):
                row.append("-" if v is None else f"{v:.3f}")
            rows.append(row)
        agg_row = ["average"]
        for name in ("precision", "recall", "f1"):
            agg_row += [f"{self.aggregate.get(f'{name}@{t:g}', float('nan')):.3f}" for t in taus]
        for name in ("naive_connectivity", "apls", "ecm"):
            v = self.aggregate.get(name)
            agg_row.append("-" if v is None else f"{v:.3f}")
        rows.append(agg_row)
        widths = [max(len(r[c]) for r in rows) for c in range(len(header))]
        lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows]
        return "\n".join(lines)


def _submap(m: VectorizedMap, semantic: str) -> VectorizedMap:
    return VectorizedMap(m.frame, tuple(e for e in m.elements if e.semantic == semantic))


def evaluate(pred: VectorizedMap, gt: VectorizedMap, cfg: RasterConfig | None = None) -> EvalReport:
    """Full evaluation of a predicted map against ground truth."""
    cfg = cfg or RasterConfig()
    unit = _check_frames(pred, gt)
    taus = cfg.taus(unit)
    flags: list[str] = []
    semantics = sorted(set(pred.semantics()) | set(gt.semantics()))
    per_semantic: dict[str, SemanticScores] = {}
    for sem in semantics:
        sub_pred = _submap(pred, sem)
        sub_gt = _submap(gt, sem)
        if len(sub_pred) == 0:
            flags.append(f"{sem}: empty prediction")
        if len(sub_gt) == 0:
            flags.append(f"{sem}: empty ground truth")
        prf = pixel_prf(sub_pred, sub_gt, cfg)
        scores = SemanticScores(
            precision={t: prf[t]["precision"] for t in taus},
            recall={t: prf[t]["recall"] for t in taus},
            f1={t: prf[t]["f1"] for t in taus},
        )
        is_line = any(e.kind is GeomKind.LINE for e in sub_gt.elements) or (
            len(sub_gt) == 0 and any(e.kind is GeomKind.LINE for e in sub_pred.elements)
        )
        if is_line:
            try:
                inst_step = cfg.instance_step(unit)
                scores.naive_connectivity = naive_connectivity(sub_pred, sub_gt, step=inst_step)
                scores.ecm = ecm(sub_pred, sub_gt, step=inst_step)
                scores.apls = apls(
                    sub_pred,
                    sub_gt,
                    num_pairs=cfg.apls_pairs,
                    snap_radius=cfg.snap_radius(unit),
                    seed=cfg.apls_seed,
                )
            except EmptyGroundTruth:
                flags.append(f"{sem}: connectivity metrics skipped (no gt instances)")
        per_semantic[sem] = scores

    assignment = hierarchical_assign(pred, gt)
    attr_acc = attribute_accuracy(pred, gt, assignment)

    aggregate: dict[str, float] = {}
    if per_semantic:
        for name in ("precision", "recall", "f1"):
            for t in taus:
                vals = [getattr(s, name)[t] for s in per_semantic.values()]
                aggregate[f"{name}@{t:g}"] = float(np.mean(vals))
        for name in ("naive_connectivity", "apls", "ecm"):
            vals = [getattr(s, name) for s in per_semantic.values() if getattr(s, name) is not None]
            if vals:
                aggregate[name] = float(np.mean(vals))
        if attr_acc:
            aggregate["attribute_accuracy"] = float(np.mean(list(attr_acc.values())))
    else:
        flags.append("both maps empty; metrics vacuously 1.0")
        for name in ("precision", "recall", "f1"):
            for t in taus:
                aggregate[f"{name}@{t:g}"] = 1.0
    return EvalReport(
        thresholds=taus,
        per_semantic=per_semantic,
        attribute_accuracy=attr_acc,
        aggregate=aggregate,
        flags=flags,
    )
