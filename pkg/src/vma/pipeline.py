"""One-shot pipeline: generate/load -> split -> annotate -> merge ->
sparsify -> eval, persisting every intermediate artifact plus a run manifest.

Artifacts are deterministic for a fixed config: rerunning produces
byte-identical map and report files. The manifest carries wall-clock
timings and is the one artifact allowed to differ between runs.
"""
from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

from vma import __version__
from vma.annotate import Annotator, AnnotatorConfig, OracleAnnotator
from vma.errors import SchemaError, VmaError
from vma.mapio import load_map, save_json, save_map
from vma.merge import MergeConfig, Merger
from vma.metrics import RasterConfig, evaluate
from vma.model import VectorizedMap
from vma.sparsify import SparsifyConfig, sparsify_map
from vma.split import (
    AnnotationUnit,
    load_trajectory,
    save_trajectory,
    split_scene,
    unit_from_map,
)
from vma.synth import SceneSpec, generate_scene

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineConfig:
    out_dir: str
    scene: SceneSpec | None = None
    map_path: str | None = None
    traj_path: str | None = None
    extent: float = 50.0
    stride: float = 25.0
    heading_aligned: bool = True
    annotator: AnnotatorConfig = field(default_factory=AnnotatorConfig)
    merge: MergeConfig = field(default_factory=MergeConfig)
    sparsify: SparsifyConfig = field(default_factory=SparsifyConfig)
    raster: RasterConfig = field(default_factory=RasterConfig)

    def __post_init__(self):
        if self.scene is None and (self.map_path is None or self.traj_path is None):
            raise VmaError("pipeline needs either a scene spec or map and trajectory paths")
        if self.extent <= 0.0 or self.stride <= 0.0:
            raise VmaError("extent and stride must be positive")

    def to_dict(self) -> dict:
        r = self.raster
        return {
            "schema_version": 1,
            "out_dir": self.out_dir,
            "scene": self.scene.to_dict() if self.scene else None,
            "map": self.map_path,
            "traj": self.traj_path,
            "extent": self.extent,
            "stride": self.stride,
            "heading_aligned": self.heading_aligned,
            "annotator": {
                "jitter_sigma": self.annotator.jitter_sigma,
                "drop_prob": self.annotator.drop_prob,
                "spurious_rate": self.annotator.spurious_rate,
                "confidence_model": self.annotator.confidence_model,
                "constant_confidence": self.annotator.constant_confidence,
                "attr_flip_prob": self.annotator.attr_flip_prob,
                "rng_seed": self.annotator.rng_seed,
            },
            "merge": {
                "theta_line": self.merge.theta_line,
                "eps_lateral": self.merge.eps_lateral,
                "delta_discrete": self.merge.delta_discrete,
                "delta_area": self.merge.delta_area,
            },
            "sparsify": {"epsilon": self.sparsify.epsilon},
            "eval": {
                "resolution": r.resolution,
                "thresholds": None if r.thresholds is None else list(r.thresholds),
                "apls_pairs": r.apls_pairs,
                "apls_snap_radius": r.apls_snap_radius,
                "apls_seed": r.apls_seed,
            },
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "PipelineConfig":
        if not isinstance(obj, dict):
            raise SchemaError("pipeline config must be an object")
        known = {
            "schema_version", "out_dir", "scene", "map", "traj", "extent",
            "stride", "heading_aligned", "annotator", "merge", "sparsify", "eval",
        }
        unknown = set(obj) - known
        if unknown:
            raise SchemaError(f"unknown pipeline config fields {sorted(unknown)}")
        if "out_dir" not in obj:
            raise SchemaError("pipeline config needs out_dir")
        ann = obj.get("annotator", {})
        mrg = obj.get("merge", {})
        ev = obj.get("eval", {})
        taus = ev.get("thresholds")
        return cls(
            out_dir=obj["out_dir"],
            scene=SceneSpec.from_dict(obj["scene"]) if obj.get("scene") else None,
            map_path=obj.get("map"),
            traj_path=obj.get("traj"),
            extent=float(obj.get("extent", 50.0)),
            stride=float(obj.get("stride", 25.0)),
            heading_aligned=bool(obj.get("heading_aligned", True)),
            annotator=AnnotatorConfig(
                jitter_sigma=float(ann.get("jitter_sigma", 0.0)),
                drop_prob=float(ann.get("drop_prob", 0.0)),
                spurious_rate=float(ann.get("spurious_rate", 0.0)),
                confidence_model=ann.get("confidence_model", "constant"),
                constant_confidence=float(ann.get("constant_confidence", 1.0)),
                attr_flip_prob=float(ann.get("attr_flip_prob", 0.0)),
                rng_seed=int(ann.get("rng_seed", 0)),
            ),
            merge=MergeConfig(
                theta_line=float(mrg.get("theta_line", 3.0)),
                eps_lateral=float(mrg.get("eps_lateral", 0.5)),
                delta_discrete=float(mrg.get("delta_discrete", 1.0)),
                delta_area=float(mrg.get("delta_area", 0.3)),
            ),
            sparsify=SparsifyConfig(epsilon=float(obj.get("sparsify", {}).get("epsilon", 0.1))),
            raster=RasterConfig(
                resolution=float(ev.get("resolution", 0.1)),
                thresholds=None if taus is None else tuple(float(t) for t in taus),
                apls_pairs=int(ev.get("apls_pairs", 200)),
                apls_snap_radius=ev.get("apls_snap_radius"),
                apls_seed=int(ev.get("apls_seed", 0)),
            ),
        )

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


@dataclass
class RunManifest:
    tool_version: str
    config_hash: str
    stages: list[dict] = field(default_factory=list)
    element_status: dict[str, str] = field(default_factory=dict)
    error: str | None = None

    def record(self, name: str, seconds: float, n_in: int, n_out: int) -> None:
        self.stages.append(
            {"name": name, "seconds": seconds, "elements_in": n_in, "elements_out": n_out}
        )

    def to_dict(self) -> dict:
        d = {
            "schema_version": 1,
            "tool_version": self.tool_version,
            "config_hash": self.config_hash,
            "stages": self.stages,
            "element_status": dict(sorted(self.element_status.items())),
        }
        if self.error is not None:
            d["error"] = self.error
        return d


def units_to_global(unit_maps: list[VectorizedMap]) -> list[VectorizedMap]:
    return [m.to_global() for m in unit_maps]


def annotate_units(units: list[AnnotationUnit], annotator: Annotator) -> list[VectorizedMap]:
    return [annotator.annotate(u) for u in units]


def run_pipeline(cfg: PipelineConfig, annotator: Annotator | None = None) -> RunManifest:
    """Execute all stages in order, writing artifacts under cfg.out_dir."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(tool_version=__version__, config_hash=cfg.config_hash())
    annotator = annotator or OracleAnnotator(cfg.annotator)
    try:
        t0 = time.perf_counter()
        if cfg.scene is not None:
            gt_map, traj = generate_scene(cfg.scene)
        else:
            gt_map = load_map(cfg.map_path)
            traj = load_trajectory(cfg.traj_path)
            if not gt_map.frame.is_global:
                gt_map = gt_map.to_global()
        save_map(gt_map, out / "gt.json")
        save_trajectory(traj, out / "traj.json")
        manifest.record("generate", time.perf_counter() - t0, 0, len(gt_map))

        t0 = time.perf_counter()
        units = split_scene(gt_map, traj, extent=cfg.extent, stride=cfg.stride,
                            heading_aligned=cfg.heading_aligned)
        units_dir = out / "units"
        units_dir.mkdir(exist_ok=True)
        for u in units:
            save_map(u.local_map(), units_dir / f"{u.id}.json")
        n_frag = sum(len(u.elements) for u in units)
        manifest.record("split", time.perf_counter() - t0, len(gt_map), n_frag)

        t0 = time.perf_counter()
        annotated = annotate_units(units, annotator)
        ann_dir = out / "annotated"
        ann_dir.mkdir(exist_ok=True)
        for u, m in zip(units, annotated):
            save_map(m, ann_dir / f"{u.id}.json")
        n_pred = sum(len(m) for m in annotated)
        manifest.record("annotate", time.perf_counter() - t0, n_frag, n_pred)

        t0 = time.perf_counter()
        merger = Merger(cfg.merge)
        for m in units_to_global(annotated):
            merger.add_map(m)
        merged = merger.voted_result()
        save_map(merged, out / "merged.json")
        manifest.record("merge", time.perf_counter() - t0, n_pred, len(merged))

        t0 = time.perf_counter()
        final = sparsify_map(merged, cfg.sparsify)
        save_map(final, out / "final.json")
        manifest.record("sparsify", time.perf_counter() - t0, len(merged), len(final))

        t0 = time.perf_counter()
        report = evaluate(final, gt_map, cfg.raster)
        save_json(report.to_dict(), out / "report.json")
        manifest.record("eval", time.perf_counter() - t0, len(final), len(final))

        manifest.element_status = {e.id: "auto" for e in final.elements}
    except Exception as exc:
        manifest.error = str(exc)
        save_json(manifest.to_dict(), out / "manifest.json")
        raise
    save_json(manifest.to_dict(), out / "manifest.json")
    return manifest
