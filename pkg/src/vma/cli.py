"""Command-line entry point wiring all pipeline stages.

Subcommands: generate, split, annotate, merge, sparsify, eval, pipeline,
serve. Set VMA_LOG=DEBUG|INFO|WARNING to control verbosity.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from vma import __version__
from vma.annotate import AnnotatorConfig, OracleAnnotator, SubprocessAnnotator
from vma.errors import VmaError
from vma.mapio import load_json, load_map, save_json, save_map
from vma.merge import MergeConfig, Merger
from vma.metrics import RasterConfig, evaluate
from vma.pipeline import PipelineConfig, run_pipeline
from vma.sparsify import SparsifyConfig, sparsify_map
from vma.split import load_trajectory, save_trajectory, split_scene, unit_from_map
from vma.synth import SceneSpec, generate_scene

log = logging.getLogger("vma")


def _require(path: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(path)
    return p


def _cmd_generate(args) -> int:
    spec = SceneSpec.from_dict(load_json(_require(args.spec)))
    vmap, traj = generate_scene(spec)
    save_map(vmap, args.out_map)
    save_trajectory(traj, args.out_traj)
    print(f"wrote {args.out_map} ({len(vmap)} elements) and {args.out_traj} ({len(traj)} poses)")
    return 0


def _cmd_split(args) -> int:
    vmap = load_map(_require(args.map), strict=not args.lenient)
    traj = load_trajectory(_require(args.traj))
    units = split_scene(
        vmap, traj, extent=args.extent, stride=args.stride,
        heading_aligned=not args.axis_aligned,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for u in units:
        save_map(u.local_map(), out / f"{u.id}.json")
    print(f"wrote {len(units)} units to {args.out}")
    return 0


def _unit_files(units_dir: Path) -> list[Path]:
    files = sorted(units_dir.glob("*.json"))
    if not files:
        raise FileNotFoundError(f"{units_dir} contains no unit JSON files")
    return files


def _cmd_annotate(args) -> int:
    units_dir = _require(args.units)
    if args.exec:
        annotator = SubprocessAnnotator(args.exec.split())
    else:
        cfg = AnnotatorConfig(
            jitter_sigma=args.sigma,
            drop_prob=args.drop,
            spurious_rate=args.spurious,
            confidence_model=args.confidence_model,
            constant_confidence=args.confidence,
            attr_flip_prob=args.attr_flip,
            rng_seed=args.seed,
        )
        annotator = OracleAnnotator(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    n = 0
    for f in _unit_files(Path(units_dir)):
        unit = unit_from_map(load_map(f), extent=args.extent)
        save_map(annotator.annotate(unit), out / f.name)
        n += 1
    if isinstance(annotator, SubprocessAnnotator):
        annotator.close()
    print(f"annotated {n} units into {args.out}")
    return 0


def _cmd_merge(args) -> int:
    units_dir = _require(args.units)
    cfg = MergeConfig(
        theta_line=args.theta_line,
        eps_lateral=args.eps_lateral,
        delta_discrete=args.delta_discrete,
        delta_area=args.delta_area,
    )
    merger = Merger(cfg)
    for f in _unit_files(Path(units_dir)):
        merger.add_map(load_map(f).to_global())
    merged = merger.voted_result()
    save_map(merged, args.out)
    print(f"merged {args.units} -> {args.out} ({len(merged)} elements)")
    return 0


def _cmd_sparsify(args) -> int:
    vmap = load_map(_require(args.map))
    out = sparsify_map(vmap, SparsifyConfig(epsilon=args.epsilon))
    save_map(out, args.out)
    n_in = sum(len(e.points) for e in vmap.elements)
    n_out = sum(len(e.points) for e in out.elements)
    print(f"sparsified {args.map}: {n_in} -> {n_out} points")
    return 0


def _cmd_eval(args) -> int:
    pred = load_map(_require(args.pred))
    gt = load_map(_require(args.gt))
    taus = None
    if args.thresholds:
        taus = tuple(float(t) for t in args.thresholds.split(","))
    cfg = RasterConfig(
        resolution=args.resolution,
        thresholds=taus,
        apls_pairs=args.apls_pairs,
        apls_seed=args.apls_seed,
    )
    report = evaluate(pred, gt, cfg)
    if args.report:
        save_json(report.to_dict(), args.report)
        print(f"wrote {args.report}")
    if args.format == "table" or not args.report:
        print(report.format_table())
    return 0


def _cmd_pipeline(args) -> int:
    cfg = PipelineConfig.from_dict(load_json(_require(args.config)))
    if args.out_dir:
        cfg = PipelineConfig.from_dict({**cfg.to_dict(), "out_dir": args.out_dir})
    if cfg.map_path:
        _require(cfg.map_path)
    if cfg.traj_path:
        _require(cfg.traj_path)
    manifest = run_pipeline(cfg)
    for stage in manifest.stages:
        print(f"{stage['name']:>9}: {stage['seconds']:.3f}s "
              f"({stage['elements_in']} -> {stage['elements_out']} elements)")
    print(f"artifacts in {cfg.out_dir}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from vma.server import create_app

    app = create_app(
        _require(args.map),
        report_path=args.report,
        journal_path=args.journal,
        export_path=args.export_path,
        ui_dir=args.ui,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vma", description=__doc__)
    p.add_argument("--version", action="version", version=f"vma {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a synthetic scene")
    g.add_argument("--spec", required=True, help="scene spec JSON")
    g.add_argument("--out-map", required=True)
    g.add_argument("--out-traj", required=True)
    g.set_defaults(func=_cmd_generate)

    s = sub.add_parser("split", help="split a scene into annotation units")
    s.add_argument("--map", required=True)
    s.add_argument("--traj", required=True)
    s.add_argument("--extent", type=float, default=50.0)
    s.add_argument("--stride", type=float, default=25.0)
    s.add_argument("--axis-aligned", action="store_true", help="do not rotate units with heading")
    s.add_argument("--lenient", action="store_true", help="ignore unknown JSON fields")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_split)

    a = sub.add_parser("annotate", help="annotate units with the oracle or an external model")
    a.add_argument("--units", required=True)
    a.add_argument("--oracle", action="store_true", help="use the noisy oracle (default)")
    a.add_argument("--exec", help="external annotator command (unit JSON per line on stdio)")
    a.add_argument("--sigma", type=float, default=0.0)
    a.add_argument("--drop", type=float, default=0.0)
    a.add_argument("--spurious", type=float, default=0.0)
    a.add_argument("--attr-flip", type=float, default=0.0)
    a.add_argument("--confidence-model", choices=("constant", "noise_coupled"), default="constant")
    a.add_argument("--confidence", type=float, default=1.0)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--extent", type=float, default=50.0)
    a.add_argument("--out", required=True)
    a.set_defaults(func=_cmd_annotate)

    m = sub.add_parser("merge", help="incrementally merge annotated unit maps")
    m.add_argument("--units", required=True)
    m.add_argument("--theta-line", type=float, default=3.0)
    m.add_argument("--eps-lateral", type=float, default=0.5)
    m.add_argument("--delta-discrete", type=float, default=1.0)
    m.add_argument("--delta-area", type=float, default=0.3)
    m.add_argument("--out", required=True)
    m.set_defaults(func=_cmd_merge)

    sp = sub.add_parser("sparsify", help="Douglas-Peucker point sparsification")
    sp.add_argument("--map", required=True)
    sp.add_argument("--epsilon", type=float, default=0.1)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_sparsify)

    e = sub.add_parser("eval", help="evaluate a predicted map against ground truth")
    e.add_argument("--pred", required=True)
    e.add_argument("--gt", required=True)
    e.add_argument("--resolution", type=float, default=0.1)
    e.add_argument("--thresholds", help="comma-separated, e.g. 0.3,0.75,1.5")
    e.add_argument("--apls-pairs", type=int, default=200)
    e.add_argument("--apls-seed", type=int, default=0)
    e.add_argument("--report", help="write the report JSON here")
    e.add_argument("--format", choices=("json", "table"), default="json")
    e.set_defaults(func=_cmd_eval)

    pl = sub.add_parser("pipeline", help="run all stages from one config")
    pl.add_argument("--config", required=True, help="pipeline config JSON")
    pl.add_argument("--out-dir", help="override the config's output directory")
    pl.set_defaults(func=_cmd_pipeline)

    sv = sub.add_parser("serve", help="serve a map to the verification UI")
    sv.add_argument("--map", required=True)
    sv.add_argument("--report")
    sv.add_argument("--journal")
    sv.add_argument("--export-path")
    sv.add_argument("--ui", help="directory with the built verification client")
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--port", type=int, default=8765)
    sv.set_defaults(func=_cmd_serve)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("VMA_LOG", "WARNING").upper())
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: missing input path: {exc}", file=sys.stderr)
        return 2
    except (VmaError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
