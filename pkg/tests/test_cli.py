import json
from pathlib import Path

import pytest

from vma.cli import main
from vma.mapio import load_json, load_map
from vma.synth import FULL_FURNITURE


def write_spec(path: Path, **overrides) -> Path:
    spec = {
        "road_length": 120.0,
        "profile": "straight",
        "num_lanes": 2,
        "lane_width": 3.5,
        "furniture": {"arrow": 1, "crosswalk": 1},
        "rng_seed": 5,
    }
    spec.update(overrides)
    path.write_text(json.dumps(spec))
    return path


def write_pipeline_config(path: Path, out_dir: Path, **overrides) -> Path:
    cfg = {
        "out_dir": str(out_dir),
        "scene": {
            "road_length": 120.0,
            "profile": "straight",
            "num_lanes": 2,
            "lane_width": 3.5,
            "furniture": {"arrow": 1},
            "rng_seed": 5,
        },
        "extent": 50.0,
        "stride": 25.0,
        "annotator": {"rng_seed": 7},
    }
    cfg.update(overrides)
    path.write_text(json.dumps(cfg))
    return path


class TestStages:
    def test_generate_split_annotate_merge_sparsify_eval(self, tmp_path, capsys):
        spec = write_spec(tmp_path / "spec.json")
        gt = tmp_path / "gt.json"
        traj = tmp_path / "traj.json"
        assert main(["generate", "--spec", str(spec), "--out-map", str(gt),
                     "--out-traj", str(traj)]) == 0
        units = tmp_path / "units"
        assert main(["split", "--map", str(gt), "--traj", str(traj),
                     "--extent", "50", "--stride", "25", "--out", str(units)]) == 0
        assert len(list(units.glob("u*.json"))) == 6
        annotated = tmp_path / "annotated"
        assert main(["annotate", "--units", str(units), "--oracle", "--seed", "7",
                     "--out", str(annotated)]) == 0
        merged = tmp_path / "merged.json"
        assert main(["merge", "--units", str(annotated), "--out", str(merged)]) == 0
        gt_map = load_map(gt)
        merged_map = load_map(merged)
        assert len(merged_map) == len(gt_map)
        final = tmp_path / "final.json"
        assert main(["sparsify", "--map", str(merged), "--epsilon", "0.1",
                     "--out", str(final)]) == 0
        report = tmp_path / "report.json"
        assert main(["eval", "--pred", str(final), "--gt", str(gt),
                     "--report", str(report), "--format", "table"]) == 0
        rep = load_json(report)
        assert rep["aggregate"]["f1@0.3"] >= 0.99
        out = capsys.readouterr().out
        assert "curb" in out  # table printed

    def test_missing_input_exit_code_2(self, tmp_path, capsys):
        rc = main(["split", "--map", str(tmp_path / "nope.json"),
                   "--traj", str(tmp_path / "t.json"), "--out", str(tmp_path / "u")])
        assert rc == 2
        err = capsys.readouterr().err
        assert "nope.json" in err

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0


class TestPipelineCommand:
    def test_pipeline_runs_and_writes_artifacts(self, tmp_path):
        out_dir = tmp_path / "run"
        cfg = write_pipeline_config(tmp_path / "cfg.json", out_dir)
        assert main(["pipeline", "--config", str(cfg)]) == 0
        for name in ("gt.json", "traj.json", "merged.json", "final.json",
                     "report.json", "manifest.json"):
            assert (out_dir / name).exists(), name
        manifest = load_json(out_dir / "manifest.json")
        assert [s["name"] for s in manifest["stages"]] == [
            "generate", "split", "annotate", "merge", "sparsify", "eval",
        ]
        assert all(v == "auto" for v in manifest["element_status"].values())

    def test_stage_composability(self, tmp_path):
        # stage-by-stage CLI invocations produce the same final map as pipeline
        out_dir = tmp_path / "run"
        cfg = write_pipeline_config(tmp_path / "cfg.json", out_dir)
        assert main(["pipeline", "--config", str(cfg)]) == 0

        gt = out_dir / "gt.json"
        traj = out_dir / "traj.json"
        units = tmp_path / "units"
        annotated = tmp_path / "annotated"
        merged = tmp_path / "merged.json"
        final = tmp_path / "final.json"
        assert main(["split", "--map", str(gt), "--traj", str(traj), "--out", str(units)]) == 0
        assert main(["annotate", "--units", str(units), "--oracle", "--seed", "7",
                     "--out", str(annotated)]) == 0
        assert main(["merge", "--units", str(annotated), "--out", str(merged)]) == 0
        assert main(["sparsify", "--map", str(merged), "--out", str(final)]) == 0
        assert final.read_bytes() == (out_dir / "final.json").read_bytes()

    def test_pipeline_determinism(self, tmp_path):
        cfg1 = write_pipeline_config(tmp_path / "c1.json", tmp_path / "r1")
        cfg2 = write_pipeline_config(tmp_path / "c2.json", tmp_path / "r2")
        assert main(["pipeline", "--config", str(cfg1)]) == 0
        assert main(["pipeline", "--config", str(cfg2)]) == 0
        for name in ("final.json", "report.json"):
            a = (tmp_path / "r1" / name).read_bytes()
            b = (tmp_path / "r2" / name).read_bytes()
            assert a == b, name

    def test_subprocess_annotator_contract(self, tmp_path):
        import sys
        script = tmp_path / "echo.py"
        script.write_text(
            "import sys\n"
            "for line in sys.stdin:\n"
            "    sys.stdout.write(line)\n"
            "    sys.stdout.flush()\n"
        )
        spec = write_spec(tmp_path / "spec.json")
        gt, traj = tmp_path / "gt.json", tmp_path / "traj.json"
        main(["generate", "--spec", str(spec), "--out-map", str(gt), "--out-traj", str(traj)])
        units = tmp_path / "units"
        main(["split", "--map", str(gt), "--traj", str(traj), "--out", str(units)])
        annotated = tmp_path / "annotated"
        rc = main(["annotate", "--units", str(units),
                   "--exec", f"{sys.executable} {script}", "--out", str(annotated)])
        assert rc == 0
        first_unit = sorted(units.glob("*.json"))[0]
        assert load_map(annotated / first_unit.name).elements == load_map(first_unit).elements
