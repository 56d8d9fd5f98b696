import json
import math
import os

import numpy as np
import pytest

from patchdyn import cli, geometry


def run_cli(args):
    return cli.main(args)


class TestBuild:
    def test_armed_build_report(self, tmp_path):
        out = tmp_path / "armed"
        code = run_cli(["build", "--scenario", "armed", "--m", "3", "--N", "5",
                        "--gamma", "0.05", "--out", str(out)])
        assert code == 0
        report = json.loads((out / "build_report.json").read_text())
        assert abs(report["report"]["mass"] - math.pi) < 1e-6
        c = geometry.read_contour_csv(out / "contour.csv")
        assert len(c) > 1000

    def test_rankine_build_zero_deficit(self, tmp_path):
        out = tmp_path / "disk"
        assert run_cli(["build", "--scenario", "rankine", "--r", "1",
                        "--out", str(out)]) == 0
        report = json.loads((out / "build_report.json").read_text())
        assert abs(report["energy_deficit"]) < 1e-5

    def test_infeasible_spec_exit_code(self, tmp_path):
        code = run_cli(["build", "--scenario", "armed", "--gamma", "10",
                        "--out", str(tmp_path / "bad")])
        assert code == 2

    def test_unknown_scenario_exit_code(self, tmp_path):
        code = run_cli(["build", "--scenario", "contour",
                        "--out", str(tmp_path / "c")])
        assert code == 2  # contour scenario without a contour file


class TestEvolve:
    def _evolve(self, out, seed=3):
        cfg = {
            "scenario": "rankine", "r": 1.0, "vertices": 192,
            "dt": 0.01, "T": 0.3, "frame_stride": 10,
            "marker_annuli": [[1.2, 1.6, 5]],
            "energy_stride": 3, "seed": seed, "out": str(out),
        }
        cfg_path = out.parent / f"{out.name}.json"
        cfg_path.write_text(json.dumps(cfg))
        return run_cli(["evolve", "--config", str(cfg_path)])

    def test_outputs_exist(self, tmp_path):
        out = tmp_path / "run1"
        assert self._evolve(out) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["status"] == "ok"
        assert manifest["config"]["seed"] == 3
        assert manifest["version"]
        assert len(manifest["frames"]) == 4
        assert (out / "frame_0003.csv").exists()
        assert (out / "winding.csv").exists()
        assert (out / "spread.csv").exists()
        # spread soundness recorded per frame
        rows = [line.split(",") for line in
                (out / "spread.csv").read_text().strip().splitlines()[1:]]
        for _, spread, bound, perim in rows:
            assert float(bound) <= float(perim) + 1e-9

    def test_determinism_bit_identical(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert self._evolve(out1) == 0
        assert self._evolve(out2) == 0
        for name in ("frame_0000.csv", "frame_0003.csv", "winding.csv",
                     "spread.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_lock_file_excludes_second_process(self, tmp_path):
        out = tmp_path / "locked"
        out.mkdir()
        (out / ".lock").touch()
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"scenario": "rankine", "vertices": 64,
                                   "T": 0.1, "dt": 0.01, "out": str(out)}))
        assert run_cli(["evolve", "--config", str(cfg)]) == 1

    def test_resume_continues_run(self, tmp_path):
        out = tmp_path / "resumable"
        cfg = {
            "scenario": "rankine", "r": 1.0, "vertices": 128,
            "dt": 0.01, "T": 0.2, "frame_stride": 10,
            "marker_annuli": [[1.2, 1.6, 4]], "energy_stride": 2,
            "seed": 1, "out": str(out),
        }
        cfg_path = tmp_path / "resumable.json"
        cfg_path.write_text(json.dumps(cfg))
        assert run_cli(["evolve", "--config", str(cfg_path)]) == 0
        n_before = len(json.loads((out / "manifest.json").read_text())["frames"])
        cfg["T"] = 0.4
        cfg_path.write_text(json.dumps(cfg))
        assert run_cli(["evolve", "--config", str(cfg_path), "--resume"]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert len(manifest["frames"]) > n_before
        times = [f["t"] for f in manifest["frames"]]
        assert times == sorted(times)
        assert times[-1] == pytest.approx(0.4, abs=1e-9)


class TestVerifyDiagnoseSweep:
    def test_verify_small_corpus(self, tmp_path):
        out = tmp_path / "verify"
        cfg = tmp_path / "v.json"
        cfg.write_text(json.dumps({
            "scenario": "rankine", "out": str(out), "seed": 9,
            "corpus_size": 10, "corpus_ms": [2, 3],
            "sharpness_deltas": [0.03, 0.06, 0.1],
        }))
        assert run_cli(["verify", "--config", str(cfg)]) == 0
        rep = json.loads((out / "verify_report.json").read_text())["reports"]
        assert rep["mfold_bound"]["violations"] == 0
        assert rep["momentum_bound"]["violations"] == 0
        assert 1.8 <= rep["sharpness"]["slope"] <= 2.2
        for row in rep["layer_reconstruction"].values():
            assert row["discrepancy"] < 5e-2

    def test_diagnose_rankine(self, tmp_path):
        out = tmp_path / "diag"
        assert run_cli(["diagnose", "--scenario", "rankine", "--vertices",
                        "512", "--out", str(out)]) == 0
        diag = json.loads((out / "diagnostics.json").read_text())["diagnostics"]
        assert diag["sup_dev"] < 1e-3
        assert diag["circulation_error"] < 1e-4

    def test_sweep_reports_slope(self, tmp_path):
        out = tmp_path / "sweep"
        cfg = tmp_path / "s.json"
        cfg.write_text(json.dumps({
            "scenario": "armed", "out": str(out),
            "gammas": [0.02, 0.05], "m": 3, "N": 3.0, "resolution": 0.04,
        }))
        assert run_cli(["sweep", "--config", str(cfg)]) == 0
        rep = json.loads((out / "sweep_report.json").read_text())
        assert "supdev_slope" in rep
        assert (out / "sweep.csv").exists()

    def test_bad_config_key_is_invalid_input(self, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps({"scenario": "rankine", "bogus_key": 1}))
        assert run_cli(["build", "--config", str(cfg),
                        "--out", str(tmp_path / "x")]) == 2
