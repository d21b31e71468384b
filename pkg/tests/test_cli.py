"""CLI contract tests: config resolution, artifact format, reproducibility.

Simulation sizes here are deliberately tiny — statistical quality is covered
by the acceptance battery; these tests pin the plumbing.
"""

import json
from pathlib import Path

import numpy as np
import pytest

from ris_lcr.cli import CSV_HEADER, main
from ris_lcr.validation import CheckResult

FAST = ["--samples", "12000", "--replicates", "1"]


def _run(args, capsys=None):
    status = main(args)
    if capsys is not None:
        return status, capsys.readouterr()
    return status


def _read_rows(path: Path):
    lines = path.read_text().split("\n")
    assert lines[0] == CSV_HEADER
    assert lines[-1] == ""  # trailing newline
    return [ln.split(",") for ln in lines[1:-1]]


class TestScenarioRuns:
    def test_fig3b_emits_four_curves(self, tmp_path):
        out = tmp_path / "f3b"
        assert main(["fig3b", "--out", str(out), *FAST]) == 0
        names = sorted(p.name for p in out.glob("*.csv"))
        assert names == [
            "ris_n128_analytic.csv",
            "ris_n128_sim.csv",
            "ris_n64_analytic.csv",
            "ris_n64_sim.csv",
        ]
        manifest = json.loads((out / "run.json").read_text())
        assert manifest["scenario"] == "fig3b"
        assert len(manifest["curves"]) == 4
        sims = [c for c in manifest["curves"] if c["source"] == "simulation"]
        assert {c["scene"]["ris"]["n_x"] * c["scene"]["ris"]["n_z"] for c in sims} == {
            64,
            128,
        }

    def test_analytic_rows_have_empty_ci(self, tmp_path):
        out = tmp_path / "f3b"
        main(["fig3b", "--out", str(out), *FAST])
        for row in _read_rows(out / "ris_n64_analytic.csv"):
            assert row[2] == "analytic"
            assert row[3] == "" and row[4] == ""

    def test_simulated_rows_have_ci_with_replicates(self, tmp_path):
        out = tmp_path / "custom"
        assert main(
            ["custom", "--out", str(out), "--samples", "12000", "--replicates", "2"]
        ) == 0
        rows = _read_rows(out / "full_sim.csv")
        populated = [r for r in rows if r[1] != "0"]
        assert populated, "expected at least one nonzero crossing rate"
        for row in populated:
            assert row[2] == "simulation"
            assert float(row[3]) <= float(row[1]) <= float(row[4])

    def test_fig4b_shadow_flag_adds_curve(self, tmp_path):
        out = tmp_path / "f4b"
        assert main(
            ["fig4b", "--shadow-dominant", "0.5", "--out", str(out),
             "--samples", "12000", "--replicates", "1"]
        ) == 0
        assert (out / "full_shadowed_sim.csv").exists()
        manifest = json.loads((out / "run.json").read_text())
        assert manifest["shadow_dominant"] == 0.5

    def test_manifest_records_formula_and_grouping(self, tmp_path):
        out = tmp_path / "f3a"
        assert main(["fig3a", "--out", str(out), *FAST]) == 0
        manifest = json.loads((out / "run.json").read_text())
        analytic = {
            c["label"]: c["formula"]
            for c in manifest["curves"]
            if c["source"] == "analytic"
        }
        for label, formula in analytic.items():
            assert formula["kind"] == "direct-grouped-residue/1"
            assert formula["n_lead"] + formula["tail_count"] >= 8
        assert manifest["seed"] == 1234  # default
        assert manifest["version"]


class TestReproducibility:
    def test_identical_config_identical_bytes(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            main(["fig3b", "--out", str(out), "--seed", "7", *FAST])
        for name in ("ris_n64_sim.csv", "ris_n128_analytic.csv", "run.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_threads_do_not_change_csv_bytes(self, tmp_path):
        a, b = tmp_path / "t1", tmp_path / "t2"
        main(["fig3b", "--out", str(a), "--threads", "1", "--replicates", "2",
              "--samples", "12000"])
        main(["fig3b", "--out", str(b), "--threads", "3", "--replicates", "2",
              "--samples", "12000"])
        for name in ("ris_n64_sim.csv", "ris_n128_sim.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_seed_changes_simulation_only(self, tmp_path):
        a, b = tmp_path / "s1", tmp_path / "s2"
        main(["fig3b", "--out", str(a), "--seed", "1", *FAST])
        main(["fig3b", "--out", str(b), "--seed", "2", *FAST])
        assert (a / "ris_n64_sim.csv").read_bytes() != (b / "ris_n64_sim.csv").read_bytes()
        assert (
            a / "ris_n64_analytic.csv"
        ).read_bytes() == (b / "ris_n64_analytic.csv").read_bytes()


class TestConfigResolution:
    def test_config_file_applies_and_flags_win(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"seed": 9, "samples": 9000}))
        out = tmp_path / "out"
        assert main(
            ["fig3b", "--config", str(cfg), "--out", str(out),
             "--samples", "12000", "--replicates", "1"]
        ) == 0
        manifest = json.loads((out / "run.json").read_text())
        assert manifest["seed"] == 9  # from file
        assert manifest["mc"]["n_samples"] == 12000  # flag beats file

    def test_unknown_key_is_hard_error(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"samples": 9000, "sample": 1}))
        status, cap = _run(["fig3b", "--config", str(cfg)], capsys)
        assert status == 2
        assert "unknown config key: sample" in cap.err

    def test_unknown_nested_key_reports_path(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"scene": {"bs": {"nx": 4}}}))
        status, cap = _run(["fig3b", "--config", str(cfg)], capsys)
        assert status == 2
        assert "scene.bs.nx" in cap.err

    def test_grid_min_above_max_is_usage_error(self, tmp_path, capsys):
        status, cap = _run(
            ["fig3b", "--grid", "5", "2", "0.5", "--out", str(tmp_path)], capsys
        )
        assert status == 2
        assert "grid" in cap.err

    def test_grid_flag_sets_thresholds(self, tmp_path):
        out = tmp_path / "g"
        assert main(
            ["fig3b", "--grid", "-10", "-5", "1", "--out", str(out), *FAST]
        ) == 0
        rows = _read_rows(out / "ris_n64_analytic.csv")
        assert [float(r[0]) for r in rows] == [-10, -9, -8, -7, -6, -5]

    def test_scene_override_from_config(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"scene": {"ris": {"spacing": 0.25}}}))
        out = tmp_path / "out"
        assert main(
            ["fig3b", "--config", str(cfg), "--out", str(out), *FAST]
        ) == 0
        manifest = json.loads((out / "run.json").read_text())
        assert manifest["curves"][0]["scene"]["ris"]["spacing"] == 0.25

    def test_bad_layout_rejected_by_parser(self):
        with pytest.raises(SystemExit):
            main(["fig3b", "--layout", "D"])

    def test_bad_shadow_fraction(self, capsys):
        status, cap = _run(["fig4b", "--shadow-dominant", "1.5"], capsys)
        assert status == 2
        assert "shadow" in cap.err

    def test_scenario_conflict_between_file_and_cli(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"scenario": "fig4a"}))
        status, cap = _run(["fig3b", "--config", str(cfg)], capsys)
        assert status == 2
        assert "conflicts" in cap.err


class TestValidateScenario:
    def test_validate_writes_table_and_propagates_failures(self, tmp_path, monkeypatch):
        fake = [
            CheckResult("a", "first", True, "m", "t", 0.1),
            CheckResult("b", "second", False, "m", "t", 0.2),
        ]
        monkeypatch.setattr("ris_lcr.validation.run_all", lambda progress=None: fake)
        out = tmp_path / "v"
        assert main(["validate", "--out", str(out)]) == 1
        table = (out / "validation.csv").read_text().splitlines()
        assert table[0].startswith("check_id,passed")
        assert table[1].startswith("a,pass")
        assert table[2].startswith("b,FAIL")

    def test_validate_all_green_exits_zero(self, tmp_path, monkeypatch):
        fake = [CheckResult("a", "first", True, "m", "t", 0.1)]
        monkeypatch.setattr("ris_lcr.validation.run_all", lambda progress=None: fake)
        assert main(["validate", "--out", str(tmp_path / "v")]) == 0
