"""Command-line front end: exit codes, artifacts, reproducible outputs."""

from __future__ import annotations

import json
import subprocess
import sys

import pytest

from stormctl.cli import EXIT_DETECTED, EXIT_OK, EXIT_USAGE, main
from stormctl.datasets import load_trace
from stormctl import tracefile


class TestModelCommand:
    ARGS = ["model", "--p-start", "500", "--p-end", "90000", "--m", "1.5"]

    def test_writes_csv_to_stdout(self, capsys):
        assert main(self.ARGS) == EXIT_OK
        out = capsys.readouterr().out
        lines = out.strip().splitlines()
        assert lines[0] == "t_ms,count"
        assert len(lines) == 1 + 31          # 0.0 .. 3.0 at 0.1
        assert lines[1] == "0.0,0.0"

    def test_out_file_and_plot(self, tmp_path, capsys):
        csv = tmp_path / "curve.csv"
        svg = tmp_path / "curve.svg"
        code = main(self.ARGS + ["--out", str(csv), "--plot", str(svg)])
        capsys.readouterr()
        assert code == EXIT_OK
        points = tracefile.read_trace(csv)
        assert points[0].count == 0.0
        assert svg.read_text().startswith("<svg ")

    def test_rejects_zero_m(self, capsys):
        code = main(["model", "--p-start", "1", "--p-end", "2", "--m", "0"])
        capsys.readouterr()
        assert code == EXIT_USAGE


class TestFitCommand:
    def test_fit_dataset_prints_params(self, capsys):
        assert main(["fit", "--dataset", "table3"]) == EXIT_OK
        record = json.loads(capsys.readouterr().out)
        assert set(record) == {"p_start", "p_end", "m", "a", "b", "rmse"}
        assert record["m"] > 0

    def test_fit_is_reproducible(self, capsys):
        main(["fit", "--dataset", "table3"])
        first = capsys.readouterr().out
        main(["fit", "--dataset", "table3"])
        assert capsys.readouterr().out == first

    def test_fit_trace_file(self, tmp_path, capsys):
        path = tmp_path / "trace.csv"
        tracefile.write_trace(load_trace("table1"), path)
        params = tmp_path / "params.json"
        code = main(["fit", "--trace", str(path), "--out", str(params)])
        capsys.readouterr()
        assert code == EXIT_OK
        assert tracefile.read_params(params).params.m > 0

    def test_trace_and_dataset_conflict(self, tmp_path, capsys):
        path = tmp_path / "trace.csv"
        tracefile.write_trace(load_trace("table1"), path)
        code = main(["fit", "--trace", str(path), "--dataset", "table1"])
        capsys.readouterr()
        assert code == EXIT_USAGE

    def test_missing_file(self, tmp_path, capsys):
        code = main(["fit", "--trace", str(tmp_path / "nope.csv")])
        capsys.readouterr()
        assert code == EXIT_USAGE

    def test_unknown_dataset_rejected_by_parser(self, capsys):
        with pytest.raises(SystemExit) as err:
            main(["fit", "--dataset", "table9"])
        capsys.readouterr()
        assert err.value.code == EXIT_USAGE


class TestDetectCommand:
    def test_identity_replay_is_clean(self, capsys):
        code = main(["detect", "--dataset", "table4",
                     "--reference-dataset", "table4"])
        out = capsys.readouterr().out
        assert code == EXIT_OK
        assert "no storm detected" in out

    def test_storm_against_reference_exits_nonzero(self, tmp_path, capsys):
        tickets = tmp_path / "tickets.jsonl"
        code = main(["detect", "--dataset", "table1",
                     "--reference-dataset", "table4",
                     "--out", str(tickets)])
        out = capsys.readouterr().out
        assert code == EXIT_DETECTED
        assert "ticket" in out
        stored = tracefile.read_tickets(tickets)
        assert len(stored) == 1
        assert stored[0].t <= 1.0

    def test_threshold_can_mask_breaches(self, capsys):
        # largest relative deviation between these two traces is ~7.8
        code = main(["detect", "--dataset", "table1",
                     "--reference-dataset", "table4",
                     "--threshold", "10.0"])
        capsys.readouterr()
        assert code == EXIT_OK


class TestSimCommand:
    def test_normal_preset_clean_exit(self, capsys):
        assert main(["sim", "--scenario", "normal"]) == EXIT_OK
        summary = json.loads(capsys.readouterr().out)
        assert summary["tickets"] == 0

    def test_loop_storm_detects(self, capsys):
        assert main(["sim", "--scenario", "loop-storm"]) == EXIT_DETECTED
        summary = json.loads(capsys.readouterr().out)
        assert summary["tickets"] >= 1
        assert "storm" in summary["verdicts"]

    def test_no_agents_flag(self, capsys):
        code = main(["sim", "--scenario", "loop-storm", "--no-agents"])
        summary = json.loads(capsys.readouterr().out)
        assert code == EXIT_OK             # nothing watching, no tickets
        assert summary["tickets"] == 0
        assert summary["max_utilization"] == 1.0

    def test_out_directory_artifacts(self, tmp_path, capsys):
        out = tmp_path / "run"
        code = main(["sim", "--scenario", "faulty-nic", "--out", str(out),
                     "--plot"])
        capsys.readouterr()
        assert code == EXIT_DETECTED
        for name in ("trace.csv", "tickets.jsonl", "summary.json",
                     "scenario.json", "trace.svg"):
            assert (out / name).exists(), name
        assert len(tracefile.read_tickets(out / "tickets.jsonl")) == 1
        scenario = tracefile.read_scenario(out / "scenario.json")
        assert scenario.name == "faulty-nic"

    def test_artifacts_byte_identical_across_runs(self, tmp_path, capsys):
        a, b = tmp_path / "a", tmp_path / "b"
        main(["sim", "--scenario", "loop-storm", "--out", str(a), "--plot"])
        main(["sim", "--scenario", "loop-storm", "--out", str(b), "--plot"])
        capsys.readouterr()
        for name in ("trace.csv", "tickets.jsonl", "summary.json",
                     "scenario.json", "trace.svg"):
            assert (a / name).read_bytes() == (b / name).read_bytes(), name

    def test_seed_override_changes_summary(self, capsys):
        main(["sim", "--scenario", "normal"])
        base = json.loads(capsys.readouterr().out)
        main(["sim", "--scenario", "normal", "--seed", "123"])
        other = json.loads(capsys.readouterr().out)
        assert base["seed"] != other["seed"]
        assert base["frames"]["delivered"] != other["frames"]["delivered"]

    def test_scenario_file_round_trip(self, tmp_path, capsys):
        out = tmp_path / "first"
        main(["sim", "--scenario", "smurf", "--out", str(out)])
        capsys.readouterr()
        first = json.loads((out / "summary.json").read_text())
        code = main(["sim", "--scenario-file", str(out / "scenario.json")])
        rerun = json.loads(capsys.readouterr().out)
        assert code == EXIT_OK
        assert rerun == first

    def test_scenario_and_file_conflict(self, tmp_path, capsys):
        out = tmp_path / "run"
        main(["sim", "--scenario", "smurf", "--out", str(out)])
        capsys.readouterr()
        code = main(["sim", "--scenario", "smurf",
                     "--scenario-file", str(out / "scenario.json")])
        capsys.readouterr()
        assert code == EXIT_USAGE


class TestEntryPoint:
    def test_console_script_runs(self):
        proc = subprocess.run(
            [sys.executable, "-m", "stormctl.cli", "fit",
             "--dataset", "table3"],
            capture_output=True, text=True, timeout=60,
        )
        assert proc.returncode == EXIT_OK
        assert json.loads(proc.stdout)["m"] > 0

    def test_log_env_smoke(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "stormctl.cli", "sim",
             "--scenario", "normal"],
            capture_output=True, text=True, timeout=60,
            env={"STORMCTL_LOG": "DEBUG", "PATH": "/usr/bin:/bin"},
        )
        assert proc.returncode == EXIT_OK

    def test_no_args_is_usage_error(self):
        proc = subprocess.run(
            [sys.executable, "-m", "stormctl.cli"],
            capture_output=True, text=True, timeout=60,
        )
        assert proc.returncode == EXIT_USAGE
