"""Tests for the pcf-sim command line."""

import argparse
import json
from pathlib import Path

import numpy as np
import pytest

from pcf_sensor_sim.calibration import ForceTable, IntensityFit
from pcf_sensor_sim.cli.main import build_parser, fit_member, main
from pcf_sensor_sim.core import summarize_runs
from pcf_sensor_sim.experiments import ExperimentConfig
from pcf_sensor_sim.sensor import analytic_intensity
from pcf_sensor_sim.serialization import (
    SweepRow,
    load_fit,
    load_force_table,
    parse_fit,
    save_fit,
    save_force_table,
    sweep_csv_text,
)

SMALL_CONFIG = """\
[sensor]
emitter_rays = 31

[trace]
scatter_rays = 17

[sweep]
distance_points = 3
depth_points = 3
radius_points = 3
reflectivities = 0.5
"""


@pytest.fixture
def log_dir(tmp_path):
    return tmp_path / "logs"


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.ini"
    path.write_text(SMALL_CONFIG, encoding="utf-8")
    return path


def run(log_dir, *argv):
    main(["--log-dir", str(log_dir), *argv])


class TestParser:
    """Test suite for build_parser."""

    def test_requires_command(self):
        """A bare invocation should be a usage error."""
        with pytest.raises(SystemExit) as exc_info:
            build_parser().parse_args([])
        assert exc_info.value.code == 2

    def test_scene_defaults(self):
        """simulate should default to the arc with no target."""
        args = build_parser().parse_args(["simulate"])

        assert (args.kind, args.distance, args.reflectivity, args.depth) == ("arc", None, 0.5, 0.0)


class TestShowConfig:
    """Test suite for show-config."""

    def test_defaults_round_trip(self, log_dir, capsys):
        """The printed defaults should parse back to the default config."""
        run(log_dir, "show-config")

        out = capsys.readouterr().out
        assert out.startswith("[sensor]\n")
        assert ExperimentConfig.from_text(out) == ExperimentConfig()

    def test_file_values(self, log_dir, small_config, capsys):
        """Values from --config should show up in the resolved config."""
        run(log_dir, "show-config", "--config", str(small_config))

        assert "emitter_rays = 31" in capsys.readouterr().out

    def test_missing_file(self, log_dir, tmp_path, capsys):
        """A missing config file should be a one-line io error."""
        with pytest.raises(SystemExit) as exc_info:
            run(log_dir, "show-config", "-c", str(tmp_path / "nope.ini"))

        assert exc_info.value.code == 1
        assert capsys.readouterr().err.startswith("error: io: Config file does not exist")

    def test_invalid_file(self, log_dir, tmp_path, capsys):
        """A bad option should be reported as a config error."""
        path = tmp_path / "bad.ini"
        path.write_text("[sweep]\naxis = sideways\n", encoding="utf-8")

        with pytest.raises(SystemExit):
            run(log_dir, "show-config", "-c", str(path))

        err = capsys.readouterr().err
        assert err.startswith("error: config: sweep.axis")
        assert err.count("\n") == 1


class TestSimulate:
    """Test suite for simulate."""

    def test_json(self, log_dir, capsys):
        """--json should print the reading as JSON."""
        run(log_dir, "simulate", "--kind", "bare", "--distance", "30", "--json")

        summary = json.loads(capsys.readouterr().out)
        assert summary["kind"] == "bare"
        assert 29.0 <= summary["range_mm"] <= 31.0
        assert summary["crosstalk"] == 0.0
        assert summary["snr"] == "inf"

    def test_text(self, log_dir, capsys):
        """Plain output lists range, intensity and crosstalk."""
        run(log_dir, "simulate", "--kind", "flat")

        out = capsys.readouterr().out
        assert "Range:" in out
        assert "Crosstalk:" in out

    def test_domain_error_logged(self, log_dir, capsys):
        """A target inside the elastomer fails with a scene error and a failed run."""
        with pytest.raises(SystemExit) as exc_info:
            run(log_dir, "simulate", "--kind", "arc", "--distance", "10")

        assert exc_info.value.code == 1
        assert capsys.readouterr().err.startswith("error: scene: ")
        summary = summarize_runs(log_dir)
        assert summary["failed"] == 1
        assert summary["recent_failures"][0]["error"].startswith("scene: ")


class TestSweepCommands:
    """Test suite for the sweep subcommands."""

    def test_sweep_force_to_file(self, log_dir, small_config, tmp_path):
        """sweep-force -o should write the CSV and log the output path."""
        output = tmp_path / "out" / "force.csv"

        run(log_dir, "sweep-force", "-c", str(small_config), "-o", str(output), "-q")

        lines = output.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "# pcf-sensor-sim sweep v1"
        assert len(lines) == 2 + 3 * 3
        summary = summarize_runs(log_dir)
        assert (summary["finished"], summary["succeeded"]) == (1, 1)
        assert summary["by_command"] == {"sweep-force": 1}

    def test_sweep_radius_to_stdout(self, log_dir, small_config, capsys):
        """-o - should print only the CSV."""
        run(log_dir, "sweep", "--axis", "radius", "-c", str(small_config), "-o", "-")

        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "# pcf-sensor-sim optimize v1"
        assert len(lines) == 2 + 3

    def test_default_output_dir(self, log_dir, small_config, tmp_path, monkeypatch):
        """Without -o the file lands in PCF_OUTPUT_DIR under its [output] name."""
        monkeypatch.setenv("PCF_OUTPUT_DIR", str(tmp_path / "outputs"))

        run(log_dir, "sweep", "--axis", "radius", "-c", str(small_config), "-q")

        assert (tmp_path / "outputs" / "radius.csv").exists()

    def test_bad_workers(self, log_dir, small_config, capsys):
        """--workers 0 should be a config error."""
        with pytest.raises(SystemExit):
            run(log_dir, "sweep-proximity", "-c", str(small_config), "-j", "0", "-o", "-")

        assert capsys.readouterr().err.startswith("error: config: ")


class TestFitCommand:
    """Test suite for fit."""

    def test_fit_from_csv(self, log_dir, tmp_path):
        """Fitting a sweep CSV should recover the law it was drawn from."""
        distances = np.linspace(6.0, 50.0, 40)
        intensities = analytic_intensity(distances, 0.8, 4.0, 0.01)
        rows = [
            SweepRow("bare", float(d), 0.5, 0.0, 0.0, float(d), float(i), 0.0)
            for d, i in zip(distances, intensities)
        ]
        data = tmp_path / "sweep.csv"
        data.write_text(sweep_csv_text(rows), encoding="utf-8")
        output = tmp_path / "fit.txt"

        run(log_dir, "fit", "--input", str(data), "-o", str(output), "-q")

        fit = parse_fit(output.read_text(encoding="utf-8"))
        assert fit.kappa == pytest.approx(0.8, rel=1e-6)
        assert fit.zeta == pytest.approx(4.0, rel=1e-6)

    def test_missing_input(self, log_dir, tmp_path, capsys):
        """A missing CSV should fail with a one-line error."""
        with pytest.raises(SystemExit):
            run(log_dir, "fit", "--input", str(tmp_path / "none.csv"), "-q")

        assert capsys.readouterr().err.startswith("error: file-not-found: ")

    def test_fit_by_range(self, log_dir, tmp_path):
        """--by-range should fit intensity against the range column."""
        ranges = np.linspace(6.0, 50.0, 40)
        intensities = analytic_intensity(ranges, 0.8, 4.0, 0.01)
        rows = [
            SweepRow("arc", float(r) - 1.0, 0.5, 0.0, 0.0, float(r), float(i), 0.0)
            for r, i in zip(ranges, intensities)
        ]
        data = tmp_path / "sweep.csv"
        data.write_text(sweep_csv_text(rows), encoding="utf-8")
        output = tmp_path / "fit.txt"

        run(
            log_dir,
            "fit",
            "--input",
            str(data),
            "--kind",
            "arc",
            "--by-range",
            "-o",
            str(output),
            "-q",
        )

        fit = load_fit(output)
        assert fit.kappa == pytest.approx(0.8, rel=1e-6)
        assert fit.zeta == pytest.approx(4.0, rel=1e-6)


class TestForceTableCommand:
    """Test suite for force-table."""

    @pytest.mark.slow
    def test_writes_loadable_table(self, log_dir, tmp_path):
        """force-table should write a table that loads back for the requested reflectivity."""
        config = tmp_path / "depths.ini"
        config.write_text("[sweep]\ndepth_min_mm = 1.0\ndepth_points = 3\n", encoding="utf-8")
        output = tmp_path / "tables" / "arc.txt"

        run(
            log_dir,
            "force-table",
            "-c",
            str(config),
            "--reflectivity",
            "0.85",
            "-o",
            str(output),
            "-q",
        )

        table = load_force_table(output)
        assert table.reflectivity == 0.85
        assert table.forces == pytest.approx((2.0, 6.0, 10.0))
        assert summarize_runs(log_dir)["by_command"] == {"force-table": 1}

    def test_bare_rejected(self, log_dir):
        """A bare sensor cannot be pressed, so it is not a choice."""
        with pytest.raises(SystemExit) as exc_info:
            build_parser().parse_args(["force-table", "--kind", "bare"])

        assert exc_info.value.code == 2


class TestPipelineCommand:
    """Test suite for pipeline."""

    def test_fit_member(self):
        """RHO=FILE should parse into a reflectivity and a path."""
        assert fit_member("0.17=dark.txt") == (0.17, Path("dark.txt"))

    @pytest.mark.parametrize("text", ["dark.txt", "x=dark.txt", "1.5=dark.txt", "0.5="])
    def test_fit_member_rejects(self, text):
        """Malformed members should be argparse type errors."""
        with pytest.raises(argparse.ArgumentTypeError):
            fit_member(text)

    def test_loads_saved_family_and_table(self, log_dir, small_config, tmp_path):
        """--fit and --force-table should replace the in-run calibration and table."""
        for rho in (0.17, 0.85):
            fit = IntensityFit(rho * 40.0, 4.0, 0.0, 0.0, 3, True, 0.0)
            save_fit(fit, tmp_path / f"fit-{rho}.txt")
        save_force_table(ForceTable(0.5, (0.0, 10.0), (0.2, 0.01)), tmp_path / "table.txt")
        report_path = tmp_path / "report.json"

        run(
            log_dir,
            "pipeline",
            "-c",
            str(small_config),
            "--fit",
            f"0.17={tmp_path / 'fit-0.17.txt'}",
            "--fit",
            f"0.85={tmp_path / 'fit-0.85.txt'}",
            "--force-table",
            str(tmp_path / "table.txt"),
            "-o",
            str(report_path),
            "-q",
        )

        report = json.loads(report_path.read_text(encoding="utf-8"))
        calibrate = next(s for s in report["stages"] if s["name"] == "calibrate")
        assert calibrate["status"] == "ok"
        assert calibrate["detail"]["source"] == "loaded"
        assert calibrate["detail"]["reflectivities"] == [0.17, 0.85]

    def test_missing_fit_file(self, log_dir, tmp_path, capsys):
        """A missing fit file should fail the run with a one-line error."""
        with pytest.raises(SystemExit):
            run(log_dir, "pipeline", "--fit", f"0.5={tmp_path / 'absent.txt'}", "-q")

        assert capsys.readouterr().err.startswith("error: file-not-found: ")
        assert summarize_runs(log_dir)["failed"] == 1


class TestOtherCommands:
    """Test suite for trace-diagram, analytic-check and status."""

    def test_trace_diagram(self, log_dir, small_config, tmp_path):
        """trace-diagram should write an SVG document."""
        output = tmp_path / "arc.svg"

        run(log_dir, "trace-diagram", "-c", str(small_config), "-o", str(output), "-q")

        assert "<svg" in output.read_text(encoding="utf-8")

    def test_analytic_check(self, log_dir, tmp_path):
        """analytic-check should write one row per (s, r) pair."""
        output = tmp_path / "analytic.csv"

        run(log_dir, "analytic-check", "--samples", "2000", "-o", str(output), "-q")

        assert len(output.read_text(encoding="utf-8").splitlines()) == 2 + 20

    def test_status_json(self, log_dir, small_config, capsys):
        """status --json should summarize earlier runs."""
        run(log_dir, "sweep", "--axis", "radius", "-c", str(small_config), "-o", "-")
        capsys.readouterr()

        run(log_dir, "status", "--json")

        summary = json.loads(capsys.readouterr().out)
        assert summary["succeeded"] == 1
        assert summary["unfinished"] == 0

    def test_status_text_empty(self, log_dir, capsys):
        """status on an empty log directory should print zero counts."""
        run(log_dir, "status")

        out = capsys.readouterr().out
        assert "RUN LOG" in out
        assert "Finished:      0" in out
