"""Tests for experiments module."""

from dataclasses import replace
from pathlib import Path

import pytest

from pcf_sensor_sim.exceptions import ConfigError
from pcf_sensor_sim.experiments import (
    ANALYTIC_PAIRS,
    PIPELINE_STAGES,
    ExperimentConfig,
    analytic_check_csv,
    approach_positions,
    build_scene,
    calibrate,
    detect_contact,
    fit_samples,
    proximity_points,
    run_analytic_check,
    run_force_sweep,
    run_full_pipeline,
    run_proximity_sweep,
    run_radius_sweep,
    sweep_csv,
    worker_pool,
)
from pcf_sensor_sim.models import BoundaryKind, Target
from pcf_sensor_sim.sensor import simulate
from pcf_sensor_sim.serialization import SweepRow

SMALL = replace(
    ExperimentConfig(),
    emitter_rays=31,
    scatter_rays=17,
    distance_points=3,
    depth_points=3,
    radius_points=3,
    reflectivities=(0.5,),
)


class TestExperimentConfig:
    """Test suite for ExperimentConfig."""

    def test_text_round_trip(self):
        """to_text output should parse back to the same config."""
        config = replace(SMALL, scatter_seed=7, directory="runs")

        assert ExperimentConfig.from_text(config.to_text()) == config

    def test_defaults_when_empty(self):
        """An empty file should give the defaults."""
        assert ExperimentConfig.from_text("") == ExperimentConfig()

    def test_overrides(self):
        """Values in the file should override defaults."""
        config = ExperimentConfig.from_text(
            "[sweep]\ndistance_points = 5\nreflectivities = 0.2, 0.9\n"
            "[trace]\nscatter_seed = 3\n"
        )

        assert config.distance_points == 5
        assert config.reflectivities == (0.2, 0.9)
        assert config.scatter_seed == 3
        assert len(config.distances()) == 5

    @pytest.mark.parametrize(
        ("text", "name"),
        [
            ("[sweep]\nbogus = 1\n", "sweep.bogus"),
            ("[sensor]\nemitter_rays = many\n", "sensor.emitter_rays"),
            ("[sweep]\nreflectivities = 0.5, 1.5\n", "sweep.reflectivities"),
            ("[sweep]\naxis = angle\n", "sweep.axis"),
            ("[sweep]\ndistance_min_mm = 60\n", "sweep.distance_max_mm"),
            ("[pipeline]\nforce_levels_n = 12\n", "pipeline.force_levels_n"),
        ],
    )
    def test_errors_name_the_option(self, text, name):
        """Invalid files should raise ConfigError naming section.key."""
        with pytest.raises(ConfigError, match=name.replace(".", r"\.")):
            ExperimentConfig.from_text(text)

    def test_from_missing_file(self, tmp_path):
        """An unreadable file should raise ConfigError."""
        with pytest.raises(ConfigError, match="cannot read config"):
            ExperimentConfig.from_file(tmp_path / "nope.ini")

    def test_digest(self):
        """The digest should change with any option."""
        assert SMALL.digest() == replace(SMALL).digest()
        assert SMALL.digest() != replace(SMALL, bounce_cap=4).digest()

    def test_output_path(self, tmp_path):
        """[output] directory should win over the caller's directory."""
        assert SMALL.output_path("a.csv", tmp_path) == tmp_path / "a.csv"
        assert replace(SMALL, directory="runs").output_path("a.csv", tmp_path) == Path("runs/a.csv")

    def test_default_grids(self):
        """Distances run from contact to 50 mm, bare from 10 mm."""
        config = ExperimentConfig()

        bare = config.distances()
        arc = config.distances(17.75)
        assert (bare[0], bare[1], bare[-1], len(bare)) == (10.0, 11.6, 50.0, 26)
        assert (arc[0], arc[-1], len(arc)) == (17.75, 50.0, 26)
        assert config.depths() == (0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0)

    def test_contact_beyond_far_end(self):
        """A contact distance past the far end leaves no grid; at the far end, one point."""
        config = ExperimentConfig()

        assert config.distances(60.0) == ()
        assert config.distances(50.0) == (50.0,)

    def test_boundary_kinds(self):
        """Each kind should use its configured geometry."""
        config = ExperimentConfig()

        assert config.boundary("blocker").blocker_height == 17.5
        assert config.boundary(BoundaryKind.ARC).radius == 17.75
        assert not config.boundary("bare").has_elastomer
        assert config.template("flat").elastomer.refractive_index == 1.41


class TestBuildScene:
    """Test suite for build_scene."""

    def test_variants(self):
        """No distance, a distance, or a depth give the three scene shapes."""
        assert build_scene(SMALL, "arc").target is None
        assert build_scene(SMALL, "arc", 30.0, 0.85).target.distance == 30.0
        pressed = build_scene(SMALL, "arc", reflectivity=0.5, depth=2.0)
        assert pressed.in_contact
        assert pressed.target.distance == 15.75


class TestSweeps:
    """Test suite for the sweep runners."""

    def test_default_proximity_grid_size(self):
        """4 configurations x 26 distances x 3 reflectivities."""
        assert len(proximity_points(ExperimentConfig())) == 312

    def test_grid_starts_at_contact(self):
        """Each configuration sweeps from its own contact distance outward."""
        config = replace(SMALL, distance_min_mm=10.0, distance_max_mm=30.0)

        tasks = proximity_points(config)

        def grid(kind):
            return [d for template, d, _ in tasks if template.boundary.kind is kind]

        assert grid(BoundaryKind.BARE) == [10.0, 20.0, 30.0]
        assert grid(BoundaryKind.FLAT) == [17.75, 23.875, 30.0]
        assert grid(BoundaryKind.BLOCKER) == [23.5, 26.75, 30.0]

    def test_proximity_rows(self):
        """One row per (configuration, d, rho), in grid order."""
        rows = run_proximity_sweep(SMALL)

        assert len(rows) == 4 * 3
        assert [r.config_kind for r in rows[::3]] == ["bare", "flat", "blocker", "arc"]
        assert all(r.delta_mm == 0.0 and r.force_n == 0.0 for r in rows)
        assert all(r.range_mm > 0 for r in rows if r.config_kind == "bare")

    def test_proximity_deterministic(self):
        """Sweeps should be repeatable."""
        kinds = (BoundaryKind.ARC,)

        assert run_proximity_sweep(SMALL, kinds=kinds) == run_proximity_sweep(SMALL, kinds=kinds)

    def test_force_rows(self):
        """Depth 0 carries force 0; rows hold d = thickness - depth."""
        rows = run_force_sweep(SMALL)

        assert len(rows) == 3 * 3
        first = rows[0]
        assert (first.config_kind, first.delta_mm, first.force_n) == ("flat", 0.0, 0.0)
        assert first.d_mm == 17.75
        arc_last = [r for r in rows if r.config_kind == "arc"][-1]
        assert arc_last.delta_mm == 5.0
        assert arc_last.force_n == 10.0
        assert arc_last.d_mm == 12.75

    def test_force_depth_too_deep(self):
        """A depth grid reaching the thickness should raise ConfigError."""
        config = replace(SMALL, depth_max_mm=18.0)

        with pytest.raises(ConfigError, match="sweep.depth_max_mm"):
            run_force_sweep(config)

    def test_radius_sweep(self):
        """One evaluation per radius at the arc thickness."""
        evaluations = run_radius_sweep(SMALL)

        assert [e.radius for e in evaluations] == [10.0, 20.0, 30.0]
        assert all(e.thickness == 17.75 for e in evaluations)

    def test_sweep_csv_axis(self):
        """The radius axis writes the optimizer columns."""
        lines = sweep_csv(SMALL, "radius").splitlines()

        assert lines[0] == "# pcf-sensor-sim optimize v1"
        assert len(lines) == 2 + 3

    def test_worker_pool_serial(self):
        """One worker means the builtin map."""
        with worker_pool(1) as mapper:
            assert mapper is map

    def test_fit_samples(self):
        """Only rows of the requested kind and reflectivity are used."""
        rows = [
            SweepRow("arc", 30.0, 0.5, 0, 0, 29.0, 0.1, 0.0),
            SweepRow("arc", 40.0, 0.17, 0, 0, 39.0, 0.05, 0.0),
            SweepRow("flat", 30.0, 0.5, 0, 0, 28.0, 0.2, 0.01),
        ]

        assert fit_samples(rows, BoundaryKind.ARC, 0.5) == [(30.0, 0.1)]


class TestCalibrate:
    """Test suite for calibrate."""

    @pytest.mark.parametrize("distance_min", [10.0, 25.0])
    def test_touch_range_read_at_contact(self, distance_min):
        """The touch range should be the reading with the target resting on the arc."""
        config = replace(SMALL, distance_min_mm=distance_min)
        template = config.template(BoundaryKind.ARC)

        calibration = calibrate(config, template)

        touching = simulate(replace(template, target=Target(17.75, 0.5))).range_mm
        assert calibration.touch_ranges[0.5] == touching

    def test_grid_holds_reference_distance(self):
        """The configured reference distance should be calibrated even off the sweep grid."""
        config = replace(SMALL, probe_distance_mm=31.0)
        template = config.template(BoundaryKind.ARC)

        calibration = calibrate(config, template)

        reading = simulate(replace(template, target=Target(31.0, 0.5)))
        assert reading.range_mm in calibration.profiles[0.5].ranges


class TestContactDetection:
    """Test suite for approach_positions and detect_contact."""

    def test_approach_positions(self):
        """Free approach down to the boundary, then into contact."""
        config = replace(SMALL, approach_start_mm=20.0, approach_step_mm=0.5, depth_max_mm=1.0)

        positions = approach_positions(config, 17.75)

        assert positions == [
            (20.0, 0.0),
            (19.5, 0.0),
            (19.0, 0.0),
            (18.5, 0.0),
            (18.0, 0.0),
            (17.75, 0.0),
            (17.25, 0.5),
            (16.75, 1.0),
        ]

    def test_onset_is_last_touching_sample(self):
        """Onset is the last sample reading at least the touch range."""
        samples = [(50.0, 50.0), (30.0, 30.0), (20.0, 19.9), (17.75, 17.7), (17.25, 15.0)]

        assert detect_contact(samples, 17.7) == 3

    def test_no_drop(self):
        """Without a range drop there is no contact."""
        assert detect_contact([(50.0, 50.0), (30.0, 30.0)], 17.7) is None


class TestPipeline:
    """Test suite for run_full_pipeline."""

    def test_black_target_has_no_signal(self):
        """A zero-reflectivity target stops the pipeline at measurement."""
        config = replace(SMALL, true_reflectivity=0.0, reflectivities=(0.17, 0.85))

        report = run_full_pipeline(config)

        assert [s.name for s in report.stages] == list(PIPELINE_STAGES)
        assert report.stage("calibrate").status == "ok"
        assert report.stage("measure").status == "no-signal"
        assert all(report.stage(name).status == "skipped" for name in PIPELINE_STAGES[2:])
        assert not report.ok
        assert report.to_dict()["ok"] is False

    def test_unknown_stage(self):
        """Looking up a stage that never ran raises KeyError."""
        report = run_full_pipeline(replace(SMALL, true_reflectivity=0.0, reflectivities=(0.2, 0.8)))

        with pytest.raises(KeyError):
            report.stage("nope")

    @pytest.mark.slow
    def test_round_trip(self):
        """Default run should recover reflectivity, contact and force."""
        lines = []

        report = run_full_pipeline(ExperimentConfig(), progress=lines.append)

        assert report.ok, report.to_dict()
        assert report.estimated_reflectivity == pytest.approx(0.5, abs=1e-9)
        assert abs(report.detected_contact_mm - 17.75) <= 0.5
        assert len(report.force_checks) == 5
        assert max(c.relative_error for c in report.force_checks) < 1e-6
        assert lines

    @pytest.mark.slow
    def test_off_family_round_trip(self):
        """A reflectivity between calibration curves and off-knot forces should still round-trip."""
        config = replace(
            ExperimentConfig(),
            true_reflectivity=0.3,
            force_levels_n=(1.5, 3.5, 5.5, 7.5, 9.5),
        )

        report = run_full_pipeline(config)

        assert report.ok, report.to_dict()
        assert abs(report.estimated_reflectivity - 0.3) < 0.05
        assert abs(report.detected_contact_mm - 17.75) <= 0.5
        assert len(report.force_checks) == 5
        assert all(c.relative_error < 0.10 for c in report.force_checks)
        assert not any(c.saturated for c in report.force_checks)


class TestAnalyticCheck:
    """Test suite for run_analytic_check."""

    def test_table(self):
        """Twenty rows; the sampled area tracks the exact lens area."""
        rows = run_analytic_check(samples=200_000)

        assert len(rows) == len(ANALYTIC_PAIRS) == 20
        for row in rows:
            assert row.monte_carlo_mm2 == pytest.approx(row.exact_mm2, rel=0.05, abs=0.1)
        assert any(row.formula_mm2 != pytest.approx(row.exact_mm2, rel=0.05) for row in rows)

    def test_deterministic_csv(self):
        """Same seed gives the same CSV."""
        pairs = ANALYTIC_PAIRS[:3]

        first = analytic_check_csv(run_analytic_check(pairs, samples=1000, seed=5))
        second = analytic_check_csv(run_analytic_check(pairs, samples=1000, seed=5))

        assert first == second
        assert first.splitlines()[0] == "# pcf-sensor-sim analytic-check v1"
