"""Tests for the scenario runner: schema, determinism, failures, rmse."""

import json

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from rotorsim import control, harness, sensors, vehicle, wind
from rotorsim.harness import EstimatorConfig, ResultsTable, ScenarioConfig, config_hash
from rotorsim.integration import IntegrationError


def _hover_config(duration=0.5, rate=200.0, seed=3, estimator=False, **kw):
    est = EstimatorConfig(drag_coeffs=[0.2, 0.2, 0.35]) if estimator else None
    return ScenarioConfig(
        vehicle=vehicle.default_params(),
        trajectory=control.HoverTrajectory([0.0, 0.0, 1.0]),
        duration=duration,
        seed=seed,
        estimator=est,
        control_rate=rate,
        **kw,
    )


class TestColumnSchema:
    def test_schema_identical_with_and_without_estimator(self):
        bare = harness.run(_hover_config(duration=0.1))
        full = harness.run(_hover_config(duration=0.1, estimator=True))
        assert bare.column_names() == full.column_names()

    def test_expected_columns_present(self):
        table = harness.run(_hover_config(duration=0.1))
        names = set(table.column_names())
        for base in ("pos", "vel", "des_pos", "cmd_moment", "imu_accel",
                     "mocap_pos", "wind", "est_pos", "est_wind", "est_wind_std"):
            for axis in "xyz":
                assert f"{base}_{axis}" in names
        for axis in "wxyz":
            assert f"quat_{axis}" in names
            assert f"est_quat_{axis}" in names
        for i in range(4):
            assert f"rotor_{i}" in names
            assert f"cmd_rotor_{i}" in names
        assert "t" in names and "cmd_thrust" in names and "cmd_saturated" in names

    def test_all_columns_equal_length(self):
        table = harness.run(_hover_config(duration=0.2))
        n = len(table)
        assert n == 40  # 0.2 s at 200 Hz
        for name in table.column_names():
            assert len(table.columns[name]) == n

    def test_time_column_is_uniform_grid(self):
        table = harness.run(_hover_config(duration=0.2))
        assert_array_equal(table.t, np.arange(40) * (1.0 / 200.0))

    def test_estimator_columns_nan_when_disabled(self):
        table = harness.run(_hover_config(duration=0.1))
        assert np.all(np.isnan(table.columns["est_pos_x"]))
        assert np.all(np.isnan(table.columns["est_wind_z"]))

    def test_estimator_columns_populated_when_enabled(self):
        table = harness.run(_hover_config(duration=0.1, estimator=True))
        assert np.all(np.isfinite(table.columns["est_pos_x"]))
        assert np.all(np.isfinite(table.columns["est_wind_std_y"]))

    def test_sensor_rate_decimation(self):
        # control 200 Hz, imu 100 Hz -> every 2nd row; mocap 50 Hz -> every 4th
        cfg = _hover_config(duration=0.1,
                            imu=sensors.ImuConfig(rate=100.0),
                            mocap=sensors.MocapConfig(rate=50.0))
        table = harness.run(cfg)
        accel = table.columns["imu_accel_z"]
        assert np.all(np.isfinite(accel[::2]))
        assert np.all(np.isnan(accel[1::2]))
        mpos = table.columns["mocap_pos_x"]
        assert np.all(np.isfinite(mpos[::4]))
        for off in (1, 2, 3):
            assert np.all(np.isnan(mpos[off::4]))

    def test_hover_unsaturated(self):
        table = harness.run(_hover_config(duration=0.2))
        assert_array_equal(table.columns["cmd_saturated"], 0.0)


class TestHoverTracking:
    def test_hover_stays_within_a_millimeter(self):
        table = harness.run(_hover_config(duration=5.0))
        err = np.column_stack([
            table.columns["pos_" + k] - table.columns["des_pos_" + k] for k in "xyz"
        ])
        assert np.max(np.linalg.norm(err, axis=1)) < 1e-3


class TestDeterminism:
    def _noisy_config(self, seed):
        return ScenarioConfig(
            vehicle=vehicle.default_params(),
            trajectory=control.CircleTrajectory(radius=0.8, speed=1.0),
            duration=0.6,
            seed=seed,
            wind_profile=wind.DrydenWind([2.0, 0.0, 0.0], intensity="moderate",
                                         altitude=30.0, seed=seed + 11),
            estimator=EstimatorConfig(drag_coeffs=[0.2, 0.2, 0.35]),
            control_rate=200.0,
        )

    def test_rerun_is_byte_identical(self, tmp_path):
        paths = []
        for tag in ("a", "b"):
            table = harness.run(self._noisy_config(seed=42))
            p = tmp_path / f"run_{tag}.csv"
            table.to_csv(p)
            paths.append(p)
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_different_seed_changes_noise(self):
        t1 = harness.run(self._noisy_config(seed=1))
        t2 = harness.run(self._noisy_config(seed=2))
        a1, a2 = t1.columns["imu_accel_x"], t2.columns["imu_accel_x"]
        good = np.isfinite(a1) & np.isfinite(a2)
        assert np.any(a1[good] != a2[good])
        w1, w2 = t1.columns["wind_x"], t2.columns["wind_x"]
        assert np.any(w1 != w2)


class TestFailureRecords:
    def test_integration_failure_truncates(self):
        def poisoned(state, rotor_cmd, wind_now, params, dt, aero_enabled=True):
            if state.t > 0.25:
                raise IntegrationError("step size underflow", state.t, None)
            return vehicle.integrate(state, rotor_cmd, wind_now, params, dt,
                                     aero_enabled=aero_enabled)

        table = harness.run(_hover_config(duration=1.0), plant_integrator=poisoned)
        failure = table.metadata["failure"]
        assert failure is not None
        assert failure["cause"].startswith("integration failure")
        assert 0 < len(table) < 200
        # table still writable after truncation
        assert len(table.columns["pos_x"]) == len(table)

    def test_state_blowup_truncates(self):
        def poisoned(state, rotor_cmd, wind_now, params, dt, aero_enabled=True):
            new = vehicle.integrate(state, rotor_cmd, wind_now, params, dt,
                                    aero_enabled=aero_enabled)
            if new.t > 0.25:
                new.velocity[0] = np.nan
            return new

        table = harness.run(_hover_config(duration=1.0), plant_integrator=poisoned)
        failure = table.metadata["failure"]
        assert failure is not None
        assert "blow-up" in failure["cause"]
        assert 0 < len(table) < 200
        assert np.all(np.isfinite(table.columns["pos_x"]))

    def test_estimator_divergence_recorded(self):
        # absurd believed drag makes the filter's velocity prediction explode
        cfg = _hover_config(duration=1.0, estimator=True)
        cfg.estimator.drag_coeffs = np.array([1e12, 1e12, 1e12])
        table = harness.run(cfg)
        failure = table.metadata["failure"]
        assert failure is not None
        assert failure["cause"].startswith("estimator failure")
        assert len(table) < 200


class TestMetadata:
    def test_clean_run_metadata(self):
        table = harness.run(_hover_config(duration=0.1, seed=9))
        md = table.metadata
        for key in ("schema_version", "package_version", "seed", "control_rate",
                    "duration", "aero_enabled", "config_hash", "config", "columns",
                    "failure", "wall_time_s", "final_state"):
            assert key in md, key
        assert md["failure"] is None
        assert md["seed"] == 9
        assert md["wall_time_s"] > 0
        assert md["columns"] == table.column_names()
        assert md["config_hash"] is None  # built in code, no raw document
        assert md["final_state"]["position"].shape == (3,)

    def test_config_hash_stable_and_sensitive(self):
        a = config_hash({"duration": 2.0, "seed": 1})
        b = config_hash({"seed": 1, "duration": 2.0})
        c = config_hash({"duration": 2.0, "seed": 2})
        assert a == b
        assert a != c
        assert len(a) == 16 and set(a) <= set("0123456789abcdef")
        assert config_hash(None) is None


class TestCsvAndSidecar:
    def _tiny_table(self):
        cols = {
            "t": np.array([0.0, 0.1, 0.2]),
            "a": np.array([1.5, np.nan, -0.25]),
            "b": np.array([0.1234567890123456, 2.0, 3.0]),
        }
        return ResultsTable(cols, {"failure": None, "seed": 0})

    def test_nan_written_as_empty_field(self, tmp_path):
        path = tmp_path / "tiny.csv"
        self._tiny_table().to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "t,a,b"
        assert lines[2].split(",")[1] == ""

    def test_repr_round_trip(self, tmp_path):
        path = tmp_path / "tiny.csv"
        table = self._tiny_table()
        table.to_csv(path)
        lines = path.read_text().splitlines()[1:]
        for i, line in enumerate(lines):
            fields = line.split(",")
            for j, name in enumerate(("t", "a", "b")):
                want = table.columns[name][i]
                if np.isnan(want):
                    assert fields[j] == ""
                else:
                    assert float(fields[j]) == want

    def test_sidecar_json(self, tmp_path):
        path = tmp_path / "tiny.json"
        table = self._tiny_table()
        table.metadata["vec"] = np.array([1.0, 2.0])
        table.sidecar(path, extra={"note": "hello"})
        doc = json.loads(path.read_text())
        assert doc["note"] == "hello"
        assert doc["seed"] == 0
        assert doc["vec"] == [1.0, 2.0]


class TestRmse:
    def test_constant_offset_exact(self):
        truth = np.zeros((50, 3))
        est = truth + np.array([0.3, -0.4, 1.2])
        t = np.arange(50) * 0.1
        out = harness.rmse(est, truth, t, window_start=0.0)
        assert_allclose([out["x"], out["y"], out["z"]], [0.3, 0.4, 1.2], rtol=1e-15)
        assert_allclose(out["norm"], 1.3, rtol=1e-15)

    def test_sinusoid_rms_is_amplitude_over_root_two(self):
        n = 4000  # whole periods, evenly sampled
        t = np.arange(n) * (1.0 / 100.0)
        truth = np.zeros((n, 3))
        est = np.zeros((n, 3))
        est[:, 0] = 0.7 * np.sin(2 * np.pi * 2.5 * t)
        out = harness.rmse(est, truth, t, window_start=0.0)
        assert_allclose(out["x"], 0.7 / np.sqrt(2.0), rtol=1e-9)

    def test_window_start_masks_early_rows(self):
        t = np.arange(100) * 0.1
        truth = np.zeros((100, 3))
        est = np.zeros((100, 3))
        est[t < 5.0] = 99.0  # junk before the window opens
        out = harness.rmse(est, truth, t, window_start=5.0)
        assert out["norm"] == 0.0

    def test_nan_rows_dropped(self):
        t = np.arange(10) * 1.0
        truth = np.zeros((10, 3))
        est = np.full((10, 3), 2.0)
        est[3] = np.nan
        out = harness.rmse(est, truth, t, window_start=0.0)
        assert_allclose(out["x"], 2.0, rtol=1e-15)

    def test_empty_window_rejected(self):
        t = np.arange(5) * 0.1
        with pytest.raises(ValueError, match="empty"):
            harness.rmse(np.zeros((5, 3)), np.zeros((5, 3)), t, window_start=10.0)

    def test_all_nan_rejected(self):
        t = np.arange(5) * 0.1
        with pytest.raises(ValueError, match="empty"):
            harness.rmse(np.full((5, 3), np.nan), np.zeros((5, 3)), t,
                         window_start=0.0)

    def test_missing_timestamps_rejected(self):
        with pytest.raises(ValueError, match="timestamps"):
            harness.rmse(np.zeros((5, 3)), np.zeros((5, 3)), t=None, window_start=5.0)
        out = harness.rmse(np.zeros((5, 3)), np.zeros((5, 3)), t=None, window_start=0.0)
        assert out["norm"] == 0.0

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="shape"):
            harness.rmse(np.zeros((5, 3)), np.zeros((6, 3)))

    def test_wind_rmse_reads_table_columns(self):
        n = 20
        cols = {"t": np.arange(n) * 1.0}
        rng = np.random.default_rng(5)
        est = rng.normal(size=(n, 3))
        truth = rng.normal(size=(n, 3))
        for j, k in enumerate("xyz"):
            cols["est_wind_" + k] = est[:, j]
            cols["wind_" + k] = truth[:, j]
        table = ResultsTable(cols, {})
        direct = harness.rmse(est, truth, cols["t"], window_start=5.0)
        assert harness.wind_rmse(table, window_start=5.0) == direct
