"""Monte Carlo study machinery: draws, trial plumbing, statistics, writers.

Full-protocol statistical behavior lives in the acceptance suite; these
tests pin the deterministic plumbing with synthetic trials and a couple of
real but heavily shortened ones.
"""

import json

import numpy as np
import pytest

from rotorsim import montecarlo, vehicle
from rotorsim.montecarlo import (
    DEFAULT_RANGES,
    MonteCarloSpec,
    TrialResult,
    monte_carlo,
    run_trial,
    summarize,
    write_summary_json,
    write_trials_csv,
)


def tiny_spec(**overrides):
    kwargs = dict(
        n_trials=2,
        seed=11,
        calibration_duration=2.0,
        evaluation_duration=3.0,
        control_rate=100.0,
        rmse_window_start=1.0,
    )
    kwargs.update(overrides)
    return MonteCarloSpec(**kwargs)


def synthetic_trial(index, drag_level, rmse_norm=None, failed=False):
    rmse = None
    failure = None
    if failed:
        failure = {"stage": "evaluation", "t": 1.0, "cause": "synthetic"}
    elif rmse_norm is not None:
        r = float(rmse_norm)
        rmse = {"x": r, "y": r, "z": r, "norm": r}
    return TrialResult(
        index=index,
        params={"mass": 0.6, "c_dx": 1e-4, "c_dy": 1e-4, "c_dz": 1e-3,
                "k_d": 5e-4, "k_z": 1e-3},
        wind_speed=3.0,
        wind_direction=0.5,
        drag_level=float(drag_level),
        rmse=rmse,
        failure=failure,
    )


class TestSpecValidation:
    def test_defaults(self):
        spec = MonteCarloSpec()
        assert spec.n_trials == 50
        assert spec.ranges == DEFAULT_RANGES
        # floor keeps the wind observable in every trial
        assert spec.wind_speed_range == (2.0, 5.0)

    def test_rejects_zero_trials(self):
        with pytest.raises(ValueError, match="n_trials"):
            MonteCarloSpec(n_trials=0)

    def test_rejects_missing_range(self):
        ranges = dict(DEFAULT_RANGES)
        del ranges["k_d"]
        with pytest.raises(ValueError, match="k_d"):
            MonteCarloSpec(ranges=ranges)

    def test_rejects_negative_range(self):
        ranges = dict(DEFAULT_RANGES, c_dx=(-1e-4, 1e-3))
        with pytest.raises(ValueError, match="c_dx"):
            MonteCarloSpec(ranges=ranges)

    def test_rejects_nonpositive_mass(self):
        ranges = dict(DEFAULT_RANGES, mass=(0.0, 0.9))
        with pytest.raises(ValueError, match="mass"):
            MonteCarloSpec(ranges=ranges)

    def test_rejects_inverted_wind_range(self):
        with pytest.raises(ValueError, match="wind_speed_range"):
            MonteCarloSpec(wind_speed_range=(5.0, 2.0))


class TestDraw:
    def test_deterministic_per_index(self):
        spec = MonteCarloSpec(seed=4)
        first = montecarlo._draw(spec, 9)
        second = montecarlo._draw(spec, 9)
        assert first[0] == second[0]
        assert first[1:] == second[1:]

    def test_indices_draw_differently(self):
        spec = MonteCarloSpec(seed=4)
        a = montecarlo._draw(spec, 0)
        b = montecarlo._draw(spec, 1)
        assert a[0] != b[0]
        assert a[3:] != b[3:]

    def test_draws_respect_ranges(self):
        ranges = dict(DEFAULT_RANGES, k_d=(2e-4, 3e-4))
        spec = MonteCarloSpec(seed=7, ranges=ranges,
                              wind_speed_range=(1.5, 2.5))
        for index in range(25):
            draws, speed, heading, *seeds = montecarlo._draw(spec, index)
            for key, (lo, hi) in ranges.items():
                assert lo <= draws[key] <= hi
            assert 1.5 <= speed <= 2.5
            assert 0.0 <= heading < 2.0 * np.pi
            assert len(set(seeds)) == 3


class TestDragLevel:
    def test_endpoints(self):
        lows = {k: lo for k, (lo, hi) in DEFAULT_RANGES.items()}
        highs = {k: hi for k, (lo, hi) in DEFAULT_RANGES.items()}
        assert montecarlo._drag_level(lows, DEFAULT_RANGES) == 0.0
        assert montecarlo._drag_level(highs, DEFAULT_RANGES) == 1.0

    def test_least_observable_axis_sets_the_level(self):
        draws = {k: hi for k, (lo, hi) in DEFAULT_RANGES.items()}
        draws["k_z"] = 0.25 * DEFAULT_RANGES["k_z"][1]
        assert montecarlo._drag_level(draws, DEFAULT_RANGES) == \
               pytest.approx(0.25, abs=1e-12)
        draws["k_d"] = 0.1 * DEFAULT_RANGES["k_d"][1]
        assert montecarlo._drag_level(draws, DEFAULT_RANGES) == \
               pytest.approx(0.1, abs=1e-12)

    def test_parasitic_draws_do_not_move_the_level(self):
        mids = {k: 0.5 * (lo + hi) for k, (lo, hi) in DEFAULT_RANGES.items()}
        bumped = dict(mids, c_dx=DEFAULT_RANGES["c_dx"][1],
                      c_dy=DEFAULT_RANGES["c_dy"][1],
                      c_dz=DEFAULT_RANGES["c_dz"][1])
        assert montecarlo._drag_level(bumped, DEFAULT_RANGES) == \
               montecarlo._drag_level(mids, DEFAULT_RANGES) == \
               pytest.approx(0.5, abs=1e-12)

    def test_zero_width_range_contributes_zero(self):
        ranges = dict(DEFAULT_RANGES, k_z=(1e-3, 1e-3))
        draws = {k: hi for k, (lo, hi) in ranges.items()}
        assert montecarlo._drag_level(draws, ranges) == 0.0


class TestTrialVehicle:
    def test_assembles_drawn_vehicle(self):
        draws = {"mass": 0.5, "c_dx": 1e-4, "c_dy": 2e-4, "c_dz": 5e-3,
                 "k_d": 6e-4, "k_z": 1.2e-3}
        params = montecarlo._trial_vehicle(draws)
        base = vehicle.default_params()
        assert params.mass == 0.5
        np.testing.assert_allclose(params.inertia,
                                   base.inertia * (0.5 / base.mass))
        np.testing.assert_array_equal(params.parasitic_drag,
                                      [1e-4, 2e-4, 5e-3])
        np.testing.assert_array_equal(params.rotor_drag,
                                      [6e-4, 6e-4, 1.2e-3])
        assert params.thrust_coeff == base.thrust_coeff
        assert params.rotor_speed_max == base.rotor_speed_max


class TestRunTrial:
    def test_tiny_trial_completes(self):
        trial = run_trial(tiny_spec(), 0)
        assert trial.ok
        assert trial.failure is None
        coeffs = trial.calibrated["coeffs"]
        assert len(coeffs) == 3 and all(c >= 0.0 for c in coeffs)
        assert set(trial.rmse) == {"x", "y", "z", "norm"}
        assert np.isfinite(trial.rmse["norm"])
        assert 2.0 <= trial.wind_speed <= 5.0

    def test_trial_is_deterministic(self):
        a = run_trial(tiny_spec(), 1)
        b = run_trial(tiny_spec(), 1)
        assert a.to_dict() == b.to_dict()

    def test_empty_evaluation_window_is_recorded_not_raised(self):
        trial = run_trial(tiny_spec(rmse_window_start=10.0), 0)
        assert not trial.ok
        assert trial.failure["stage"] == "evaluation"
        assert trial.rmse is None


class TestDecileSplit:
    def test_single_per_decile(self):
        trials = [synthetic_trial(i, drag_level=i / 9.0, rmse_norm=0.1)
                  for i in range(10)]
        low, high = montecarlo._decile_split(trials, 10)
        assert [tr.index for tr in low] == [0]
        assert [tr.index for tr in high] == [9]

    def test_decile_size_follows_total_not_successes(self):
        # 20 successes out of a 50-trial study still splits 5 per decile
        trials = [synthetic_trial(i, drag_level=i / 19.0, rmse_norm=0.1)
                  for i in range(20)]
        low, high = montecarlo._decile_split(trials, 50)
        assert [tr.index for tr in low] == [0, 1, 2, 3, 4]
        assert [tr.index for tr in high] == [15, 16, 17, 18, 19]


class TestSummarize:
    def test_all_failed(self):
        spec = tiny_spec()
        trials = [synthetic_trial(i, 0.5, failed=True) for i in range(3)]
        summary = summarize(trials, spec)
        assert summary["n_ok"] == 0
        assert summary["n_failed"] == 3
        assert len(summary["failures"]) == 3
        assert "rmse_median" not in summary

    def test_mixed_statistics(self):
        spec = tiny_spec(rmse_threshold=0.5)
        norms = [0.2, 0.3, 0.4, 0.6, 0.8, 1.0, 0.1, 0.45]
        trials = [synthetic_trial(i, i / 9.0, rmse_norm=r)
                  for i, r in enumerate(norms)]
        trials += [synthetic_trial(8, 0.9, failed=True),
                   synthetic_trial(9, 1.0, failed=True)]
        summary = summarize(trials, spec)
        assert summary["n_trials"] == 10
        assert summary["n_ok"] == 8
        assert summary["n_failed"] == 2
        assert {f["index"] for f in summary["failures"]} == {8, 9}
        assert summary["rmse_median"] == pytest.approx(np.median(norms))
        assert summary["rmse_mean"] == pytest.approx(np.mean(norms))
        assert summary["fraction_below_threshold"] == pytest.approx(5 / 8)

    def test_decile_rank_test_detects_separation(self):
        # drag up, error down: the low-drag decile should test as worse
        spec = tiny_spec()
        trials = [synthetic_trial(i, drag_level=i / 39.0,
                                  rmse_norm=2.0 - i / 39.0)
                  for i in range(40)]
        summary = summarize(trials, spec)
        decile = summary["drag_deciles"]
        assert decile["n_per_decile"] == 4
        assert decile["low_drag_median"] > decile["high_drag_median"]
        # complete separation of 4 vs 4 under the exact one-sided test
        assert decile["rank_test_p"] == pytest.approx(1.0 / 70.0)

    def test_rank_test_omitted_when_deciles_too_small(self):
        spec = tiny_spec()
        trials = [synthetic_trial(i, drag_level=i / 9.0, rmse_norm=0.3)
                  for i in range(10)]
        summary = summarize(trials, spec)
        decile = summary["drag_deciles"]
        assert decile["n_per_decile"] == 1
        assert "rank_test_p" not in decile


class TestParallelExecution:
    def test_parallel_matches_sequential(self):
        spec = tiny_spec(n_trials=3, seed=21)
        seq_trials, seq_summary = monte_carlo(spec, parallel=1)
        par_trials, par_summary = monte_carlo(spec, parallel=2)
        assert [tr.to_dict() for tr in seq_trials] == \
               [tr.to_dict() for tr in par_trials]
        assert seq_summary == par_summary


class TestWriters:
    def _trials(self):
        ok = synthetic_trial(0, 0.25, rmse_norm=0.37)
        ok.calibrated = {"coeffs": [0.1, 0.1, 0.3], "raw_coeffs": [0.1, 0.1, 0.3],
                         "residual_rms": [0.01, 0.01, 0.02],
                         "excitation": [1.0, 1.0, 1.0],
                         "warnings": ["weak vertical excitation"]}
        bad = synthetic_trial(1, 0.75, failed=True)
        return [ok, bad]

    def test_trials_csv(self, tmp_path):
        path = tmp_path / "trials.csv"
        write_trials_csv(self._trials(), path)
        lines = path.read_text().splitlines()
        assert lines[0] == ("index,mass,c_dx,c_dy,c_dz,k_d,k_z,"
                            "wind_speed,wind_direction,drag_level,"
                            "rmse_x,rmse_y,rmse_z,rmse_norm,"
                            "calibration_warnings,failed")
        ok_row = lines[1].split(",")
        assert ok_row[0] == "0"
        assert float(ok_row[13]) == 0.37
        assert ok_row[14] == "1"     # one calibration warning
        assert ok_row[15] == "0"
        bad_row = lines[2].split(",")
        assert bad_row[10:14] == ["", "", "", ""]
        assert bad_row[15] == "1"

    def test_summary_json_round_trip(self, tmp_path):
        spec = tiny_spec()
        trials = self._trials()
        summary = summarize(trials, spec)
        path = tmp_path / "summary.json"
        write_summary_json(trials, summary, spec, path)
        doc = json.loads(path.read_text())
        assert doc["schema_version"] == 1
        assert doc["spec"]["n_trials"] == spec.n_trials
        assert doc["spec"]["wind_speed_range"] == [2.0, 5.0]
        assert doc["spec"]["ranges"]["k_d"] == [0.0, 1.19e-3]
        assert doc["summary"]["n_ok"] == 1
        assert len(doc["trials"]) == 2
        assert doc["trials"][1]["failure"]["stage"] == "evaluation"

    def test_summary_json_bytes_are_stable(self, tmp_path):
        spec = tiny_spec()
        trials = self._trials()
        summary = summarize(trials, spec)
        a = tmp_path / "a.json"
        b = tmp_path / "b.json"
        write_summary_json(trials, summary, spec, a)
        write_summary_json(trials, summary, spec, b)
        assert a.read_bytes() == b.read_bytes()
