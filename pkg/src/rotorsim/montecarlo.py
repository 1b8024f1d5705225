"""Monte Carlo study of wind-estimation accuracy over randomized vehicles.

Each trial draws a vehicle (mass and drag coefficients uniform over the
configured ranges) and a mean wind, flies a calibration pattern in still
air to fit drag coefficients, then evaluates the wind filter hovering in
turbulence with that fitted model. Per-trial seeds derive from the master
seed and the trial index alone, so parallel and sequential execution
produce identical results.
"""

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np
from scipy import stats

from . import control, harness, vehicle, wind
from .estimator import calibrate_drag

# drawn-coefficient ranges for the randomized vehicles
DEFAULT_RANGES = {
    "mass": (0.375, 0.9375),          # kg
    "c_dx": (0.0, 1e-3),              # parasitic drag, N/(m/s)^2
    "c_dy": (0.0, 1e-3),
    "c_dz": (0.0, 2e-2),
    "k_d": (0.0, 1.19e-3),            # in-plane rotor drag, N/(m/s)/speed
    "k_z": (0.0, 2.32e-3),            # vertical rotor drag
}


@dataclass
class MonteCarloSpec:
    """Study definition: how many vehicles to draw and from which ranges."""

    n_trials: int = 50
    ranges: dict = field(default_factory=lambda: dict(DEFAULT_RANGES))
    # mean horizontal wind, m/s; the 2 m/s floor keeps wind observable in
    # every trial (near calm the filter's zero initialization is already
    # correct, so such trials score well regardless of the drawn vehicle)
    wind_speed_range: tuple = (2.0, 5.0)
    seed: int = 0
    calibration_duration: float = 15.0
    evaluation_duration: float = 30.0
    control_rate: float = 200.0
    rmse_threshold: float = 0.5            # m/s, for the success fraction
    rmse_window_start: float = 5.0

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValueError("n_trials must be at least 1")
        for key in DEFAULT_RANGES:
            if key not in self.ranges:
                raise ValueError(f"missing parameter range {key!r}")
            lo, hi = self.ranges[key]
            if not (0.0 <= lo <= hi) and key != "mass":
                raise ValueError(f"range for {key!r} must satisfy 0 <= lo <= hi")
            if key == "mass" and not (0.0 < lo <= hi):
                raise ValueError("mass range must be positive")
        lo, hi = self.wind_speed_range
        if not (0.0 <= lo <= hi):
            raise ValueError("wind_speed_range must satisfy 0 <= lo <= hi")


@dataclass
class TrialResult:
    """One trial's draws, calibration outcome, and evaluation metrics."""

    index: int
    params: dict                       # drawn values, by name
    wind_speed: float
    wind_direction: float              # heading of the mean wind, rad
    drag_level: float                  # min of normalized rotor-drag draws
    calibrated: Optional[dict] = None  # fitted coeffs + diagnostics
    rmse: Optional[dict] = None        # per-axis and norm wind RMSE, m/s
    failure: Optional[dict] = None

    @property
    def ok(self):
        return self.failure is None and self.rmse is not None

    def to_dict(self):
        return asdict(self)


def _draw(spec, index):
    """Deterministic parameter draw for one trial."""
    rng = np.random.default_rng(np.random.SeedSequence((spec.seed, index)))
    draws = {}
    for key in ("mass", "c_dx", "c_dy", "c_dz", "k_d", "k_z"):
        lo, hi = spec.ranges[key]
        draws[key] = float(rng.uniform(lo, hi))
    speed = float(rng.uniform(*spec.wind_speed_range))
    heading = float(rng.uniform(0.0, 2.0 * np.pi))
    cal_seed = int(rng.integers(2**63))
    eval_seed = int(rng.integers(2**63))
    wind_seed = int(rng.integers(2**63))
    return draws, speed, heading, cal_seed, eval_seed, wind_seed


def _drag_level(draws, ranges):
    """Scalar ranking of how much usable drag a trial drew, 0 to 1.

    Wind is observed through the drag force, and over these ranges the
    rotor-drag terms dominate it by orders of magnitude (parasitic drag is
    quadratic in airspeed with tiny coefficients). k_d covers the two
    horizontal axes and k_z the vertical one, and the wind-vector error is
    bottlenecked by the least observable axis, so the level is the minimum
    of the two range-normalized rotor-drag draws.
    """
    levels = []
    for key in ("k_d", "k_z"):
        lo, hi = ranges[key]
        width = hi - lo
        levels.append((draws[key] - lo) / width if width > 0 else 0.0)
    return float(min(levels))


def _trial_vehicle(draws):
    """Vehicle with drawn mass and drag; inertia scales with mass."""
    base = vehicle.default_params()
    scale = draws["mass"] / base.mass
    return vehicle.VehicleParams(
        mass=draws["mass"],
        inertia=base.inertia * scale,
        rotor_positions=base.rotor_positions,
        rotor_directions=base.rotor_directions,
        thrust_coeff=base.thrust_coeff,
        drag_torque_coeff=base.drag_torque_coeff,
        parasitic_drag=np.array([draws["c_dx"], draws["c_dy"], draws["c_dz"]]),
        rotor_drag=np.array([draws["k_d"], draws["k_d"], draws["k_z"]]),
        flapping_coeff=base.flapping_coeff,
        motor_time_constant=base.motor_time_constant,
        rotor_speed_max=base.rotor_speed_max,
        gravity=base.gravity,
    )


def run_trial(spec, index):
    """Calibrate and evaluate one randomized vehicle; never raises."""
    draws, speed, heading, cal_seed, eval_seed, wind_seed = _draw(spec, index)
    result = TrialResult(index=index, params=draws, wind_speed=speed,
                         wind_direction=heading,
                         drag_level=_drag_level(draws, spec.ranges))
    params = _trial_vehicle(draws)

    cal_config = harness.ScenarioConfig(
        vehicle=params,
        trajectory=control.FigureEightTrajectory(),
        duration=spec.calibration_duration,
        seed=cal_seed,
        control_rate=spec.control_rate,
    )
    cal_table = harness.run(cal_config)
    if cal_table.metadata["failure"] is not None:
        result.failure = {"stage": "calibration", **cal_table.metadata["failure"]}
        return result
    try:
        cal = calibrate_drag(cal_table, params.mass)
    except ValueError as err:
        result.failure = {"stage": "calibration", "t": None, "cause": str(err)}
        return result
    result.calibrated = {
        "coeffs": cal.coeffs.tolist(),
        "raw_coeffs": cal.raw_coeffs.tolist(),
        "residual_rms": cal.residual_rms.tolist(),
        "excitation": cal.excitation.tolist(),
        "warnings": list(cal.warnings),
    }

    mean_wind = speed * np.array([np.cos(heading), np.sin(heading), 0.0])
    eval_config = harness.ScenarioConfig(
        vehicle=params,
        trajectory=control.HoverTrajectory((0.0, 0.0, 0.0)),
        duration=spec.evaluation_duration,
        seed=eval_seed,
        wind_profile=wind.DrydenWind(mean_wind, seed=wind_seed),
        estimator=harness.EstimatorConfig(drag_coeffs=cal.coeffs, mass=params.mass),
        control_rate=spec.control_rate,
    )
    table = harness.run(eval_config)
    if table.metadata["failure"] is not None:
        result.failure = {"stage": "evaluation", **table.metadata["failure"]}
        return result
    try:
        result.rmse = harness.wind_rmse(table, spec.rmse_window_start)
    except ValueError as err:
        result.failure = {"stage": "evaluation", "t": None, "cause": str(err)}
    return result


def _decile_split(trials, n_total):
    """Lowest/highest drag-level deciles among successful trials."""
    n_decile = max(1, n_total // 10)
    ranked = sorted(trials, key=lambda tr: tr.drag_level)
    low = ranked[:n_decile]
    high = ranked[-n_decile:]
    return low, high


def summarize(trials, spec):
    """Aggregate trial metrics; failed trials are counted but excluded."""
    ok = [tr for tr in trials if tr.ok]
    failed = [tr for tr in trials if not tr.ok]
    summary = {
        "n_trials": len(trials),
        "n_ok": len(ok),
        "n_failed": len(failed),
        "failures": [{"index": tr.index, **(tr.failure or {})} for tr in failed],
        "rmse_threshold": spec.rmse_threshold,
    }
    if not ok:
        return summary

    norms = np.array([tr.rmse["norm"] for tr in ok])
    summary["rmse_median"] = float(np.median(norms))
    summary["rmse_mean"] = float(np.mean(norms))
    summary["rmse_quartiles"] = [float(q) for q in np.percentile(norms, [25, 50, 75])]
    summary["fraction_below_threshold"] = float(np.mean(norms <= spec.rmse_threshold))

    low, high = _decile_split(ok, len(trials))
    low_rmse = [tr.rmse["norm"] for tr in low]
    high_rmse = [tr.rmse["norm"] for tr in high]
    decile = {
        "n_per_decile": len(low_rmse),
        "low_drag_rmse": low_rmse,
        "high_drag_rmse": high_rmse,
        "low_drag_median": float(np.median(low_rmse)),
        "high_drag_median": float(np.median(high_rmse)),
    }
    if len(low_rmse) >= 2 and len(high_rmse) >= 2:
        # one-sided: low-drag vehicles should estimate wind worse
        test = stats.mannwhitneyu(low_rmse, high_rmse, alternative="greater",
                                  method="exact")
        decile["rank_test_u"] = float(test.statistic)
        decile["rank_test_p"] = float(test.pvalue)
    summary["drag_deciles"] = decile
    return summary


def monte_carlo(spec, parallel=1):
    """Run the study; returns (trials, summary). parallel > 1 uses processes."""
    indices = range(spec.n_trials)
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            trials = list(pool.map(run_trial, [spec] * spec.n_trials, indices))
    else:
        trials = [run_trial(spec, i) for i in indices]
    trials.sort(key=lambda tr: tr.index)
    return trials, summarize(trials, spec)


def write_trials_csv(trials, path):
    """One row per trial: draws, drag level, RMSE, failure flag."""
    cols = ["index", "mass", "c_dx", "c_dy", "c_dz", "k_d", "k_z",
            "wind_speed", "wind_direction", "drag_level",
            "rmse_x", "rmse_y", "rmse_z", "rmse_norm",
            "calibration_warnings", "failed"]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(cols) + "\n")
        for tr in trials:
            row = [str(tr.index)]
            row += [repr(float(tr.params[k]))
                    for k in ("mass", "c_dx", "c_dy", "c_dz", "k_d", "k_z")]
            row += [repr(float(tr.wind_speed)), repr(float(tr.wind_direction)),
                    repr(float(tr.drag_level))]
            if tr.rmse is not None:
                row += [repr(float(tr.rmse[k])) for k in ("x", "y", "z", "norm")]
            else:
                row += ["", "", "", ""]
            n_warn = len(tr.calibrated["warnings"]) if tr.calibrated else 0
            row.append(str(n_warn))
            row.append("0" if tr.ok else "1")
            fh.write(",".join(row) + "\n")


def write_summary_json(trials, summary, spec, path):
    doc = {
        "schema_version": 1,
        "spec": {
            "n_trials": spec.n_trials,
            "ranges": {k: list(v) for k, v in spec.ranges.items()},
            "wind_speed_range": list(spec.wind_speed_range),
            "seed": spec.seed,
            "calibration_duration": spec.calibration_duration,
            "evaluation_duration": spec.evaluation_duration,
            "control_rate": spec.control_rate,
        },
        "summary": summary,
        "trials": [tr.to_dict() for tr in trials],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
