"""Scenario composition and the fixed-rate simulation loop.

run() wires trajectory -> controller -> mixer -> plant integration ->
sensors -> estimator at a fixed control rate and returns a ResultsTable
with one row per control step. Every column exists for every run (absent
signals are NaN) so downstream analysis never branches on configuration.
"""

import hashlib
import json
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import __version__ as _version
from . import actuators, control, estimator, sensors, vehicle, wind
from .integration import IntegrationError
from .vehicle import VehicleState


def _stream(seed, label):
    """Independent, named random stream derived from the scenario seed."""
    import zlib
    return np.random.default_rng(
        np.random.SeedSequence((int(seed), zlib.crc32(label.encode()))))


@dataclass
class EstimatorConfig:
    """Wind-filter wiring for a scenario.

    drag_coeffs: fitted diagonal drag for the process model ("auto" in the
    file format resolves to a calibration flight before the scenario; here
    it must already be a 3-vector). Initial belief comes from the true
    state with the configured initial wind standard deviation.
    """

    drag_coeffs: np.ndarray = field(default_factory=lambda: np.zeros(3))
    mass: Optional[float] = None          # believed mass; defaults to true mass
    attitude_time_constant: float = 0.08
    q_velocity: float = 0.3
    q_attitude: float = 0.05
    q_wind: float = 0.05
    accel_noise_floor: float = 0.05       # added to the accel update noise, m/s^2
    initial_wind_std: float = 2.0
    use_true_thrust: bool = False

    def __post_init__(self):
        self.drag_coeffs = np.asarray(self.drag_coeffs, dtype=float)


@dataclass
class ScenarioConfig:
    """Everything one simulation needs; seed fixes every stochastic stream."""

    vehicle: vehicle.VehicleParams
    trajectory: Callable[[float], control.FlatOutput]
    duration: float
    seed: int = 0
    gains: Optional[control.GainSet] = None
    wind_profile: object = None           # defaults to still air
    imu: sensors.ImuConfig = field(default_factory=sensors.ImuConfig)
    mocap: sensors.MocapConfig = field(default_factory=sensors.MocapConfig)
    estimator: Optional[EstimatorConfig] = None
    control_rate: float = 500.0
    aero_enabled: bool = True
    accel_limit: float = 35.0
    rtol: float = 1e-6
    atol: float = 1e-8
    start_position: Optional[np.ndarray] = None
    raw: Optional[dict] = None            # config-file echo for metadata

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.control_rate <= 0:
            raise ValueError("control_rate must be positive")
        if self.wind_profile is None:
            self.wind_profile = wind.ConstantWind((0.0, 0.0, 0.0))
        if self.gains is None:
            self.gains = control.default_gains(self.vehicle)
        if self.start_position is None:
            self.start_position = np.asarray(self.trajectory(0.0).position, dtype=float)
        else:
            self.start_position = np.asarray(self.start_position, dtype=float)


class ResultsTable:
    """Column store for one run: uniform timestamps plus metadata."""

    def __init__(self, columns, metadata):
        self.columns = columns
        self.metadata = metadata

    @property
    def t(self):
        return self.columns["t"]

    def column_names(self):
        return list(self.columns.keys())

    def __len__(self):
        return len(self.columns["t"])

    def to_csv(self, path):
        """Write the table as CSV: header row, first column t, NaN as empty."""
        names = self.column_names()
        arrays = [self.columns[n] for n in names]
        with open(path, "w", newline="") as fh:
            fh.write(",".join(names) + "\n")
            for i in range(len(self)):
                fields = []
                for a in arrays:
                    x = a[i]
                    fields.append("" if np.isnan(x) else repr(float(x)))
                fh.write(",".join(fields) + "\n")

    def sidecar(self, path, extra=None):
        """Write the JSON metadata sidecar next to the CSV."""
        doc = dict(self.metadata)
        if extra:
            doc.update(extra)
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)!r}")


def config_hash(raw):
    """Stable hash of a scenario dictionary (None when built in code)."""
    if raw is None:
        return None
    blob = json.dumps(raw, sort_keys=True, default=_json_default)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _column_layout(n_rotors, estimator_on):
    names = ["t"]
    for prefix in ("pos", "vel"):
        names += [f"{prefix}_{k}" for k in "xyz"]
    names += [f"quat_{k}" for k in "wxyz"]
    names += [f"rate_{k}" for k in "xyz"]
    names += [f"rotor_{i}" for i in range(n_rotors)]
    for prefix in ("des_pos", "des_vel", "des_acc"):
        names += [f"{prefix}_{k}" for k in "xyz"]
    names += ["des_yaw", "cmd_thrust"]
    names += [f"cmd_moment_{k}" for k in "xyz"]
    names += [f"cmd_rotor_{i}" for i in range(n_rotors)]
    names += ["cmd_saturated"]
    names += [f"cmd_quat_{k}" for k in "wxyz"]
    names += [f"imu_accel_{k}" for k in "xyz"]
    names += [f"imu_gyro_{k}" for k in "xyz"]
    for prefix in ("mocap_pos", "mocap_vel"):
        names += [f"{prefix}_{k}" for k in "xyz"]
    names += [f"mocap_quat_{k}" for k in "wxyz"]
    names += [f"mocap_rate_{k}" for k in "xyz"]
    names += [f"wind_{k}" for k in "xyz"]
    for prefix in ("est_pos", "est_vel"):
        names += [f"{prefix}_{k}" for k in "xyz"]
    names += [f"est_quat_{k}" for k in "wxyz"]
    names += [f"est_wind_{k}" for k in "xyz"]
    names += [f"est_wind_std_{k}" for k in "xyz"]
    del estimator_on  # schema is identical either way by design
    return names


def _mocap_cov(cfg):
    cov = np.zeros((9, 9))
    cov[0:3, 0:3] = cfg.pos_cov
    cov[3:6, 3:6] = cfg.vel_cov
    cov[6:9, 6:9] = cfg.att_cov
    return cov


def run(config, plant_integrator=None):
    """Simulate one scenario and return the complete ResultsTable.

    plant_integrator optionally replaces the adaptive integrator (same
    signature as vehicle.integrate minus tolerances); used by tests to
    compare integration schemes under an identical control loop.
    Integration failure or state blow-up ends the run early: the table is
    truncated at the failure and metadata carries a failure record.
    """
    params = config.vehicle
    dt = 1.0 / config.control_rate
    n_steps = int(round(config.duration * config.control_rate))
    n_rotors = params.n_rotors

    imu_every = max(1, int(round(config.control_rate / config.imu.rate)))
    mocap_every = max(1, int(round(config.control_rate / config.mocap.rate)))

    rng_imu = _stream(config.seed, "imu")
    rng_mocap = _stream(config.seed, "mocap")

    controller = control.SE3Controller(params, config.gains, config.accel_limit)
    mixer = actuators.Mixer(params)
    state = VehicleState.rest(params, position=config.start_position)
    bias_a = np.zeros(3)
    bias_g = np.zeros(3)

    ukf = None
    if config.estimator is not None:
        est_cfg = config.estimator
        proc = estimator.ProcessModelParams(
            mass=est_cfg.mass if est_cfg.mass is not None else params.mass,
            drag_coeffs=est_cfg.drag_coeffs,
            attitude_time_constant=est_cfg.attitude_time_constant,
            gravity=params.gravity,
            q_velocity=est_cfg.q_velocity,
            q_attitude=est_cfg.q_attitude,
            q_wind=est_cfg.q_wind,
        )
        cov0 = np.zeros((estimator.DIM, estimator.DIM))
        cov0[0:3, 0:3] = 1e-6 * np.eye(3)
        cov0[3:6, 3:6] = 1e-4 * np.eye(3)
        cov0[6:9, 6:9] = 1e-6 * np.eye(3)
        cov0[9:12, 9:12] = est_cfg.initial_wind_std**2 * np.eye(3)
        belief = estimator.UkfBelief(
            position=state.position.copy(), velocity=state.velocity.copy(),
            attitude=state.attitude.copy(), wind=np.zeros(3), cov=cov0, t=0.0)
        accel_cov = config.imu.accel_cov + est_cfg.accel_noise_floor**2 * np.eye(3)
        ukf = estimator.WindUkf(belief, proc, _mocap_cov(config.mocap), accel_cov,
                                use_true_thrust=est_cfg.use_true_thrust)

    names = _column_layout(n_rotors, ukf is not None)
    data = {name: np.full(n_steps, np.nan) for name in names}
    failure = None
    wall_start = time.perf_counter()

    for k in range(n_steps):
        t = k * dt
        if not np.all(np.isfinite(state.as_array())):
            failure = {"t": t, "cause": "state blow-up (non-finite component)"}
            n_steps = k
            break

        flat = config.trajectory(t)
        thrust_des, moment_des = controller(state, flat)
        cmd = mixer.mix(thrust_des, moment_des)
        wind_now = config.wind_profile.sample(t, state.position)

        deriv = vehicle.dynamics(state, cmd.rotor_speeds, wind_now, params,
                                 config.aero_enabled)

        imu_meas = None
        mocap_meas = None
        if k % imu_every == 0:
            imu_meas = sensors.imu_measure(state, deriv.acceleration, config.imu,
                                           (bias_a, bias_g), rng_imu, params.gravity)
            imu_dt = dt * imu_every
            bias_a = sensors.bias_step(bias_a, config.imu.accel_walk, imu_dt, rng_imu)
            bias_g = sensors.bias_step(bias_g, config.imu.gyro_walk, imu_dt, rng_imu)
        if k % mocap_every == 0:
            mocap_meas = sensors.mocap_measure(state, config.mocap, rng_mocap)

        if ukf is not None:
            try:
                if k > 0:
                    ukf.step(dt)
                if mocap_meas is not None:
                    ukf.ingest(mocap_meas)
                if imu_meas is not None:
                    ukf.ingest(imu_meas)
            except (estimator.DivergenceError, estimator.SigmaPointError) as err:
                failure = {"t": t, "cause": f"estimator failure: {err}"}
                n_steps = k
                break

        row = data
        row["t"][k] = t
        for j, key in enumerate("xyz"):
            row[f"pos_{key}"][k] = state.position[j]
            row[f"vel_{key}"][k] = state.velocity[j]
            row[f"rate_{key}"][k] = state.body_rates[j]
            row[f"des_pos_{key}"][k] = flat.position[j]
            row[f"des_vel_{key}"][k] = flat.velocity[j]
            row[f"des_acc_{key}"][k] = flat.acceleration[j]
            row[f"cmd_moment_{key}"][k] = moment_des[j]
            row[f"wind_{key}"][k] = wind_now[j]
        for j, key in enumerate("wxyz"):
            row[f"quat_{key}"][k] = state.attitude[j]
            row[f"cmd_quat_{key}"][k] = controller.attitude_command[j]
        for i in range(n_rotors):
            row[f"rotor_{i}"][k] = state.rotor_speeds[i]
            row[f"cmd_rotor_{i}"][k] = cmd.rotor_speeds[i]
        row["des_yaw"][k] = flat.yaw
        row["cmd_thrust"][k] = thrust_des
        row["cmd_saturated"][k] = float(cmd.saturated.sum())
        if imu_meas is not None:
            for j, key in enumerate("xyz"):
                row[f"imu_accel_{key}"][k] = imu_meas.accel[j]
                row[f"imu_gyro_{key}"][k] = imu_meas.gyro[j]
        if mocap_meas is not None:
            for j, key in enumerate("xyz"):
                row[f"mocap_pos_{key}"][k] = mocap_meas.position[j]
                row[f"mocap_vel_{key}"][k] = mocap_meas.velocity[j]
                row[f"mocap_rate_{key}"][k] = mocap_meas.body_rates[j]
            for j, key in enumerate("wxyz"):
                row[f"mocap_quat_{key}"][k] = mocap_meas.attitude[j]
        if ukf is not None:
            belief = ukf.belief
            wind_std = np.sqrt(np.clip(np.diag(belief.cov)[9:12], 0.0, None))
            for j, key in enumerate("xyz"):
                row[f"est_pos_{key}"][k] = belief.position[j]
                row[f"est_vel_{key}"][k] = belief.velocity[j]
                row[f"est_wind_{key}"][k] = belief.wind[j]
                row[f"est_wind_std_{key}"][k] = wind_std[j]
            for j, key in enumerate("wxyz"):
                row[f"est_quat_{key}"][k] = belief.attitude[j]

        if ukf is not None:
            true_thrust = params.thrust_coeff * float(state.rotor_speeds @ state.rotor_speeds)
            ukf.set_control(thrust_des, controller.attitude_command, true_thrust)

        try:
            if plant_integrator is not None:
                state = plant_integrator(state, cmd.rotor_speeds, wind_now, params, dt,
                                         aero_enabled=config.aero_enabled)
            else:
                state = vehicle.integrate(state, cmd.rotor_speeds, wind_now, params, dt,
                                          rtol=config.rtol, atol=config.atol,
                                          aero_enabled=config.aero_enabled)
        except IntegrationError as err:
            failure = {"t": t, "cause": f"integration failure: {err}"}
            n_steps = k + 1
            break

    wall = time.perf_counter() - wall_start
    if failure is not None:
        data = {name: arr[:n_steps] for name, arr in data.items()}

    metadata = {
        "schema_version": 1,
        "package_version": _version,
        "seed": int(config.seed),
        "control_rate": config.control_rate,
        "duration": config.duration,
        "aero_enabled": bool(config.aero_enabled),
        "config_hash": config_hash(config.raw),
        "config": config.raw,
        "columns": names,
        "failure": failure,
        "wall_time_s": wall,
        "final_state": None if n_steps == 0 else {
            "position": state.position, "velocity": state.velocity,
            "attitude": state.attitude, "body_rates": state.body_rates,
            "rotor_speeds": state.rotor_speeds, "t": state.t,
        },
    }
    return ResultsTable(data, metadata)


def rmse(estimate, truth, t=None, window_start=5.0):
    """Per-axis and norm RMSE over the post-convergence window.

    estimate and truth are (N, 3) aligned series; rows before window_start
    (by the t column, or index * spacing when t is None) are excluded.
    """
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimate.shape != truth.shape:
        raise ValueError("estimate and truth must have the same shape")
    if t is None:
        mask = np.ones(len(estimate), dtype=bool)
        if window_start > 0:
            raise ValueError("window_start > 0 requires timestamps")
    else:
        mask = np.asarray(t, dtype=float) >= window_start
    err = estimate[mask] - truth[mask]
    err = err[np.all(np.isfinite(err), axis=1)]
    if err.size == 0:
        raise ValueError("empty evaluation window")
    per_axis = np.sqrt(np.mean(err**2, axis=0))
    norm = float(np.sqrt(np.sum(per_axis**2)))
    return {"x": float(per_axis[0]), "y": float(per_axis[1]),
            "z": float(per_axis[2]), "norm": norm}


def wind_rmse(table, window_start=5.0):
    """Wind-estimate RMSE straight from a results table."""
    est = np.column_stack([table.columns["est_wind_" + k] for k in "xyz"])
    truth = np.column_stack([table.columns["wind_" + k] for k in "xyz"])
    return rmse(est, truth, table.t, window_start)
