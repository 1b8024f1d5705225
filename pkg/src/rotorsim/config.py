"""Scenario and study definitions from YAML files.

One document describes one scenario (or one Monte Carlo study). The schema
is strict: unknown keys and missing required fields raise ConfigError with
the offending field path, so typos fail loudly instead of silently running
defaults. `schema_version` is required and must match SCHEMA_VERSION.

Estimator drag coefficients may be given explicitly or as the string
"auto", which requests a calibration flight before the scenario; resolve()
performs that flight and returns the flyable ScenarioConfig.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
import yaml

from . import control, harness, sensors, vehicle, wind
from .estimator import calibrate_drag
from .montecarlo import DEFAULT_RANGES, MonteCarloSpec

SCHEMA_VERSION = 1

_PRESETS = {
    "default": vehicle.default_params,
    "crazyflie": vehicle.crazyflie_params,
}


class ConfigError(ValueError):
    """Config problem tagged with the dotted path of the offending field."""

    def __init__(self, message, path=""):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)


class _Section:
    """Dict wrapper that tracks the field path and consumed keys."""

    def __init__(self, data, path=""):
        if not isinstance(data, dict):
            raise ConfigError("expected a mapping", path or "<document>")
        self._data = data
        self._path = path
        self._seen = set()

    def _child(self, key):
        return f"{self._path}.{key}" if self._path else key

    def has(self, key):
        return key in self._data

    def get(self, key, default=None, required=False):
        if key not in self._data:
            if required:
                raise ConfigError("required field is missing", self._child(key))
            return default
        self._seen.add(key)
        return self._data[key]

    def section(self, key, required=False):
        if key not in self._data and not required:
            return None
        return _Section(self.get(key, required=required), self._child(key))

    def scalar(self, key, kind, default=None, required=False, positive=False,
               nonnegative=False):
        value = self.get(key, default=default, required=required)
        if value is None:
            return None
        if kind is float and isinstance(value, int):
            value = float(value)
        if kind is int and isinstance(value, float) and value.is_integer():
            value = int(value)
        if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
            raise ConfigError(f"expected {kind.__name__}, got {value!r}", self._child(key))
        if positive and value <= 0:
            raise ConfigError("must be positive", self._child(key))
        if nonnegative and value < 0:
            raise ConfigError("must not be negative", self._child(key))
        return value

    def vector(self, key, length, default=None, required=False):
        value = self.get(key, default=default, required=required)
        if value is None:
            return None
        try:
            arr = np.asarray(value, dtype=float)
        except (TypeError, ValueError):
            raise ConfigError(f"expected {length} numbers", self._child(key)) from None
        if arr.shape != (length,):
            raise ConfigError(f"expected {length} numbers, got shape {arr.shape}",
                              self._child(key))
        return arr

    def noise(self, key, default=None):
        """Scalar std, per-axis stds, or 3x3 covariance; validated downstream."""
        value = self.get(key, default=default)
        if value is None:
            return default
        if isinstance(value, (int, float)):
            return float(value)
        try:
            return np.asarray(value, dtype=float)
        except (TypeError, ValueError):
            raise ConfigError("expected a std, 3 stds, or 3x3 covariance",
                              self._child(key)) from None

    def finish(self):
        extra = set(self._data) - self._seen
        if extra:
            key = sorted(extra)[0]
            raise ConfigError("unknown field", self._child(key))


def load_file(path):
    """Parse a YAML scenario/study file into a plain dict."""
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as err:
        mark = getattr(err, "problem_mark", None)
        where = f" (line {mark.line + 1}, column {mark.column + 1})" if mark else ""
        raise ConfigError(f"YAML parse error{where}: {err}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a mapping")
    return doc


def _check_version(sec):
    version = sec.scalar("schema_version", int, required=True)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version} "
                          f"(this build reads {SCHEMA_VERSION})", "schema_version")


def _build_vehicle(sec):
    if sec is None:
        return vehicle.default_params()
    name = sec.scalar("preset", str, default="default")
    if name not in _PRESETS:
        raise ConfigError(f"unknown preset {name!r} (choices: {sorted(_PRESETS)})",
                          sec._child("preset"))
    base = _PRESETS[name]()
    overrides = {}
    for field_name in ("mass", "thrust_coeff", "drag_torque_coeff", "flapping_coeff",
                       "motor_time_constant", "rotor_speed_max", "gravity"):
        value = sec.scalar(field_name, float, positive=(field_name != "flapping_coeff"),
                           nonnegative=(field_name == "flapping_coeff"))
        if value is not None:
            overrides[field_name] = value
    for field_name in ("parasitic_drag", "rotor_drag"):
        value = sec.vector(field_name, 3)
        if value is not None:
            overrides[field_name] = value
    inertia_diag = sec.vector("inertia_diag", 3)
    if inertia_diag is not None:
        overrides["inertia"] = np.diag(inertia_diag)
    sec.finish()
    if not overrides:
        return base
    fields = dict(
        mass=base.mass, inertia=base.inertia,
        rotor_positions=base.rotor_positions, rotor_directions=base.rotor_directions,
        thrust_coeff=base.thrust_coeff, drag_torque_coeff=base.drag_torque_coeff,
        parasitic_drag=base.parasitic_drag, rotor_drag=base.rotor_drag,
        flapping_coeff=base.flapping_coeff, motor_time_constant=base.motor_time_constant,
        rotor_speed_max=base.rotor_speed_max, gravity=base.gravity,
    )
    fields.update(overrides)
    return vehicle.VehicleParams(**fields)


def _build_trajectory(sec):
    if sec is None:
        return control.HoverTrajectory()
    kind = sec.scalar("kind", str, required=True)
    if kind == "hover":
        point = sec.vector("point", 3, default=np.zeros(3))
        yaw = sec.scalar("yaw", float, default=0.0)
        sec.finish()
        return control.HoverTrajectory(point, yaw)
    if kind == "circle":
        radius = sec.scalar("radius", float, required=True, positive=True)
        speed = sec.scalar("speed", float, required=True, positive=True)
        center = sec.vector("center", 3, default=np.zeros(3))
        ramp = sec.scalar("ramp_time", float, default=3.0, positive=True)
        sec.finish()
        return control.CircleTrajectory(radius, speed, center, ramp)
    if kind == "figure_eight":
        amplitude = sec.vector("amplitude", 3, default=np.array([1.2, 0.8, 0.4]))
        base_freq = sec.scalar("base_frequency", float, default=0.13, positive=True)
        chirp = sec.scalar("chirp", float, default=0.008, nonnegative=True)
        ramp = sec.scalar("ramp_time", float, default=3.0, positive=True)
        sec.finish()
        return control.FigureEightTrajectory(amplitude, base_freq, chirp, ramp)
    raise ConfigError(f"unknown trajectory kind {kind!r} "
                      "(choices: hover, circle, figure_eight)", sec._child("kind"))


def _build_wind(sec, scenario_seed):
    if sec is None:
        return wind.ConstantWind((0.0, 0.0, 0.0))
    kind = sec.scalar("kind", str, required=True)
    if kind == "none":
        sec.finish()
        return wind.ConstantWind((0.0, 0.0, 0.0))
    if kind == "constant":
        vector = sec.vector("vector", 3, required=True)
        sec.finish()
        return wind.ConstantWind(vector)
    if kind == "step":
        before = sec.vector("before", 3, required=True)
        after = sec.vector("after", 3, required=True)
        t_step = sec.scalar("t_step", float, required=True, nonnegative=True)
        sec.finish()
        return wind.StepWind(before, after, t_step)
    if kind == "sinusoid":
        mean = sec.vector("mean", 3, default=np.zeros(3))
        amplitude = sec.vector("amplitude", 3, required=True)
        frequency = sec.scalar("frequency", float, required=True, positive=True)
        phase = sec.scalar("phase", float, default=0.0)
        sec.finish()
        return wind.SinusoidWind(mean, amplitude, frequency, phase)
    if kind == "dryden":
        mean = sec.vector("mean", 3, required=True)
        intensity = sec.get("intensity")
        if intensity is not None:
            sec._seen.add("intensity")
            if not isinstance(intensity, (int, float, str)):
                raise ConfigError("expected a speed, or one of light/moderate/severe",
                                  sec._child("intensity"))
        altitude = sec.scalar("altitude", float, default=50.0, positive=True)
        wind_seed = sec.scalar("seed", int)
        if wind_seed is None:
            # deterministic but distinct from the sensor streams
            wind_seed = scenario_seed + 0x5D41
        sec.finish()
        return wind.DrydenWind(mean, intensity=intensity, altitude=altitude,
                               seed=wind_seed)
    raise ConfigError(f"unknown wind kind {kind!r} "
                      "(choices: none, constant, step, sinusoid, dryden)",
                      sec._child("kind"))


def _build_imu(sec):
    if sec is None:
        return sensors.ImuConfig()
    kwargs = {}
    for key in ("accel_noise", "gyro_noise"):
        value = sec.noise(key)
        if value is not None:
            kwargs[key] = value
    for key in ("accel_walk", "gyro_walk"):
        value = sec.scalar(key, float, nonnegative=True)
        if value is not None:
            kwargs[key] = value
    rate = sec.scalar("rate", float, positive=True)
    if rate is not None:
        kwargs["rate"] = rate
    lever = sec.vector("lever_arm", 3)
    if lever is not None:
        kwargs["lever_arm"] = lever
    sec.finish()
    try:
        return sensors.ImuConfig(**kwargs)
    except ValueError as err:
        raise ConfigError(str(err), sec._path) from None


def _build_mocap(sec):
    if sec is None:
        return sensors.MocapConfig()
    kwargs = {}
    for key in ("pos_noise", "vel_noise", "att_noise", "rate_noise"):
        value = sec.noise(key)
        if value is not None:
            kwargs[key] = value
    rate = sec.scalar("rate", float, positive=True)
    if rate is not None:
        kwargs["rate"] = rate
    sec.finish()
    try:
        return sensors.MocapConfig(**kwargs)
    except ValueError as err:
        raise ConfigError(str(err), sec._path) from None


def _build_gains(sec):
    if sec is None:
        return None
    kwargs = {}
    for key in ("k_pos", "k_vel", "k_att", "k_rate"):
        value = sec.get(key)
        if value is None:
            raise ConfigError("all four gain fields are required when gains are given",
                              sec._child(key))
        sec._seen.add(key)
        kwargs[key] = value
    sec.finish()
    try:
        return control.GainSet(**kwargs)
    except ValueError as err:
        raise ConfigError(str(err), sec._path) from None


@dataclass
class ScenarioPlan:
    """A flyable scenario plus an optional calibration flight before it.

    When drag_coeffs was "auto" the calibration field holds the still-air
    flight to fit them from; resolve() runs it and fills the estimator in.
    """

    scenario: harness.ScenarioConfig
    calibration: Optional[harness.ScenarioConfig] = None
    name: str = "scenario"


def _build_estimator(sec, params, plan_seed):
    """Returns (EstimatorConfig or None, calibration ScenarioConfig or None)."""
    if sec is None:
        return None, None
    if not sec.scalar("enabled", bool, default=True):
        sec._seen.update(sec._data.keys())
        sec.finish()
        return None, None

    kwargs = {}
    calibration = None
    drag = sec.get("drag_coeffs", default="auto")
    if isinstance(drag, str):
        if drag != "auto":
            raise ConfigError('drag_coeffs must be 3 numbers or "auto"',
                              sec._child("drag_coeffs"))
        cal_sec = sec.section("calibration")
        cal_duration = 15.0
        cal_rate = None
        if cal_sec is not None:
            cal_duration = cal_sec.scalar("duration", float, default=15.0, positive=True)
            cal_rate = cal_sec.scalar("control_rate", float, positive=True)
            cal_sec.finish()
        calibration = harness.ScenarioConfig(
            vehicle=params,
            trajectory=control.FigureEightTrajectory(),
            duration=cal_duration,
            seed=plan_seed + 0xCA1,
            control_rate=cal_rate if cal_rate is not None else 500.0,
        )
        kwargs["drag_coeffs"] = np.zeros(3)  # placeholder until resolve()
    else:
        arr = sec.vector("drag_coeffs", 3)
        if np.any(arr < 0):
            raise ConfigError("drag coefficients must be 3 nonnegative numbers",
                              sec._child("drag_coeffs"))
        kwargs["drag_coeffs"] = arr

    mass = sec.scalar("mass", float, positive=True)
    if mass is not None:
        kwargs["mass"] = mass
    for key in ("attitude_time_constant", "q_velocity", "q_attitude", "q_wind",
                "accel_noise_floor", "initial_wind_std"):
        value = sec.scalar(key, float, positive=(key == "attitude_time_constant"),
                           nonnegative=(key != "attitude_time_constant"))
        if value is not None:
            kwargs[key] = value
    use_true = sec.scalar("use_true_thrust", bool, default=False)
    kwargs["use_true_thrust"] = use_true
    sec.finish()
    return harness.EstimatorConfig(**kwargs), calibration


def build_plan(doc, seed=None, aero=None):
    """Validate a scenario document and construct the ScenarioPlan.

    seed and aero, when given, override the document (CLI flags).
    """
    root = _Section(doc)
    _check_version(root)
    name = root.scalar("name", str, default="scenario")
    root.scalar("description", str, default="")
    duration = root.scalar("duration", float, required=True, positive=True)
    doc_seed = root.scalar("seed", int, default=0)
    scenario_seed = doc_seed if seed is None else int(seed)
    control_rate = root.scalar("control_rate", float, default=500.0, positive=True)
    aero_enabled = root.scalar("aero", bool, default=True)
    if aero is not None:
        aero_enabled = bool(aero)
    accel_limit = root.scalar("accel_limit", float, default=35.0, positive=True)

    params = _build_vehicle(root.section("vehicle"))
    trajectory = _build_trajectory(root.section("trajectory"))
    wind_profile = _build_wind(root.section("wind"), scenario_seed)
    imu = _build_imu(root.section("sensors_imu"))
    mocap = _build_mocap(root.section("sensors_mocap"))
    gains = _build_gains(root.section("gains"))
    est_config, calibration = _build_estimator(root.section("estimator"),
                                               params, scenario_seed)
    root.finish()

    raw = dict(doc)
    raw["seed"] = scenario_seed
    raw["aero"] = aero_enabled
    scenario = harness.ScenarioConfig(
        vehicle=params, trajectory=trajectory, duration=duration,
        seed=scenario_seed, gains=gains, wind_profile=wind_profile,
        imu=imu, mocap=mocap, estimator=est_config,
        control_rate=control_rate, aero_enabled=aero_enabled,
        accel_limit=accel_limit, raw=raw,
    )
    return ScenarioPlan(scenario=scenario, calibration=calibration, name=name)


def resolve(plan):
    """Run the calibration flight, if any, and return the flyable scenario.

    Returns (scenario, calibration_result_or_None). Raises RuntimeError if
    the calibration flight itself fails.
    """
    if plan.calibration is None:
        return plan.scenario, None
    table = harness.run(plan.calibration)
    if table.metadata["failure"] is not None:
        raise RuntimeError(f"calibration flight failed: {table.metadata['failure']}")
    cal = calibrate_drag(table, plan.scenario.vehicle.mass)
    plan.scenario.estimator.drag_coeffs = cal.coeffs
    return plan.scenario, cal


def build_montecarlo(doc, seed=None, trials=None):
    """Validate a Monte Carlo study document and construct the spec."""
    root = _Section(doc)
    _check_version(root)
    root.scalar("name", str, default="montecarlo")
    root.scalar("description", str, default="")
    sec = root.section("montecarlo", required=True)
    kwargs = {}
    n_trials = sec.scalar("trials", int, default=50, positive=True)
    kwargs["n_trials"] = n_trials if trials is None else int(trials)
    doc_seed = sec.scalar("seed", int, default=0)
    kwargs["seed"] = doc_seed if seed is None else int(seed)
    rng_sec = sec.section("ranges")
    if rng_sec is not None:
        ranges = dict(DEFAULT_RANGES)
        for key in DEFAULT_RANGES:
            value = rng_sec.vector(key, 2)
            if value is not None:
                ranges[key] = (float(value[0]), float(value[1]))
        rng_sec.finish()
        kwargs["ranges"] = ranges
    wind_range = sec.vector("wind_speed_range", 2)
    if wind_range is not None:
        kwargs["wind_speed_range"] = (float(wind_range[0]), float(wind_range[1]))
    for key in ("calibration_duration", "evaluation_duration", "control_rate",
                "rmse_window_start"):
        value = sec.scalar(key, float, positive=True)
        if value is not None:
            kwargs[key] = value
    threshold = sec.scalar("rmse_threshold", float, positive=True)
    if threshold is not None:
        kwargs["rmse_threshold"] = threshold
    sec.finish()
    root.finish()
    try:
        return MonteCarloSpec(**kwargs)
    except ValueError as err:
        raise ConfigError(str(err), "montecarlo") from None
