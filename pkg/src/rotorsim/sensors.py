"""IMU and motion-capture measurement models.

The accelerometer reports specific force (world acceleration plus gravity,
rotated into the sensor frame) plus a lever-arm centripetal term, slowly
drifting biases, and white noise. Motion capture reports pose and twist
with additive noise; its attitude perturbation is applied on the rotation
group (right multiplication by a small random rotation).
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import quat


def _cov3(value, name):
    """Accept a scalar std, per-axis stds, or a full 3x3 covariance."""
    a = np.asarray(value, dtype=float)
    if a.ndim == 0:
        cov = np.eye(3) * float(a) ** 2
    elif a.shape == (3,):
        cov = np.diag(a ** 2)
    elif a.shape == (3, 3):
        cov = a.copy()
    else:
        raise ValueError(f"{name} must be a scalar std, 3 stds, or a 3x3 covariance")
    if not np.allclose(cov, cov.T, atol=1e-12):
        raise ValueError(f"{name} covariance must be symmetric")
    w, v = np.linalg.eigh(cov)
    if np.any(w < -1e-12):
        raise ValueError(f"{name} covariance must be positive semidefinite")
    # factor L with L L^T = cov, valid for singular covariances too
    factor = v * np.sqrt(np.clip(w, 0.0, None))
    return cov, factor


@dataclass
class ImuConfig:
    """Accelerometer/gyro intrinsics and extrinsics.

    accel_noise/gyro_noise accept a scalar std, per-axis stds, or a full
    covariance. Walk intensities are per-axis bias random-walk strengths
    (units of the measurement per sqrt(s)). `rotation` maps body-frame
    vectors into the sensor frame; `lever_arm` is the sensor position in
    the body frame.
    """

    lever_arm: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    accel_noise: float = 0.1      # m/s^2
    gyro_noise: float = 0.01      # rad/s
    accel_walk: float = 1e-3      # m/s^2 per sqrt(s)
    gyro_walk: float = 1e-4       # rad/s per sqrt(s)
    rate: float = 500.0           # Hz

    def __post_init__(self):
        self.lever_arm = np.asarray(self.lever_arm, dtype=float)
        self.rotation = np.asarray(self.rotation, dtype=float)
        if self.rotation.shape != (3, 3):
            raise ValueError("rotation must be 3x3")
        if not np.allclose(self.rotation @ self.rotation.T, np.eye(3), atol=1e-9):
            raise ValueError("rotation must be orthonormal")
        if self.rate <= 0:
            raise ValueError("rate must be positive")
        self.accel_cov, self._accel_factor = _cov3(self.accel_noise, "accel_noise")
        self.gyro_cov, self._gyro_factor = _cov3(self.gyro_noise, "gyro_noise")


@dataclass
class MocapConfig:
    """Motion-capture noise levels; each accepts std(s) or a covariance."""

    pos_noise: float = 1e-3       # m
    vel_noise: float = 1e-2       # m/s
    att_noise: float = 2e-3      # rad, small-angle perturbation
    rate_noise: float = 1e-2      # rad/s
    rate: float = 100.0           # Hz

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError("rate must be positive")
        self.pos_cov, self._pos_factor = _cov3(self.pos_noise, "pos_noise")
        self.vel_cov, self._vel_factor = _cov3(self.vel_noise, "vel_noise")
        self.att_cov, self._att_factor = _cov3(self.att_noise, "att_noise")
        self.rate_cov, self._rate_factor = _cov3(self.rate_noise, "rate_noise")


@dataclass
class SensorMeasurement:
    """One tagged sensor sample; unused fields stay None."""

    t: float
    kind: str                     # "imu" or "mocap"
    accel: Optional[np.ndarray] = None
    gyro: Optional[np.ndarray] = None
    position: Optional[np.ndarray] = None
    velocity: Optional[np.ndarray] = None
    attitude: Optional[np.ndarray] = None
    body_rates: Optional[np.ndarray] = None


def imu_measure(state, accel_world, cfg, bias, rng, gravity=9.81):
    """Simulate one IMU sample.

    accel_world is the true translational acceleration (the same derivative
    the integrator evaluates, aero included). bias is the (accel, gyro)
    bias pair. Specific force is the world acceleration plus gravity,
    rotated into the sensor frame; the lever arm adds the centripetal term
    from the body rotation.
    """
    bias_a, bias_g = bias
    omega = state.body_rates
    specific = np.asarray(accel_world, dtype=float).copy()
    specific[2] += gravity
    accel = cfg.rotation @ quat.rotate_inverse(state.attitude, specific)
    accel += quat.cross(omega, quat.cross(omega, cfg.lever_arm))
    accel += bias_a + cfg._accel_factor @ rng.standard_normal(3)
    gyro = omega + bias_g + cfg._gyro_factor @ rng.standard_normal(3)
    return SensorMeasurement(t=state.t, kind="imu", accel=accel, gyro=gyro)


def mocap_measure(state, cfg, rng):
    """Simulate one motion-capture sample of pose and twist."""
    pos = state.position + cfg._pos_factor @ rng.standard_normal(3)
    vel = state.velocity + cfg._vel_factor @ rng.standard_normal(3)
    perturb = quat.from_rotvec(cfg._att_factor @ rng.standard_normal(3))
    att = quat.normalize(quat.multiply(state.attitude, perturb))
    rates = state.body_rates + cfg._rate_factor @ rng.standard_normal(3)
    return SensorMeasurement(t=state.t, kind="mocap", position=pos, velocity=vel,
                             attitude=att, body_rates=rates)


def bias_step(bias, walk, dt, rng):
    """Advance a bias random walk by dt: b + sqrt(dt) * walk * n."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    return bias + np.sqrt(dt) * walk * rng.standard_normal(np.shape(bias))
