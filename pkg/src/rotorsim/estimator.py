"""Wind estimation with an unscented Kalman filter, plus drag calibration.

The filter carries position, velocity, attitude, and the local wind vector.
Attitude lives in the mean as a quaternion; covariance and sigma-point
perturbations use a small-angle error state retracted onto the group, so
the covariance is 12x12 for the 13-element mean.

The process model is deliberately simpler than the simulated plant: the
commanded thrust (not the realized one), a first-order relaxation toward
the commanded attitude instead of rotational dynamics, parasitic-only drag
with fitted coefficients, and a random-walk wind. The accelerometer
measurement predicts specific force from that same commanded thrust and
drag term, which is what makes the wind observable; mismatch between
commanded and realized thrust (motor saturation) is therefore a real and
intentional failure mode. `use_true_thrust` switches the filter to the
realized thrust for ablation studies.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from . import quat

logger = logging.getLogger(__name__)

_E3 = np.array([0.0, 0.0, 1.0])

# error-state block layout
_POS = slice(0, 3)
_VEL = slice(3, 6)
_ATT = slice(6, 9)
_WIND = slice(9, 12)
DIM = 12


@dataclass
class UkfBelief:
    """Filter mean (attitude as quaternion) and 12x12 error-state covariance."""

    position: np.ndarray
    velocity: np.ndarray
    attitude: np.ndarray
    wind: np.ndarray
    cov: np.ndarray
    t: float = 0.0

    def copy(self):
        return UkfBelief(self.position.copy(), self.velocity.copy(),
                         self.attitude.copy(), self.wind.copy(),
                         self.cov.copy(), self.t)


@dataclass
class ProcessModelParams:
    """Believed vehicle constants and noise intensities for the filter.

    drag_coeffs is the fitted diagonal quadratic drag matrix. Q entries are
    continuous-time intensities: the discrete process noise added per
    predict is Q * dt with Q assembled block-diagonally from the per-axis
    entries below. attitude_time_constant sets the first-order relaxation
    toward the commanded attitude.
    """

    mass: float
    drag_coeffs: np.ndarray
    attitude_time_constant: float = 0.08
    gravity: float = 9.81
    q_position: float = 1e-8
    q_velocity: float = 0.3
    q_attitude: float = 0.05
    q_wind: float = 0.05
    alpha: float = 0.1
    beta: float = 2.0
    kappa: float = 0.0

    def __post_init__(self):
        self.drag_coeffs = np.asarray(self.drag_coeffs, dtype=float)
        if self.drag_coeffs.shape != (3,) or np.any(self.drag_coeffs < 0):
            raise ValueError("drag_coeffs must be 3 nonnegative entries")
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        if self.attitude_time_constant <= 0:
            raise ValueError("attitude_time_constant must be positive")

    @property
    def q_matrix(self):
        q = np.zeros((DIM, DIM))
        q[_POS, _POS] = self.q_position * np.eye(3)
        q[_VEL, _VEL] = self.q_velocity * np.eye(3)
        q[_ATT, _ATT] = self.q_attitude * np.eye(3)
        q[_WIND, _WIND] = self.q_wind * np.eye(3)
        return q


class SigmaPointError(RuntimeError):
    """Covariance square root failed; carries the offending covariance."""

    def __init__(self, message, cov):
        super().__init__(message)
        self.cov = cov


class DivergenceError(RuntimeError):
    """Filter produced non-finite values; carries the belief snapshot."""

    def __init__(self, message, belief):
        super().__init__(message)
        self.belief = belief


def _sqrt_psd(cov):
    """Covariance square root for sigma point generation.

    Cholesky on the symmetrized input when it is positive definite; falls
    back to an eigendecomposition root that tolerates semidefinite matrices.
    Either factor satisfies root @ root.T == cov, which is all the unscented
    transform requires.
    """
    sym = 0.5 * (cov + cov.T)
    try:
        return np.linalg.cholesky(sym)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(sym)
        if np.any(w < -1e-8):
            raise SigmaPointError("covariance has negative eigenvalues", cov) from None
        return v * np.sqrt(np.clip(w, 0.0, None))


def _weights(alpha, beta, kappa):
    lam = alpha**2 * (DIM + kappa) - DIM
    wm = np.full(2 * DIM + 1, 1.0 / (2.0 * (DIM + lam)))
    wc = wm.copy()
    wm[0] = lam / (DIM + lam)
    wc[0] = wm[0] + 1.0 - alpha**2 + beta
    return wm, wc, np.sqrt(DIM + lam)


def sigma_points(belief, alpha=0.1, beta=2.0, kappa=0.0):
    """Scaled sigma points with attitude perturbations on the group.

    Returns (positions, velocities, attitudes, winds, wm, wc) where each
    state array has 2 * DIM + 1 rows; row 0 is the mean.
    """
    wm, wc, spread = _weights(alpha, beta, kappa)
    root = spread * _sqrt_psd(belief.cov)
    deltas = np.concatenate([np.zeros((1, DIM)), root.T, -root.T], axis=0)

    positions = belief.position + deltas[:, _POS]
    velocities = belief.velocity + deltas[:, _VEL]
    attitudes = quat.multiply(belief.attitude, quat.from_rotvec(deltas[:, _ATT]))
    winds = belief.wind + deltas[:, _WIND]
    return positions, velocities, attitudes, winds, wm, wc


def _recombine(positions, velocities, attitudes, winds, wm, wc, extra_cov=None):
    """Weighted mean and covariance of propagated sigma points."""
    mean_pos = wm @ positions
    mean_vel = wm @ velocities
    mean_wind = wm @ winds
    # attitude mean: average the deviations from the propagated center point
    dev_att = quat.to_rotvec(quat.multiply(quat.conjugate(attitudes[0]), attitudes))
    mean_att = quat.normalize(quat.multiply(attitudes[0], quat.from_rotvec(wm @ dev_att)))

    dev = np.empty((positions.shape[0], DIM))
    dev[:, _POS] = positions - mean_pos
    dev[:, _VEL] = velocities - mean_vel
    dev[:, _ATT] = quat.to_rotvec(quat.multiply(quat.conjugate(mean_att), attitudes))
    dev[:, _WIND] = winds - mean_wind
    cov = (wc[:, None] * dev).T @ dev
    if extra_cov is not None:
        cov = cov + extra_cov
    cov = 0.5 * (cov + cov.T)
    return mean_pos, mean_vel, mean_att, mean_wind, cov, dev


def _process_accel(velocities, attitudes, winds, thrust, params):
    """Process-model acceleration: commanded thrust + parasitic drag + gravity."""
    v_air = quat.rotate_inverse(attitudes, velocities - winds)
    drag = -params.drag_coeffs * np.linalg.norm(v_air, axis=-1, keepdims=True) * v_air
    force = drag.copy()
    force[..., 2] += thrust
    return quat.rotate(attitudes, force) / params.mass - params.gravity * _E3


def predict(belief, control, dt, params):
    """Propagate the belief by dt under (commanded thrust, commanded attitude).

    Velocity integrates the process acceleration; position integrates
    velocity (trapezoidal in the acceleration); attitude relaxes toward the
    commanded attitude with the configured time constant; wind is a random
    walk. Process noise Q * dt is added after the unscented recombination.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    thrust_cmd, attitude_cmd = control
    positions, velocities, attitudes, winds, wm, wc = sigma_points(
        belief, params.alpha, params.beta, params.kappa)

    accel = _process_accel(velocities, attitudes, winds, thrust_cmd, params)
    new_pos = positions + velocities * dt + 0.5 * accel * dt**2
    new_vel = velocities + accel * dt
    # first-order relaxation toward the commanded attitude, exact over dt
    to_cmd = quat.to_rotvec(quat.multiply(quat.conjugate(attitudes), attitude_cmd))
    frac = 1.0 - np.exp(-dt / params.attitude_time_constant)
    new_att = quat.multiply(attitudes, quat.from_rotvec(frac * to_cmd))

    mean_pos, mean_vel, mean_att, mean_wind, cov, _ = _recombine(
        new_pos, new_vel, new_att, winds, wm, wc, extra_cov=params.q_matrix * dt)

    out = UkfBelief(mean_pos, mean_vel, mean_att, mean_wind, cov, belief.t + dt)
    if not (np.all(np.isfinite(cov)) and np.all(np.isfinite(mean_pos))
            and np.all(np.isfinite(mean_vel)) and np.all(np.isfinite(mean_att))
            and np.all(np.isfinite(mean_wind))):
        raise DivergenceError("filter state is no longer finite", out)
    return out


def _accel_measurement(velocities, attitudes, winds, thrust, params):
    """Predicted accelerometer reading: body-frame specific force."""
    v_air = quat.rotate_inverse(attitudes, velocities - winds)
    drag = -params.drag_coeffs * np.linalg.norm(v_air, axis=-1, keepdims=True) * v_air
    out = drag / params.mass
    out[..., 2] += thrust / params.mass
    return out


def _measurement_terms(belief, meas, meas_cov, params, control):
    """Shared machinery for update and innovation_stats."""
    positions, velocities, attitudes, winds, wm, wc = sigma_points(
        belief, params.alpha, params.beta, params.kappa)

    if meas.kind == "imu":
        if control is None:
            raise ValueError("accelerometer update requires the commanded thrust")
        thrust_cmd = control[0] if isinstance(control, tuple) else float(control)
        predicted = _accel_measurement(velocities, attitudes, winds, thrust_cmd, params)
        observed = np.asarray(meas.accel, dtype=float)
    elif meas.kind == "mocap":
        predicted = np.concatenate([
            positions,
            velocities,
            quat.to_rotvec(quat.multiply(quat.conjugate(belief.attitude), attitudes)),
        ], axis=-1)
        observed = np.concatenate([
            np.asarray(meas.position, dtype=float),
            np.asarray(meas.velocity, dtype=float),
            quat.to_rotvec(quat.multiply(quat.conjugate(belief.attitude), meas.attitude)),
        ])
    else:
        raise ValueError(f"unknown measurement kind {meas.kind!r}")

    mean_z = wm @ predicted
    dev_z = predicted - mean_z

    dev = np.empty((positions.shape[0], DIM))
    dev[:, _POS] = positions - belief.position
    dev[:, _VEL] = velocities - belief.velocity
    dev[:, _ATT] = quat.to_rotvec(quat.multiply(quat.conjugate(belief.attitude), attitudes))
    dev[:, _WIND] = winds - belief.wind

    innov_cov = (wc[:, None] * dev_z).T @ dev_z + np.asarray(meas_cov, dtype=float)
    cross_cov = (wc[:, None] * dev).T @ dev_z
    return observed - mean_z, innov_cov, cross_cov


def innovation_stats(belief, meas, meas_cov, params, control=None):
    """Innovation vector and covariance without applying the update."""
    innovation, innov_cov, _ = _measurement_terms(belief, meas, meas_cov, params, control)
    return innovation, innov_cov


def update(belief, meas, meas_cov, params, control=None):
    """Unscented measurement update for one IMU or mocap sample.

    IMU updates use the accelerometer only and need `control` (the same
    commanded thrust fed to predict) to form the predicted specific force;
    mocap updates observe position, velocity, and attitude directly. A
    singular innovation covariance skips the update and logs the event.
    """
    innovation, innov_cov, cross_cov = _measurement_terms(
        belief, meas, meas_cov, params, control)
    try:
        gain = np.linalg.solve(innov_cov.T, cross_cov.T).T
    except np.linalg.LinAlgError:
        logger.warning("singular innovation covariance at t=%.4f; update skipped", belief.t)
        return belief.copy()

    correction = gain @ innovation
    cov = belief.cov - gain @ innov_cov @ gain.T
    cov = 0.5 * (cov + cov.T)
    # floor tiny negative eigenvalues from roundoff
    w, v = np.linalg.eigh(cov)
    if w.min() < 0.0:
        cov = (v * np.clip(w, 1e-14, None)) @ v.T
        cov = 0.5 * (cov + cov.T)

    out = UkfBelief(
        position=belief.position + correction[_POS],
        velocity=belief.velocity + correction[_VEL],
        attitude=quat.normalize(quat.multiply(belief.attitude,
                                              quat.from_rotvec(correction[_ATT]))),
        wind=belief.wind + correction[_WIND],
        cov=cov,
        t=belief.t,
    )
    if not np.all(np.isfinite(correction)):
        raise DivergenceError("filter update is no longer finite", out)
    return out


class WindUkf:
    """Stateful wrapper that wires predict/update into the run loop."""

    def __init__(self, belief, params, mocap_cov, accel_cov, use_true_thrust=False):
        self.belief = belief
        self.params = params
        self.mocap_cov = np.asarray(mocap_cov, dtype=float)
        self.accel_cov = np.asarray(accel_cov, dtype=float)
        self.use_true_thrust = use_true_thrust
        self._control = None

    def set_control(self, thrust_cmd, attitude_cmd, true_thrust):
        thrust = true_thrust if self.use_true_thrust else thrust_cmd
        self._control = (float(thrust), np.asarray(attitude_cmd, dtype=float))

    def step(self, dt):
        if self._control is None:
            return
        self.belief = predict(self.belief, self._control, dt, self.params)

    def ingest(self, meas):
        if meas.kind == "imu":
            if self._control is None:
                return
            self.belief = update(self.belief, meas, self.accel_cov, self.params,
                                 control=self._control)
        else:
            self.belief = update(self.belief, meas, self.mocap_cov, self.params)


@dataclass
class CalibrationResult:
    """Fitted quadratic drag coefficients with fit diagnostics."""

    coeffs: np.ndarray          # (3,) clamped nonnegative
    raw_coeffs: np.ndarray      # (3,) unclamped least-squares solution
    residual_rms: np.ndarray    # (3,) m/s^2, after removing the fit
    excitation: np.ndarray      # (3,) rms of the quadratic regressor, m^2/s^2
    warnings: list = field(default_factory=list)

    @property
    def warning(self):
        return bool(self.warnings)


def calibrate_drag(table, mass, excitation_floor=0.15):
    """Fit diagonal quadratic drag coefficients from a logged flight.

    Uses ground-truth velocity/attitude and the commanded collective thrust
    from the results table: the accelerometer residual after removing the
    commanded thrust is regressed per axis against -|v_a| v_a / mass. The
    calibration flight is assumed wind-free, so the body airspeed comes
    straight from the true velocity. Rotor drag in the data is absorbed
    into the quadratic fit; that bias is what the estimator actually needs,
    since its process model only carries the quadratic term. Diagnostics
    flag axes with weak regressor excitation and fits that are not clearly
    above their own noise floor; coefficients are clamped nonnegative.
    """
    required = ["vel_x", "vel_y", "vel_z", "quat_w", "quat_x", "quat_y", "quat_z",
                "cmd_thrust", "imu_accel_x", "imu_accel_y", "imu_accel_z"]
    for name in required:
        if name not in table.columns:
            raise ValueError(f"results table is missing column {name!r}")

    accel = np.column_stack([table.columns["imu_accel_" + k] for k in "xyz"])
    good = np.all(np.isfinite(accel), axis=1)
    if good.sum() < 10:
        raise ValueError("not enough accelerometer samples to calibrate")

    vel = np.column_stack([table.columns["vel_" + k] for k in "xyz"])[good]
    att = np.column_stack([table.columns["quat_" + k] for k in "wxyz"])[good]
    thrust = table.columns["cmd_thrust"][good]
    accel = accel[good]

    v_air = quat.rotate_inverse(att, vel)
    regressor = -np.linalg.norm(v_air, axis=1, keepdims=True) * v_air / mass
    residual = accel.copy()
    residual[:, 2] -= thrust / mass

    coeffs = np.zeros(3)
    raw = np.zeros(3)
    resid_rms = np.zeros(3)
    excitation = np.sqrt(np.mean((mass * regressor) ** 2, axis=0))
    warnings = []
    for k, axis in enumerate("xyz"):
        gk = regressor[:, k]
        denom = gk @ gk
        if excitation[k] < excitation_floor or denom == 0.0:
            warnings.append(f"low excitation on {axis} (rms {excitation[k]:.3g})")
            raw[k] = 0.0
        else:
            raw[k] = (gk @ residual[:, k]) / denom
            if raw[k] < 0.0:
                warnings.append(f"negative fit on {axis} clamped to zero")
        coeffs[k] = max(raw[k], 0.0)
        resid_rms[k] = np.sqrt(np.mean((residual[:, k] - coeffs[k] * gk) ** 2))
        if denom > 0.0:
            # flag fits that are not clearly above their own noise floor
            coeff_std = resid_rms[k] / np.sqrt(denom)
            if raw[k] < 2.0 * coeff_std:
                warnings.append(f"weak drag signal on {axis} "
                                f"(fit {raw[k]:.3g} vs std {coeff_std:.3g})")
    return CalibrationResult(coeffs=coeffs, raw_coeffs=raw, residual_rms=resid_rms,
                             excitation=excitation, warnings=warnings)
