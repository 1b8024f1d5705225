"""Rigid-body multirotor dynamics with motor lag and aerodynamic wrenches.

State layout (packed vector of length 13 + n_rotors):

    [0:3]   position, world frame (m)
    [3:6]   velocity, world frame (m/s)
    [6:10]  attitude quaternion, scalar first, body to world
    [10:13] angular velocity, body frame (rad/s)
    [13:]   rotor speeds (rad/s)

Rotor speeds respond to commands through a first-order lag and are
integrated jointly with the rigid-body states.
"""

from dataclasses import dataclass, field

import numpy as np

from . import aero, quat
from .integration import rk45


def _as_float_array(x, shape, name):
    a = np.asarray(x, dtype=float)
    if a.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {a.shape}")
    return a


@dataclass
class VehicleParams:
    """Physical constants of one multirotor.

    rotor_positions are body-frame offsets of each rotor hub from the center
    of mass; rotor_directions hold +1 for counterclockwise rotors (viewed
    from above) and -1 for clockwise ones. thrust_coeff maps squared rotor
    speed to thrust along body z, drag_torque_coeff maps it to the reaction
    torque about body z.
    """

    mass: float
    inertia: np.ndarray             # (3, 3) kg m^2
    rotor_positions: np.ndarray     # (n, 3) m
    rotor_directions: np.ndarray    # (n,) +-1
    thrust_coeff: float             # N s^2
    drag_torque_coeff: float        # N m s^2
    parasitic_drag: np.ndarray      # (3,) N s^2 m^-2, frame drag diag
    rotor_drag: np.ndarray          # (3,) N s m^-1 rad^-1, per-rotor drag diag
    flapping_coeff: float           # N m s^2 rad^-1 m^-1
    motor_time_constant: float      # s
    rotor_speed_min: float = 0.0    # rad/s
    rotor_speed_max: float = 1800.0
    gravity: float = 9.81

    def __post_init__(self):
        self.rotor_positions = np.atleast_2d(np.asarray(self.rotor_positions, dtype=float))
        n = self.rotor_positions.shape[0]
        if self.rotor_positions.shape != (n, 3):
            raise ValueError(f"rotor_positions must have shape (n, 3), got {self.rotor_positions.shape}")
        self.inertia = _as_float_array(self.inertia, (3, 3), "inertia")
        self.rotor_directions = _as_float_array(self.rotor_directions, (n,), "rotor_directions")
        self.parasitic_drag = _as_float_array(self.parasitic_drag, (3,), "parasitic_drag")
        self.rotor_drag = _as_float_array(self.rotor_drag, (3,), "rotor_drag")

        if not (np.isfinite(self.mass) and self.mass > 0):
            raise ValueError("mass must be positive and finite")
        if not np.allclose(self.inertia, self.inertia.T, rtol=1e-8, atol=1e-12):
            raise ValueError("inertia must be symmetric")
        if np.any(np.linalg.eigvalsh(self.inertia) <= 0):
            raise ValueError("inertia must be positive definite")
        if not np.all(np.abs(self.rotor_directions) == 1.0):
            raise ValueError("rotor_directions entries must be +1 or -1")
        if not self.thrust_coeff > 0:
            raise ValueError("thrust_coeff must be positive")
        if self.drag_torque_coeff < 0:
            raise ValueError("drag_torque_coeff must be nonnegative")
        if np.any(self.parasitic_drag < 0) or np.any(self.rotor_drag < 0):
            raise ValueError("drag coefficients must be nonnegative")
        if self.flapping_coeff < 0:
            raise ValueError("flapping_coeff must be nonnegative")
        if not self.motor_time_constant > 0:
            raise ValueError("motor_time_constant must be positive")
        if not 0 <= self.rotor_speed_min < self.rotor_speed_max:
            raise ValueError("need 0 <= rotor_speed_min < rotor_speed_max")
        if self.gravity < 0:
            raise ValueError("gravity must be nonnegative")

        self._inertia_inv = np.linalg.inv(self.inertia)
        # Moment per squared rotor speed: thrust lever arms plus reaction torque.
        r = self.rotor_positions
        self._moment_matrix = np.empty((3, n))
        self._moment_matrix[0] = self.thrust_coeff * r[:, 1]
        self._moment_matrix[1] = -self.thrust_coeff * r[:, 0]
        self._moment_matrix[2] = self.drag_torque_coeff * self.rotor_directions
        # Wrench allocation [thrust; moments] per squared rotor speed.
        self._allocation = np.vstack([np.full(n, self.thrust_coeff), self._moment_matrix])

    @property
    def n_rotors(self):
        return self.rotor_positions.shape[0]

    @property
    def allocation_matrix(self):
        """(4, n) map from squared rotor speeds to [thrust, mx, my, mz]."""
        return self._allocation

    def hover_rotor_speed(self):
        """Rotor speed at which total thrust balances weight."""
        return float(np.sqrt(self.mass * self.gravity / (self.n_rotors * self.thrust_coeff)))


@dataclass
class VehicleState:
    """Vehicle state at time t. attitude is a scalar-first unit quaternion."""

    position: np.ndarray
    velocity: np.ndarray
    attitude: np.ndarray
    body_rates: np.ndarray
    rotor_speeds: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        self.velocity = np.asarray(self.velocity, dtype=float)
        self.attitude = np.asarray(self.attitude, dtype=float)
        self.body_rates = np.asarray(self.body_rates, dtype=float)
        self.rotor_speeds = np.asarray(self.rotor_speeds, dtype=float)

    def as_array(self):
        y = np.empty(13 + self.rotor_speeds.shape[0])
        y[0:3] = self.position
        y[3:6] = self.velocity
        y[6:10] = self.attitude
        y[10:13] = self.body_rates
        y[13:] = self.rotor_speeds
        return y

    @classmethod
    def from_array(cls, y, t=0.0):
        y = np.asarray(y, dtype=float)
        return cls(position=y[0:3].copy(), velocity=y[3:6].copy(),
                   attitude=y[6:10].copy(), body_rates=y[10:13].copy(),
                   rotor_speeds=y[13:].copy(), t=float(t))

    @classmethod
    def rest(cls, params, position=(0.0, 0.0, 0.0), t=0.0):
        """Hover-consistent rest state: level attitude, rotors at hover speed."""
        eta = params.hover_rotor_speed()
        return cls(position=np.asarray(position, dtype=float), velocity=np.zeros(3),
                   attitude=quat.identity(), body_rates=np.zeros(3),
                   rotor_speeds=np.full(params.n_rotors, eta), t=t)


@dataclass
class StateDerivative:
    velocity: np.ndarray        # (3,)
    acceleration: np.ndarray    # (3,)
    attitude_rate: np.ndarray   # (4,) quaternion rate
    angular_accel: np.ndarray   # (3,)
    rotor_accel: np.ndarray     # (n,)


def control_wrench(rotor_speeds, params):
    """Body-frame (force, moment) produced by the rotors alone."""
    eta_sq = np.asarray(rotor_speeds, dtype=float) ** 2
    force = np.array([0.0, 0.0, params.thrust_coeff * eta_sq.sum()])
    moment = params._moment_matrix @ eta_sq
    return force, moment


def _derivative(y, rotor_commands, wind, params, aero_enabled=True):
    """Packed-state derivative. Hot path: inputs assumed finite."""
    v = y[3:6]
    q = y[6:10]
    q = q / np.sqrt(q @ q)
    omega = y[10:13]
    eta = y[13:]

    eta_sq = eta * eta
    if aero_enabled:
        v_air = quat.rotate_inverse(q, v - wind)
        f_body, aero_moment = aero.force_and_moment(v_air, omega, eta, params)
    else:
        f_body = np.zeros(3)
        aero_moment = 0.0
    f_body[2] += params.thrust_coeff * eta_sq.sum()
    accel = quat.rotate(q, f_body)
    accel /= params.mass
    accel[2] -= params.gravity

    j_omega = params.inertia @ omega
    torque = params._moment_matrix @ eta_sq + aero_moment
    torque[0] -= omega[1] * j_omega[2] - omega[2] * j_omega[1]
    torque[1] -= omega[2] * j_omega[0] - omega[0] * j_omega[2]
    torque[2] -= omega[0] * j_omega[1] - omega[1] * j_omega[0]

    dy = np.empty_like(y)
    dy[0:3] = v
    dy[3:6] = accel
    dy[6:10] = quat.derivative(q, omega)
    dy[10:13] = params._inertia_inv @ torque
    dy[13:] = (rotor_commands - eta) / params.motor_time_constant
    return dy


_FIELDS = ("position", "velocity", "attitude", "body_rates", "rotor_speeds")


def dynamics(state, rotor_commands, wind, params, aero_enabled=True):
    """Continuous-time derivative of the full vehicle state.

    rotor_commands are target rotor speeds (rad/s); wind is the world-frame
    wind velocity at the vehicle. With aero_enabled False the aerodynamic
    wrench is zeroed. Rejects non-finite inputs by field name.
    """
    for name in _FIELDS:
        if not np.all(np.isfinite(getattr(state, name))):
            raise ValueError(f"non-finite value in state.{name}")
    rotor_commands = np.asarray(rotor_commands, dtype=float)
    wind = np.asarray(wind, dtype=float)
    if rotor_commands.shape != (params.n_rotors,):
        raise ValueError(f"rotor_commands must have shape ({params.n_rotors},)")
    if not np.all(np.isfinite(rotor_commands)):
        raise ValueError("non-finite value in rotor_commands")
    if wind.shape != (3,) or not np.all(np.isfinite(wind)):
        raise ValueError("wind must be a finite 3-vector")

    dy = _derivative(state.as_array(), rotor_commands, wind, params, aero_enabled)
    return StateDerivative(velocity=dy[0:3], acceleration=dy[3:6],
                           attitude_rate=dy[6:10], angular_accel=dy[10:13],
                           rotor_accel=dy[13:])


def integrate(state, rotor_commands, wind, params, dt, rtol=1e-6, atol=1e-8,
              aero_enabled=True):
    """Advance the vehicle by dt seconds with adaptive Runge-Kutta.

    Rotor commands and wind are held constant over the interval (the caller
    refreshes both at its own control rate); wind may be a 3-vector or a
    callable (t, position) -> 3-vector, evaluated once at the start of the
    interval. Commands are clipped to the rotor speed limits up front, so
    first-order rotor dynamics cannot leave the admissible speed box from an
    in-range start; the returned speeds are clamped once at the end of the
    interval and the attitude quaternion is renormalized.
    """
    rotor_commands = np.clip(np.asarray(rotor_commands, dtype=float),
                             params.rotor_speed_min, params.rotor_speed_max)
    if callable(wind):
        wind = wind(state.t, state.position)
    wind = np.asarray(wind, dtype=float)

    def f(t, y):
        return _derivative(y, rotor_commands, wind, params, aero_enabled)

    y1 = rk45(f, state.t, state.as_array(), state.t + dt, rtol=rtol, atol=atol)
    np.clip(y1[13:], params.rotor_speed_min, params.rotor_speed_max, out=y1[13:])
    y1[6:10] /= np.sqrt(y1[6:10] @ y1[6:10])
    return VehicleState.from_array(y1, state.t + dt)


def default_params():
    """Medium quadrotor in a symmetric X layout (arm length 0.166 m)."""
    arm = 0.166 / np.sqrt(2.0)
    return VehicleParams(
        mass=0.656,
        inertia=np.diag([4.0e-3, 4.0e-3, 7.0e-3]),
        rotor_positions=np.array([[arm, arm, 0.0],
                                  [-arm, arm, 0.0],
                                  [-arm, -arm, 0.0],
                                  [arm, -arm, 0.0]]),
        rotor_directions=np.array([1.0, -1.0, 1.0, -1.0]),
        thrust_coeff=1.61e-6,
        drag_torque_coeff=2.1e-8,
        parasitic_drag=np.array([5.0e-4, 5.0e-4, 1.0e-2]),
        rotor_drag=np.array([1.0e-4, 1.0e-4, 2.0e-4]),
        flapping_coeff=1.0e-6,
        motor_time_constant=0.05,
        rotor_speed_min=0.0,
        rotor_speed_max=1800.0,
    )


def crazyflie_params():
    """Palm-size quadrotor preset (30 g class, 46 mm arms)."""
    arm = 0.046 / np.sqrt(2.0)
    return VehicleParams(
        mass=0.032,
        inertia=np.diag([1.6e-5, 1.6e-5, 2.9e-5]),
        rotor_positions=np.array([[arm, arm, 0.0],
                                  [-arm, arm, 0.0],
                                  [-arm, -arm, 0.0],
                                  [arm, -arm, 0.0]]),
        rotor_directions=np.array([1.0, -1.0, 1.0, -1.0]),
        thrust_coeff=2.3e-8,
        drag_torque_coeff=7.8e-11,
        parasitic_drag=np.array([1.0e-5, 1.0e-5, 3.0e-5]),
        rotor_drag=np.array([2.5e-6, 2.5e-6, 5.0e-6]),
        flapping_coeff=4.0e-9,
        motor_time_constant=0.03,
        rotor_speed_min=0.0,
        rotor_speed_max=2800.0,
    )
