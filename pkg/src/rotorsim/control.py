"""Trajectory generators and the geometric tracking controller.

Trajectories produce flat outputs (position through jerk plus yaw); the
controller turns tracking error into a collective thrust along the body z
axis and a body moment from attitude/rate error on the rotation group. The
mixer in `actuators` converts that wrench into rotor-speed commands.
"""

from dataclasses import dataclass, field

import numpy as np

from . import quat

_E3 = np.array([0.0, 0.0, 1.0])


@dataclass
class FlatOutput:
    """Desired position and derivatives plus yaw at one instant."""

    position: np.ndarray
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    acceleration: np.ndarray = field(default_factory=lambda: np.zeros(3))
    jerk: np.ndarray = field(default_factory=lambda: np.zeros(3))
    yaw: float = 0.0
    yaw_rate: float = 0.0


@dataclass
class GainSet:
    """Per-axis controller gains; all entries must be positive."""

    k_pos: np.ndarray
    k_vel: np.ndarray
    k_att: np.ndarray
    k_rate: np.ndarray

    def __post_init__(self):
        for name in ("k_pos", "k_vel", "k_att", "k_rate"):
            value = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (3,)).copy()
            if np.any(value <= 0) or not np.all(np.isfinite(value)):
                raise ValueError(f"{name} entries must be positive and finite")
            setattr(self, name, value)


def default_gains(params):
    """Gains scaled from mass and inertia; tuned on the bundled presets."""
    j = np.diag(params.inertia)
    return GainSet(k_pos=40.0 * params.mass, k_vel=14.0 * params.mass,
                   k_att=280.0 * j, k_rate=33.0 * j)


def hover_flat_output(point, yaw=0.0):
    """Flat output pinned to a fixed point."""
    return FlatOutput(position=np.asarray(point, dtype=float), yaw=yaw)


def _smoothstep(u):
    """Quintic smoothstep and its first three derivatives on [0, 1]."""
    u = min(max(u, 0.0), 1.0)
    s = u**3 * (10.0 - 15.0 * u + 6.0 * u**2)
    ds = 30.0 * u**2 * (1.0 - 2.0 * u + u**2)
    dds = 60.0 * u * (1.0 - 3.0 * u + 2.0 * u**2)
    ddds = 60.0 * (1.0 - 6.0 * u + 6.0 * u**2)
    return s, ds, dds, ddds


def circle_trajectory(radius, speed, center, t, ramp_time=3.0):
    """Horizontal circle flown at constant speed with a smooth spin-up.

    The angular rate ramps from zero along a quintic smoothstep over
    ramp_time, after which the path has exactly constant speed and
    centripetal acceleration speed^2 / radius. Starts at rest at
    center + (radius, 0, 0).
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if speed < 0:
        raise ValueError("speed must be nonnegative")
    center = np.asarray(center, dtype=float)
    rate = speed / radius
    if t < ramp_time:
        u = t / ramp_time
        s, ds, dds, _ = _smoothstep(u)
        # phase rate ramps as rate * smoothstep; phase is its integral
        phase = rate * ramp_time * (2.5 * u**4 - 3.0 * u**5 + u**6)
        dphase = rate * s
        ddphase = rate * ds / ramp_time
        dddphase = rate * dds / ramp_time**2
    else:
        phase = rate * (t - 0.5 * ramp_time)
        dphase = rate
        ddphase = 0.0
        dddphase = 0.0

    cp, sp = np.cos(phase), np.sin(phase)
    radial = np.array([cp, sp, 0.0])
    tangent = np.array([-sp, cp, 0.0])
    position = center + radius * radial
    velocity = radius * dphase * tangent
    acceleration = radius * (ddphase * tangent - dphase**2 * radial)
    jerk = radius * ((dddphase - dphase**3) * tangent - 3.0 * dphase * ddphase * radial)
    return FlatOutput(position=position, velocity=velocity,
                      acceleration=acceleration, jerk=jerk)


class CircleTrajectory:
    """Callable wrapper around circle_trajectory for use in the run loop."""

    def __init__(self, radius, speed, center=(0.0, 0.0, 0.0), ramp_time=3.0):
        self.radius = radius
        self.speed = speed
        self.center = np.asarray(center, dtype=float)
        self.ramp_time = ramp_time

    def __call__(self, t):
        return circle_trajectory(self.radius, self.speed, self.center, t, self.ramp_time)


class HoverTrajectory:
    def __init__(self, point=(0.0, 0.0, 0.0), yaw=0.0):
        self.point = np.asarray(point, dtype=float)
        self.yaw = yaw

    def __call__(self, t):
        return hover_flat_output(self.point, self.yaw)


class FigureEightTrajectory:
    """Lissajous figure-eight with a vertical bob and a slow speed sweep.

    x sweeps at the base phase, y at twice the phase (tracing an eight),
    z bobs at half the phase so all body axes see airspeed. The phase
    accelerates linearly (chirp) to cover a range of speeds, and an
    amplitude envelope brings the path up from rest. Rich enough in every
    axis to condition drag-coefficient fits.
    """

    def __init__(self, amplitude=(1.2, 0.8, 0.4), base_frequency=0.13,
                 chirp=0.008, center=(0.0, 0.0, 0.0), ramp_time=3.0):
        self.amplitude = np.asarray(amplitude, dtype=float)
        self.base_frequency = float(base_frequency)
        self.chirp = float(chirp)
        self.center = np.asarray(center, dtype=float)
        self.ramp_time = float(ramp_time)
        if self.base_frequency <= 0:
            raise ValueError("base_frequency must be positive")
        if self.ramp_time <= 0:
            raise ValueError("ramp_time must be positive")

    def __call__(self, t):
        two_pi = 2.0 * np.pi
        phase = two_pi * (self.base_frequency * t + 0.5 * self.chirp * t * t)
        dphase = two_pi * (self.base_frequency + self.chirp * t)
        ddphase = two_pi * self.chirp

        pos = np.empty(3)
        vel = np.empty(3)
        acc = np.empty(3)
        jrk = np.empty(3)
        for axis, mult in enumerate((1.0, 2.0, 0.5)):
            a = self.amplitude[axis]
            p, dp, ddp = mult * phase, mult * dphase, mult * ddphase
            sp, cp = np.sin(p), np.cos(p)
            pos[axis] = a * sp
            vel[axis] = a * cp * dp
            acc[axis] = a * (cp * ddp - sp * dp**2)
            jrk[axis] = a * (-3.0 * sp * dp * ddp - cp * dp**3)

        s, ds, dds, ddds = _smoothstep(t / self.ramp_time)
        if t >= self.ramp_time:
            ds = dds = ddds = 0.0
        else:
            ds /= self.ramp_time
            dds /= self.ramp_time**2
            ddds /= self.ramp_time**3
        position = self.center + s * pos
        velocity = s * vel + ds * pos
        acceleration = s * acc + 2.0 * ds * vel + dds * pos
        jerk = s * jrk + 3.0 * ds * acc + 3.0 * dds * vel + ddds * pos
        return FlatOutput(position=position, velocity=velocity,
                          acceleration=acceleration, jerk=jerk)


class SE3Controller:
    """Geometric tracking controller on the rotation group.

    Produces (collective thrust, body moment) from tracking error with
    acceleration feedforward, and keeps the attitude command it derived
    (used by the wind estimator's process model). The commanded
    acceleration is capped at accel_limit to bound the demanded tilt when
    disturbances overwhelm the vehicle; near-free-fall thrust demands fall
    back to the last valid attitude at minimum thrust.
    """

    def __init__(self, params, gains=None, accel_limit=35.0):
        self.params = params
        self.gains = gains if gains is not None else default_gains(params)
        self.accel_limit = float(accel_limit)
        self.attitude_command = quat.identity()
        self.thrust_command = params.mass * params.gravity

    def __call__(self, state, flat):
        p = self.params
        g = self.gains
        err_pos = state.position - flat.position
        err_vel = state.velocity - flat.velocity

        force_des = (-g.k_pos * err_pos - g.k_vel * err_vel
                     + p.mass * (flat.acceleration + p.gravity * _E3))
        norm = np.linalg.norm(force_des)
        cap = p.mass * self.accel_limit
        if norm > cap:
            force_des *= cap / norm
            norm = cap

        rot = quat.to_matrix(state.attitude)
        if norm < 1e-2 * p.mass * p.gravity:
            # thrust demand nearly vanishes: attitude from force direction
            # is undefined, hold the last command at minimum thrust
            thrust = p.thrust_coeff * p.n_rotors * p.rotor_speed_min**2
            self.thrust_command = thrust
            return thrust, self._attitude_moment(state, rot, np.zeros(3))

        b3_des = force_des / norm
        heading = np.array([np.cos(flat.yaw), np.sin(flat.yaw), 0.0])
        b2_dir = quat.cross(b3_des, heading)
        b2_norm = np.linalg.norm(b2_dir)
        if b2_norm < 1e-6:
            rot_des = quat.to_matrix(self.attitude_command)
        else:
            b2_des = b2_dir / b2_norm
            b1_des = quat.cross(b2_des, b3_des)
            rot_des = np.column_stack([b1_des, b2_des, b3_des])
            self.attitude_command = quat.normalize(quat.from_matrix(rot_des))

        thrust = float(force_des @ rot[:, 2])
        self.thrust_command = thrust

        # desired body rates from the jerk feedforward (thrust-direction
        # rate projected on the body axes) plus the yaw-rate component
        force_rate = p.mass * flat.jerk
        omega_des = np.array([
            -(force_rate @ rot_des[:, 1]) / norm,
            (force_rate @ rot_des[:, 0]) / norm,
            flat.yaw_rate * rot_des[2, 2],
        ])
        return thrust, self._attitude_moment(state, rot, omega_des, rot_des)

    def _attitude_moment(self, state, rot, omega_des, rot_des=None):
        if rot_des is None:
            rot_des = quat.to_matrix(self.attitude_command)
        g = self.gains
        err_mat = rot_des.T @ rot - rot.T @ rot_des
        err_att = 0.5 * np.array([err_mat[2, 1], err_mat[0, 2], err_mat[1, 0]])
        err_rate = state.body_rates - rot.T @ rot_des @ omega_des
        omega = state.body_rates
        return (-g.k_att * err_att - g.k_rate * err_rate
                + quat.cross(omega, self.params.inertia @ omega))


def se3_control(state, flat, gains, params):
    """Single controller evaluation (stateless convenience wrapper)."""
    return SE3Controller(params, gains)(state, flat)
