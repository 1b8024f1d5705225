"""Aerodynamic wrench model: parasitic drag, rotor drag, blade flapping.

All forces and moments are expressed in the body frame and depend on the
relative airspeed of the frame and of each rotor hub. Each drag term opposes
the relative motion at its point of application, so the total drag power
(translational plus rotational) is never positive; the translational part
f_a . v_a alone is nonpositive whenever the body rates are zero.
"""

from dataclasses import dataclass

import numpy as np

from . import quat

_B3 = np.array([0.0, 0.0, 1.0])


@dataclass
class AeroWrench:
    """Total aerodynamic force/moment with the per-rotor breakdown retained.

    force = parasitic_drag + sum of rotor_drag rows;
    moment = sum of flapping rows + sum of r_i x rotor_drag_i.
    """

    force: np.ndarray          # (3,) body frame, N
    moment: np.ndarray         # (3,) body frame, N m
    parasitic_drag: np.ndarray # (3,)
    rotor_drag: np.ndarray     # (n, 3) per-rotor drag force
    flapping_moment: np.ndarray  # (n, 3) per-rotor flapping moment


def body_airspeed(velocity, wind, attitude):
    """Relative airspeed in the body frame: R^T (v - w)."""
    return quat.rotate_inverse(attitude, np.asarray(velocity, float) - np.asarray(wind, float))


def rotor_airspeed(body_air, body_rates, rotor_position):
    """Airspeed at a rotor hub, including the rigid-body rotation term."""
    return np.asarray(body_air, float) + np.cross(body_rates, rotor_position)


def parasitic_drag(body_air, drag_coeffs):
    """Quadratic frame drag: -diag(c) * ||v_a|| * v_a."""
    v = np.asarray(body_air, float)
    return -np.asarray(drag_coeffs, float) * np.linalg.norm(v) * v


def rotor_drag(rotor_air, rotor_speed, drag_coeffs):
    """Rotor drag, bilinear in rotor speed and hub airspeed: -diag(k) * eta * v."""
    return -np.asarray(drag_coeffs, float) * rotor_speed * np.asarray(rotor_air, float)


def flapping_moment(rotor_air, rotor_speed, flapping_coeff):
    """Longitudinal blade-flapping moment: -k_flap * eta * (v x b3)."""
    return -flapping_coeff * rotor_speed * np.cross(np.asarray(rotor_air, float), _B3)


def total_aero_wrench(state, params, wind=(0.0, 0.0, 0.0)):
    """Aerodynamic wrench for a full vehicle state (see AeroWrench)."""
    v_a = body_airspeed(state.velocity, wind, state.attitude)
    return wrench_from_body_airspeed(v_a, state.body_rates, state.rotor_speeds, params)


def _terms_from_body_airspeed(body_air, body_rates, rotor_speeds, params):
    """Core wrench terms; cross products are written out columnwise because
    np.cross dominates the profile otherwise and this sits on the
    integrator's hot path."""
    v_a = np.asarray(body_air, float)
    eta = np.asarray(rotor_speeds, float)
    r = params.rotor_positions
    wx, wy, wz = body_rates

    d_p = -params.parasitic_drag * np.sqrt(v_a @ v_a) * v_a

    v_rot = np.empty_like(r)                                  # v_a + omega x r_i
    v_rot[:, 0] = v_a[0] + wy * r[:, 2] - wz * r[:, 1]
    v_rot[:, 1] = v_a[1] + wz * r[:, 0] - wx * r[:, 2]
    v_rot[:, 2] = v_a[2] + wx * r[:, 1] - wy * r[:, 0]
    d_r = -(params.rotor_drag * v_rot) * eta[:, None]         # (n, 3)

    # v x b3 = (v_y, -v_x, 0)
    m_flap = np.empty_like(v_rot)
    m_flap[:, 0] = v_rot[:, 1]
    m_flap[:, 1] = -v_rot[:, 0]
    m_flap[:, 2] = 0.0
    m_flap *= -params.flapping_coeff * eta[:, None]

    force = d_p + d_r.sum(axis=0)
    moment = m_flap.sum(axis=0)
    moment[0] += (r[:, 1] * d_r[:, 2] - r[:, 2] * d_r[:, 1]).sum()
    moment[1] += (r[:, 2] * d_r[:, 0] - r[:, 0] * d_r[:, 2]).sum()
    moment[2] += (r[:, 0] * d_r[:, 1] - r[:, 1] * d_r[:, 0]).sum()
    return force, moment, d_p, d_r, m_flap


def force_and_moment(body_air, body_rates, rotor_speeds, params):
    """Total aerodynamic (force, moment) only; the integrator's entry point."""
    force, moment, _, _, _ = _terms_from_body_airspeed(
        body_air, body_rates, rotor_speeds, params)
    return force, moment


def wrench_from_body_airspeed(body_air, body_rates, rotor_speeds, params):
    """Full wrench breakdown for diagnostics and analysis."""
    force, moment, d_p, d_r, m_flap = _terms_from_body_airspeed(
        body_air, body_rates, rotor_speeds, params)
    return AeroWrench(force=force, moment=moment, parasitic_drag=d_p,
                      rotor_drag=d_r, flapping_moment=m_flap)
