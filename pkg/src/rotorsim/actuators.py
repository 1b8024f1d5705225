"""Rotor command path: wrench-to-rotor-speed mixing and the motor lag oracle.

The first-order lag itself is integrated with the rigid-body states in
`vehicle`; this module owns command allocation, saturation handling, and
the closed-form step response used to cross-check the integration.
"""

from dataclasses import dataclass

import numpy as np


@dataclass
class MotorCommand:
    """Clamped rotor-speed commands with per-rotor saturation flags.

    `saturated` marks rotors whose pre-clamp solution fell outside the
    speed limits (including negative squared speeds).
    """

    rotor_speeds: np.ndarray  # (n,) rad/s, within [eta_min, eta_max]
    saturated: np.ndarray     # (n,) bool


class Mixer:
    """Inverts the thrust/moment allocation to per-rotor speed commands.

    The allocation is linear in squared rotor speed, so mixing solves for
    the squared speeds by pseudo-inverse and takes a square root. When the
    requested wrench is unreachable, the moment rows are preserved in
    preference to thrust: a common squared-speed shift (invisible to the
    moment rows for layouts whose lever arms and spin directions sum to
    zero) moves the solution inside the limits, and if the rotor-to-rotor
    spread itself exceeds the limits the differential part is scaled down
    about the mid-range speed. Attitude authority therefore degrades last.
    """

    def __init__(self, params):
        self.params = params
        a = params.allocation_matrix
        if np.linalg.matrix_rank(a) < 4:
            raise ValueError("rotor layout has rank-deficient allocation; "
                             "cannot realize independent thrust and moments")
        self._pinv = np.linalg.pinv(a)
        self._sq_min = params.rotor_speed_min ** 2
        self._sq_max = params.rotor_speed_max ** 2
        # tolerance keeps exact-boundary solutions (hover with eta_min = 0)
        # from being flagged as saturated
        self._sq_tol = 1e-9 * self._sq_max

    def mix(self, thrust, moment):
        """Rotor commands realizing (thrust N, moment N m) as closely as possible."""
        wrench = np.array([thrust, moment[0], moment[1], moment[2]], dtype=float)
        sq = self._pinv @ wrench
        saturated = (sq < self._sq_min - self._sq_tol) | (sq > self._sq_max + self._sq_tol)

        shift_lo = self._sq_min - sq.min()
        shift_hi = self._sq_max - sq.max()
        if shift_lo <= shift_hi:
            sq += np.clip(0.0, shift_lo, shift_hi)
        else:
            spread = sq.max() - sq.min()
            scale = (self._sq_max - self._sq_min) / spread
            sq = (0.5 * (self._sq_min + self._sq_max)
                  + scale * (sq - 0.5 * (sq.max() + sq.min())))
        np.clip(sq, self._sq_min, self._sq_max, out=sq)
        return MotorCommand(rotor_speeds=np.sqrt(sq), saturated=saturated)


def mix(thrust, moment, params):
    """One-shot mixing; builds a Mixer per call (prefer the class in loops)."""
    return Mixer(params).mix(thrust, moment)


def step_response_check(eta0, eta_c, tau_m, t):
    """Closed-form first-order response eta(t) for a constant command.

    Test oracle for the motor-lag dynamics integrated in `vehicle`.
    Broadcasts over any mix of array arguments.
    """
    eta0 = np.asarray(eta0, dtype=float)
    eta_c = np.asarray(eta_c, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be nonnegative")
    return eta_c + (eta0 - eta_c) * np.exp(-t / tau_m)
