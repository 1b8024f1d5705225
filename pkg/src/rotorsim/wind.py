"""Wind profiles: constant, step, sinusoid, and Dryden turbulence.

Every profile exposes sample(t, position) -> world-frame wind vector and is
a deterministic function of its construction arguments (including the seed
for Dryden). The harness samples wind once per control interval and holds
it constant across the plant integration of that interval.
"""

import numpy as np
from scipy.linalg import expm, solve_discrete_lyapunov

_FT_PER_M = 1.0 / 0.3048

# mean wind speed at 20 ft for the named turbulence intensities (m/s;
# 15 / 30 / 45 knots)
INTENSITY_CLASSES = {"light": 7.72, "moderate": 15.43, "severe": 23.15}


class ConstantWind:
    def __init__(self, wind):
        self.wind = np.asarray(wind, dtype=float)

    def sample(self, t, position):
        return self.wind.copy()


class StepWind:
    """Switches from one constant wind to another at t_step."""

    def __init__(self, before, after, t_step):
        self.before = np.asarray(before, dtype=float)
        self.after = np.asarray(after, dtype=float)
        self.t_step = float(t_step)

    def sample(self, t, position):
        return (self.after if t >= self.t_step else self.before).copy()


class SinusoidWind:
    """Per-axis sinusoidal gusts around a mean wind."""

    def __init__(self, mean, amplitude, frequency, phase=(0.0, 0.0, 0.0)):
        self.mean = np.asarray(mean, dtype=float)
        self.amplitude = np.asarray(amplitude, dtype=float)
        self.frequency = np.broadcast_to(np.asarray(frequency, dtype=float), (3,)).copy()
        self.phase = np.asarray(phase, dtype=float)
        if np.any(self.frequency <= 0):
            raise ValueError("frequency must be positive")

    def sample(self, t, position):
        return self.mean + self.amplitude * np.sin(2.0 * np.pi * self.frequency * t + self.phase)


def _gust_filter(scale_length, airspeed, sigma, dt):
    """Exact discretization of the lateral/vertical Dryden shaping filter.

    The continuous filter has a double pole at -V/L and a zero matching the
    standard spectrum shape. Returns the discrete transition matrix, a
    Cholesky factor of the van Loan process noise, the output row (gain
    normalized so the stationary output variance is exactly sigma^2), and
    the stationary state covariance used to start stationary at t = 0.
    """
    tc = scale_length / airspeed
    a = np.array([[0.0, 1.0], [-1.0 / tc**2, -2.0 / tc]])
    b = np.array([[0.0], [1.0]])
    m = np.zeros((4, 4))
    m[:2, :2] = -a
    m[:2, 2:] = b @ b.T
    m[2:, 2:] = a.T
    em = expm(m * dt)
    ad = em[2:, 2:].T
    qd = ad @ em[:2, 2:]
    qd = 0.5 * (qd + qd.T)
    noise_factor = np.linalg.cholesky(qd + 1e-18 * np.eye(2))
    c = np.array([1.0, np.sqrt(3.0) * tc])
    if sigma > 0.0:
        p_stat = solve_discrete_lyapunov(ad, qd)
        c = c * (sigma / np.sqrt(c @ p_stat @ c))
    else:
        c = c * 0.0
        p_stat = np.zeros((2, 2))
    return ad, noise_factor, c, p_stat


def _stationary_draw(p_stat, rng):
    w, v = np.linalg.eigh(p_stat)
    return v @ (np.sqrt(np.clip(w, 0.0, None)) * rng.standard_normal(p_stat.shape[0]))


class DrydenWind:
    """Turbulent wind from the standard low-altitude Dryden spectra.

    Gust components are generated along the mean-wind axes (longitudinal,
    lateral, vertical) by shaping filters stepped at a fixed internal rate
    and are stationary from t = 0 (filter states start from the stationary
    distribution, so no burn-in is needed). `intensity` selects the
    turbulence level: a class name from INTENSITY_CLASSES, a numeric mean
    wind speed at 20 ft (m/s), or None to derive it from the mean wind
    magnitude. Zero intensity degenerates to the constant mean wind.
    """

    internal_rate = 100.0  # Hz

    def __init__(self, mean, altitude=5.0, intensity=None, seed=0):
        self.mean = np.asarray(mean, dtype=float)
        self.altitude = float(altitude)
        self.seed = seed
        if self.altitude <= 0:
            raise ValueError("altitude must be positive")
        if isinstance(intensity, str):
            try:
                w20 = INTENSITY_CLASSES[intensity]
            except KeyError:
                raise ValueError(f"unknown turbulence intensity class {intensity!r}; "
                                 f"choose from {sorted(INTENSITY_CLASSES)}") from None
        elif intensity is None:
            w20 = float(np.linalg.norm(self.mean))
        else:
            w20 = float(intensity)
            if w20 < 0:
                raise ValueError("numeric intensity must be nonnegative")
        self.w20 = w20

        # low-altitude scale lengths and intensities (lengths in feet,
        # converted to meters; altitude clamped to the model's valid band)
        h_ft = np.clip(self.altitude * _FT_PER_M, 10.0, 1000.0)
        denom = 0.177 + 0.000823 * h_ft
        length_w = h_ft / _FT_PER_M
        length_uv = (h_ft / denom**1.2) / _FT_PER_M
        sigma_w = 0.1 * w20
        sigma_uv = sigma_w / denom**0.4
        self.sigma = np.array([sigma_uv, sigma_uv, sigma_w])

        # advection speed for the frozen-field spectra; floored so a calm
        # mean wind still yields finite filter time constants
        airspeed = max(float(np.linalg.norm(self.mean)), 1.0)
        dt = 1.0 / self.internal_rate

        # longitudinal component: first-order filter, exact discretization
        tc_u = length_uv / airspeed
        self._a_u = np.exp(-dt / tc_u)
        self._b_u = sigma_uv * np.sqrt(1.0 - self._a_u**2)

        self._ad_v, self._l_v, self._c_v, p0_v = _gust_filter(length_uv, airspeed, sigma_uv, dt)
        self._ad_w, self._l_w, self._c_w, p0_w = _gust_filter(length_w, airspeed, sigma_w, dt)

        # gust axes: longitudinal along the mean wind's horizontal heading
        horiz = self.mean.copy()
        horiz[2] = 0.0
        norm = np.linalg.norm(horiz)
        e_long = horiz / norm if norm > 1e-12 else np.array([1.0, 0.0, 0.0])
        e_vert = np.array([0.0, 0.0, 1.0])
        e_lat = np.cross(e_vert, e_long)
        self._axes = np.column_stack([e_long, e_lat, e_vert])

        self._rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0x44525944)))
        # draw initial filter states from the stationary distribution
        self._x_u = self._rng.standard_normal() * sigma_uv
        self._x_v = _stationary_draw(p0_v, self._rng)
        self._x_w = _stationary_draw(p0_w, self._rng)
        self._step_count = 0
        self._gust = np.array([self._x_u, self._c_v @ self._x_v, self._c_w @ self._x_w])

    def _advance(self):
        self._x_u = self._a_u * self._x_u + self._b_u * self._rng.standard_normal()
        self._x_v = self._ad_v @ self._x_v + self._l_v @ self._rng.standard_normal(2)
        self._x_w = self._ad_w @ self._x_w + self._l_w @ self._rng.standard_normal(2)
        self._step_count += 1
        self._gust = np.array([self._x_u, self._c_v @ self._x_v, self._c_w @ self._x_w])

    def sample(self, t, position):
        """Wind at time t (zero-order hold between internal filter steps).

        Time must not move backward: the gust stream advances lazily and
        cannot be rewound.
        """
        target = int(np.floor(t * self.internal_rate + 1e-9))
        while self._step_count < target:
            self._advance()
        return self.mean + self._axes @ self._gust


def sample(profile, t, position=(0.0, 0.0, 0.0)):
    """Evaluate any wind profile at (t, position)."""
    return profile.sample(t, np.asarray(position, dtype=float))
