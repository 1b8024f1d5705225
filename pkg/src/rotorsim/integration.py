"""Adaptive Runge-Kutta integration with embedded 4(5) error control.

Dormand-Prince coefficients; the 5th-order solution is propagated and the
embedded 4th-order solution supplies the local error estimate. Step size
adapts to meet rtol/atol; a `post_step` hook runs after every accepted
internal step (used by the plant to clamp rotor speeds).
"""

import numpy as np

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_ERR = _B5 - _B4

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0


class IntegrationError(RuntimeError):
    """Integration could not proceed; carries the last good state and time."""

    def __init__(self, message, t, y):
        super().__init__(message)
        self.t = t
        self.y = np.asarray(y)


def rk45(f, t0, y0, t1, rtol=1e-6, atol=1e-8, first_step=None, post_step=None,
         max_steps=100_000):
    """Integrate y' = f(t, y) from t0 to t1, returning y(t1).

    Raises IntegrationError on step-size underflow or non-finite states. The
    step never extends past t1.
    """
    if t1 <= t0:
        raise ValueError("t1 must exceed t0")
    y = np.asarray(y0, dtype=float).copy()
    t = t0
    span = t1 - t0
    h = first_step if first_step is not None else span
    h = min(h, span)
    h_min = max(span * 1e-14, 1e-16)

    k = np.empty((7, y.size))
    k[0] = f(t, y)
    for _ in range(max_steps):
        if t >= t1:
            return y
        h = min(h, t1 - t)
        # stages (k[0] holds f at the step start, FSAL reuse)
        for i in range(1, 7):
            yi = y + h * (_A[i] @ k[:i])
            k[i] = f(t + _C[i] * h, yi)
        y_new = y + h * (_B5 @ k)
        err = h * (_ERR @ k)

        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err_norm = np.sqrt(np.mean((err / scale) ** 2))

        if np.isfinite(err_norm) and err_norm <= 1.0:
            t = t + h
            y = y_new
            if post_step is not None:
                y = post_step(y)
                if not np.all(np.isfinite(y)):
                    raise IntegrationError("state became non-finite", t, y)
                k[0] = f(t, y)
            else:
                if not np.all(np.isfinite(y)):
                    raise IntegrationError("state became non-finite", t, y)
                k[0] = k[6]  # FSAL: last stage is f at the new point
            factor = _MAX_FACTOR if err_norm == 0.0 else min(
                _MAX_FACTOR, max(_MIN_FACTOR, _SAFETY * err_norm ** -0.2))
        else:
            factor = max(_MIN_FACTOR, _SAFETY * (err_norm ** -0.2 if np.isfinite(err_norm) else _MIN_FACTOR))
            if not np.isfinite(err_norm):
                factor = _MIN_FACTOR
        h = h * factor
        if h < h_min:
            raise IntegrationError(
                f"step size underflow at t={t:.6g} (h={h:.3g})", t, y)
    raise IntegrationError(f"exceeded {max_steps} internal steps", t, y)
