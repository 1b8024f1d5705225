import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rotorsim import vehicle  # noqa: E402


@pytest.fixture
def params():
    return vehicle.default_params()


@pytest.fixture
def rng():
    return np.random.default_rng(0xDECADE)


def random_state(rng, params, speed=5.0, rate=3.0):
    """Random but physically plausible vehicle state."""
    from rotorsim import quat

    q = quat.normalize(rng.standard_normal(4))
    eta = rng.uniform(params.rotor_speed_min, params.rotor_speed_max,
                      params.n_rotors)
    return vehicle.VehicleState(
        position=rng.uniform(-10, 10, 3),
        velocity=rng.uniform(-speed, speed, 3),
        attitude=q,
        body_rates=rng.uniform(-rate, rate, 3),
        rotor_speeds=eta,
    )
