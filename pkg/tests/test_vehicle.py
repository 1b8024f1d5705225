"""Rigid-body plant: parameter validation, equilibria, conservation laws,
and adaptive integration against the fixed-step RK4 oracle."""

import dataclasses

import numpy as np
import pytest

import oracles
from rotorsim import quat, vehicle
from rotorsim.vehicle import VehicleParams, VehicleState


def _params_kwargs(p):
    return {f.name: getattr(p, f.name) for f in dataclasses.fields(p)}


class TestParams:
    def test_default_hover_speed_balances_weight(self, params):
        eta = params.hover_rotor_speed()
        thrust = params.n_rotors * params.thrust_coeff * eta ** 2
        np.testing.assert_allclose(thrust, params.mass * params.gravity, rtol=1e-12)

    def test_allocation_matrix_maps_hover_to_pure_thrust(self, params):
        eta = params.hover_rotor_speed()
        wrench = params.allocation_matrix @ np.full(params.n_rotors, eta ** 2)
        np.testing.assert_allclose(wrench[0], params.mass * params.gravity, rtol=1e-12)
        np.testing.assert_allclose(wrench[1:], 0.0, atol=1e-12)

    @pytest.mark.parametrize("field,value", [
        ("mass", -1.0),
        ("thrust_coeff", 0.0),
        ("motor_time_constant", 0.0),
        ("rotor_speed_max", 0.0),
        ("inertia", np.diag([1.0, 1.0, -1.0]) * 1e-3),
        ("rotor_directions", np.array([1.0, -1.0, 1.0, -2.0])),
        ("parasitic_drag", np.array([-1e-4, 0.0, 0.0])),
    ])
    def test_rejects_invalid(self, params, field, value):
        kwargs = _params_kwargs(params)
        kwargs[field] = value
        with pytest.raises(ValueError):
            VehicleParams(**kwargs)

    def test_crazyflie_is_valid_and_light(self):
        p = vehicle.crazyflie_params()
        assert p.mass < 0.05
        assert p.hover_rotor_speed() < p.rotor_speed_max


class TestState:
    def test_array_round_trip(self, rng, params):
        from conftest import random_state
        s = random_state(rng, params)
        s2 = VehicleState.from_array(s.as_array(), t=s.t)
        np.testing.assert_array_equal(s2.position, s.position)
        np.testing.assert_array_equal(s2.velocity, s.velocity)
        np.testing.assert_array_equal(s2.attitude, s.attitude)
        np.testing.assert_array_equal(s2.body_rates, s.body_rates)
        np.testing.assert_array_equal(s2.rotor_speeds, s.rotor_speeds)

    def test_rest_is_dynamic_equilibrium(self, params):
        s = VehicleState.rest(params, position=(1.0, -2.0, 3.0))
        cmd = np.full(params.n_rotors, params.hover_rotor_speed())
        d = vehicle.dynamics(s, cmd, np.zeros(3), params)
        np.testing.assert_allclose(d.velocity, 0.0, atol=1e-12)
        np.testing.assert_allclose(d.acceleration, 0.0, atol=1e-10)
        np.testing.assert_allclose(d.angular_accel, 0.0, atol=1e-10)
        np.testing.assert_allclose(d.rotor_accel, 0.0, atol=1e-10)


class TestDynamics:
    def test_matches_rk4_oracle_random_states(self, rng, params):
        from conftest import random_state
        wind = np.array([1.0, -0.5, 0.2])
        for _ in range(5):
            s = random_state(rng, params)
            cmd = rng.uniform(0, params.rotor_speed_max, params.n_rotors)
            got = vehicle.integrate(s, cmd, wind, params, 0.02,
                                    rtol=1e-9, atol=1e-11)
            want = oracles.rk4_vehicle_step(s, cmd, wind, params, 0.02)
            np.testing.assert_allclose(got.as_array(), want.as_array(),
                                       rtol=1e-7, atol=1e-8)

    def test_aero_disabled_matches_oracle(self, rng, params):
        from conftest import random_state
        s = random_state(rng, params)
        cmd = np.full(params.n_rotors, params.hover_rotor_speed())
        got = vehicle.integrate(s, cmd, np.zeros(3), params, 0.02,
                                rtol=1e-9, atol=1e-11, aero_enabled=False)
        want = oracles.rk4_vehicle_step(s, cmd, np.zeros(3), params, 0.02,
                                        aero_enabled=False)
        np.testing.assert_allclose(got.as_array(), want.as_array(),
                                   rtol=1e-7, atol=1e-8)

    def test_quaternion_norm_preserved(self, rng, params):
        from conftest import random_state
        s = random_state(rng, params, speed=3.0, rate=6.0)
        for _ in range(50):
            cmd = rng.uniform(0, params.rotor_speed_max, params.n_rotors)
            s = vehicle.integrate(s, cmd, np.zeros(3), params, 0.01)
            np.testing.assert_allclose(np.linalg.norm(s.attitude), 1.0,
                                       atol=1e-12)

    def test_rotor_speeds_stay_in_bounds(self, params):
        s = VehicleState.rest(params)
        over = np.full(params.n_rotors, 10 * params.rotor_speed_max)
        for _ in range(60):
            s = vehicle.integrate(s, over, np.zeros(3), params, 0.01)
            assert np.all(s.rotor_speeds <= params.rotor_speed_max + 1e-9)
            assert np.all(s.rotor_speeds >= params.rotor_speed_min - 1e-9)
        # commands clamp to the limit, so after 12 time constants the motors
        # sit essentially on it
        np.testing.assert_allclose(s.rotor_speeds, params.rotor_speed_max,
                                   rtol=1e-4)

    def test_free_fall_kinematics(self, params):
        kwargs = _params_kwargs(params)
        s0 = VehicleState(t=0.0, position=np.zeros(3),
                          velocity=np.array([1.0, 0.0, 0.0]),
                          attitude=quat.identity(), body_rates=np.zeros(3),
                          rotor_speeds=np.zeros(params.n_rotors))
        p = VehicleParams(**kwargs)
        s = vehicle.integrate(s0, np.zeros(4), np.zeros(3), p, 1.0,
                              aero_enabled=False)
        g = p.gravity
        np.testing.assert_allclose(s.velocity, [1.0, 0.0, -g], atol=1e-9)
        np.testing.assert_allclose(s.position, [1.0, 0.0, -g / 2], atol=1e-9)

    def test_torque_free_rotation_conserves_energy_and_momentum(self, params):
        kwargs = _params_kwargs(params)
        kwargs["gravity"] = 0.0
        # distinct principal moments so the tumble is nontrivial
        kwargs["inertia"] = np.diag([3e-3, 5e-3, 7e-3])
        p = VehicleParams(**kwargs)
        s = VehicleState(t=0.0, position=np.zeros(3), velocity=np.zeros(3),
                         attitude=quat.identity(),
                         body_rates=np.array([2.0, 0.1, 1.5]),
                         rotor_speeds=np.zeros(p.n_rotors))
        energy0 = 0.5 * s.body_rates @ p.inertia @ s.body_rates
        l_world0 = quat.rotate(s.attitude, p.inertia @ s.body_rates)
        for _ in range(100):
            s = vehicle.integrate(s, np.zeros(4), np.zeros(3), p, 0.02,
                                  rtol=1e-10, atol=1e-12, aero_enabled=False)
        energy = 0.5 * s.body_rates @ p.inertia @ s.body_rates
        l_world = quat.rotate(s.attitude, p.inertia @ s.body_rates)
        np.testing.assert_allclose(energy, energy0, rtol=1e-8)
        np.testing.assert_allclose(l_world, l_world0, rtol=1e-7)
        np.testing.assert_allclose(s.velocity, 0.0, atol=1e-12)

    def test_control_wrench_hover(self, params):
        eta = np.full(params.n_rotors, params.hover_rotor_speed())
        f, m = vehicle.control_wrench(eta, params)
        np.testing.assert_allclose(
            f, [0.0, 0.0, params.mass * params.gravity], atol=1e-12)
        np.testing.assert_allclose(m, 0.0, atol=1e-12)

    def test_wind_shifts_drag_reference(self, params):
        # hovering in a steady wind feels drag as if moving against it
        s = VehicleState.rest(params)
        wind = np.array([3.0, 0.0, 0.0])
        d = vehicle.dynamics(s, s.rotor_speeds, wind, params)
        assert d.acceleration[0] > 1e-4  # pushed downwind
        d0 = vehicle.dynamics(s, s.rotor_speeds, np.zeros(3), params)
        np.testing.assert_allclose(d0.acceleration, 0.0, atol=1e-10)

    def test_callable_wind_profile_accepted(self, params):
        s = VehicleState.rest(params)
        got = vehicle.integrate(s, s.rotor_speeds, lambda t, p: np.array([2.0, 0, 0]),
                                params, 0.05)
        want = vehicle.integrate(s, s.rotor_speeds, np.array([2.0, 0, 0]),
                                 params, 0.05)
        np.testing.assert_allclose(got.as_array(), want.as_array(), atol=1e-12)
