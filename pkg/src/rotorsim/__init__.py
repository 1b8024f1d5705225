"""Multirotor flight simulation with wind estimation.

Rigid-body vehicle dynamics with rotor-level aerodynamics, first-order
motors, IMU/mocap sensor models, stochastic wind fields, a geometric
tracking controller, an unscented Kalman filter for wind, and a scenario
harness with a Monte Carlo study over randomized vehicles.
"""

__version__ = "0.1.0"

from . import quat
from .vehicle import (VehicleParams, VehicleState, StateDerivative, dynamics,
                      integrate, control_wrench, default_params, crazyflie_params)
from .aero import AeroWrench, total_aero_wrench
from .actuators import Mixer, MotorCommand, mix, step_response_check
from .sensors import (ImuConfig, MocapConfig, SensorMeasurement, imu_measure,
                      mocap_measure, bias_step)
from .wind import ConstantWind, StepWind, SinusoidWind, DrydenWind, sample
from .control import (FlatOutput, GainSet, default_gains, circle_trajectory,
                      CircleTrajectory, HoverTrajectory, FigureEightTrajectory,
                      hover_flat_output, SE3Controller, se3_control)
from .estimator import (UkfBelief, ProcessModelParams, WindUkf, sigma_points,
                        predict, update, innovation_stats, calibrate_drag,
                        CalibrationResult, SigmaPointError, DivergenceError)
from .harness import (ScenarioConfig, EstimatorConfig, ResultsTable, run,
                      rmse, wind_rmse, config_hash)
from .montecarlo import MonteCarloSpec, TrialResult, monte_carlo, run_trial
from .integration import IntegrationError

__all__ = [
    "__version__",
    "quat",
    "VehicleParams", "VehicleState", "StateDerivative", "dynamics", "integrate",
    "control_wrench", "default_params", "crazyflie_params",
    "AeroWrench", "total_aero_wrench",
    "Mixer", "MotorCommand", "mix", "step_response_check",
    "ImuConfig", "MocapConfig", "SensorMeasurement", "imu_measure",
    "mocap_measure", "bias_step",
    "ConstantWind", "StepWind", "SinusoidWind", "DrydenWind", "sample",
    "FlatOutput", "GainSet", "default_gains", "circle_trajectory",
    "CircleTrajectory", "HoverTrajectory", "FigureEightTrajectory",
    "hover_flat_output", "SE3Controller", "se3_control",
    "UkfBelief", "ProcessModelParams", "WindUkf", "sigma_points", "predict",
    "update", "innovation_stats", "calibrate_drag", "CalibrationResult",
    "SigmaPointError", "DivergenceError",
    "ScenarioConfig", "EstimatorConfig", "ResultsTable", "run", "rmse",
    "wind_rmse", "config_hash",
    "MonteCarloSpec", "TrialResult", "monte_carlo", "run_trial",
    "IntegrationError",
]
