"""Wind-estimation accuracy versus mean wind speed for one vehicle.

Calibrates the default vehicle once, then hovers it in turbulence at a
range of mean wind speeds and reports the wind RMSE at each. Complements
the montecarlo CLI command, which randomizes the vehicle instead of the
wind point.

Usage: python3 scripts/wind_sweep.py [--speeds 0 1 2 3 4 5] [--out sweep.csv]
"""

import argparse

import numpy as np

from rotorsim import control, harness, vehicle, wind
from rotorsim.estimator import calibrate_drag


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--speeds", type=float, nargs="+",
                    default=[0.0, 1.0, 2.0, 3.0, 4.0, 5.0])
    ap.add_argument("--duration", type=float, default=30.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--control-rate", type=float, default=250.0)
    ap.add_argument("--window-start", type=float, default=5.0)
    ap.add_argument("--out", default=None, help="optional CSV path")
    args = ap.parse_args()

    params = vehicle.default_params()
    cal_config = harness.ScenarioConfig(
        vehicle=params,
        trajectory=control.FigureEightTrajectory(),
        duration=15.0,
        seed=args.seed + 101,
        control_rate=args.control_rate,
    )
    cal_table = harness.run(cal_config)
    if cal_table.metadata["failure"] is not None:
        raise SystemExit(f"calibration failed: {cal_table.metadata['failure']}")
    cal = calibrate_drag(cal_table, params.mass)
    print(f"calibrated drag coeffs {np.array2string(cal.coeffs, precision=4)}")

    rows = []
    for speed in args.speeds:
        config = harness.ScenarioConfig(
            vehicle=params,
            trajectory=control.HoverTrajectory((0.0, 0.0, 0.0)),
            duration=args.duration,
            seed=args.seed,
            wind_profile=wind.DrydenWind((speed, 0.0, 0.0),
                                         seed=args.seed + 7),
            estimator=harness.EstimatorConfig(drag_coeffs=cal.coeffs,
                                              mass=params.mass),
            control_rate=args.control_rate,
        )
        table = harness.run(config)
        if table.metadata["failure"] is not None:
            print(f"speed {speed:4.1f} m/s  FAILED: "
                  f"{table.metadata['failure']['cause']}")
            rows.append((speed, np.nan))
            continue
        rmse = harness.wind_rmse(table, args.window_start)["norm"]
        rows.append((speed, rmse))
        print(f"speed {speed:4.1f} m/s  wind RMSE {rmse:6.3f} m/s")

    if args.out:
        with open(args.out, "w") as fh:
            fh.write("wind_speed,wind_rmse\n")
            for speed, rmse in rows:
                fh.write(f"{speed!r},{rmse!r}\n")
        print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
