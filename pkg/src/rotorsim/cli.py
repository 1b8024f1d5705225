"""Batch command line: run scenarios and studies, emit CSV/JSON artifacts.

Exit codes: 0 success, 2 config problem (bad file, bad field), 3 simulation
failure (the partial artifacts and a failure record are still written).
"""

import argparse
import json
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, config, control, harness, montecarlo
from .estimator import calibrate_drag


def _bundled_dir():
    return resources.files("rotorsim") / "scenarios"


def _resolve_config_path(name):
    """A real path wins; otherwise fall back to a bundled scenario name."""
    path = Path(name)
    if path.exists():
        return path
    candidate = _bundled_dir() / f"{Path(name).stem}.yaml"
    if candidate.is_file():
        return candidate
    raise config.ConfigError(
        f"config {name!r} is neither a file nor a bundled scenario "
        "(see `rotorsim list-scenarios`)")


def _load(name):
    return config.load_file(_resolve_config_path(name))


def _print_run_summary(name, table, paths):
    meta = table.metadata
    print(f"scenario {name}: {len(table)} rows, "
          f"{meta['duration']:g} s simulated in {meta['wall_time_s']:.1f} s wall")
    if len(table):
        err = np.column_stack([table.columns[f"pos_{k}"] - table.columns[f"des_pos_{k}"]
                               for k in "xyz"])
        err = err[np.all(np.isfinite(err), axis=1)]
        if len(err):
            print(f"  max position error  {np.abs(err).max():.4g} m")
        sat = table.columns["cmd_saturated"]
        print(f"  saturated steps     {float(np.mean(sat > 0)):.1%}")
        if np.any(np.isfinite(table.columns["est_wind_x"])):
            try:
                wr = harness.wind_rmse(table)
                print(f"  wind RMSE           {wr['norm']:.3f} m/s "
                      f"(x {wr['x']:.3f}, y {wr['y']:.3f}, z {wr['z']:.3f})")
            except ValueError:
                pass
    if meta["failure"] is not None:
        print(f"  FAILED at t={meta['failure']['t']:.3f}: {meta['failure']['cause']}")
    for p in paths:
        print(f"  wrote {p}")


def _write_run(table, out_dir, name, extra=None):
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{name}.csv"
    json_path = out_dir / f"{name}.json"
    table.to_csv(csv_path)
    table.sidecar(json_path, extra=extra)
    return [csv_path, json_path]


def _cmd_run(args):
    plan = config.build_plan(_load(args.config), seed=args.seed,
                             aero=False if args.no_aero else None)
    scenario, cal = config.resolve(plan)
    table = harness.run(scenario)
    extra = None
    if cal is not None:
        extra = {"calibration": {"coeffs": cal.coeffs.tolist(),
                                 "warnings": list(cal.warnings)}}
    paths = _write_run(table, Path(args.out), plan.name, extra)
    _print_run_summary(plan.name, table, paths)
    if table.metadata["failure"] is not None:
        print(f"failure record in {paths[1]}", file=sys.stderr)
        return 3
    return 0


def _cmd_montecarlo(args):
    spec = config.build_montecarlo(_load(args.config), seed=args.seed,
                                   trials=args.trials)
    t0 = time.perf_counter()
    trials, summary = montecarlo.monte_carlo(spec, parallel=args.parallel)
    wall = time.perf_counter() - t0
    summary["wall_time_s"] = wall

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    trials_path = out_dir / "montecarlo_trials.csv"
    summary_path = out_dir / "montecarlo_summary.json"
    montecarlo.write_trials_csv(trials, trials_path)
    montecarlo.write_summary_json(trials, summary, spec, summary_path)

    print(f"montecarlo: {summary['n_ok']}/{summary['n_trials']} trials ok "
          f"in {wall:.0f} s wall ({args.parallel} worker(s))")
    if summary["n_ok"]:
        print(f"  median wind RMSE    {summary['rmse_median']:.3f} m/s")
        print(f"  RMSE <= {spec.rmse_threshold:g} m/s      "
              f"{summary['fraction_below_threshold']:.0%} of trials")
        deciles = summary.get("drag_deciles", {})
        if "rank_test_p" in deciles:
            print(f"  low vs high drag    median {deciles['low_drag_median']:.2f} "
                  f"vs {deciles['high_drag_median']:.2f} m/s "
                  f"(one-sided p={deciles['rank_test_p']:.4f})")
    for p in (trials_path, summary_path):
        print(f"  wrote {p}")
    if summary["n_ok"] == 0:
        print("all trials failed", file=sys.stderr)
        return 3
    return 0


def _cmd_benchmark_circle(args):
    doc = _load(args.config)
    results = []
    for label, aero in (("aero_on", True), ("aero_off", False)):
        plan = config.build_plan(doc, seed=args.seed, aero=aero)
        scenario, _ = config.resolve(plan)
        table = harness.run(scenario)
        paths = _write_run(table, Path(args.out), f"{plan.name}_{label}")
        results.append((label, table, paths))

    code = 0
    for label, table, paths in results:
        _print_run_summary(label, table, paths)
        mask = table.t >= 5.0
        for axis in "xy":
            col = table.columns[f"imu_accel_{axis}"][mask]
            col = col[np.isfinite(col)]
            if len(col):
                print(f"  body {axis} accel mean  {np.mean(col):+.4f} m/s^2")
        if table.metadata["failure"] is not None:
            code = 3
    return code


def _cmd_calibrate(args):
    plan = config.build_plan(_load(args.config), seed=args.seed)
    flight = plan.calibration
    if flight is None:
        # config gave explicit coefficients or no estimator; fly the
        # standard calibration pattern on the config's vehicle instead
        flight = harness.ScenarioConfig(
            vehicle=plan.scenario.vehicle,
            trajectory=control.FigureEightTrajectory(),
            duration=15.0,
            seed=plan.scenario.seed + 0xCA1,
        )
    table = harness.run(flight)
    if table.metadata["failure"] is not None:
        print(f"calibration flight failed: {table.metadata['failure']}",
              file=sys.stderr)
        return 3
    cal = calibrate_drag(table, flight.vehicle.mass)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{plan.name}_calibration.json"
    with open(path, "w") as fh:
        json.dump({
            "schema_version": 1,
            "package_version": __version__,
            "seed": int(flight.seed),
            "coeffs": cal.coeffs.tolist(),
            "raw_coeffs": cal.raw_coeffs.tolist(),
            "residual_rms": cal.residual_rms.tolist(),
            "excitation": cal.excitation.tolist(),
            "warnings": list(cal.warnings),
        }, fh, indent=2, sort_keys=True)
        fh.write("\n")

    print(f"calibrated drag coefficients ({plan.name}):")
    for axis, c, raw, exc in zip("xyz", cal.coeffs, cal.raw_coeffs, cal.excitation):
        print(f"  c_{axis} = {c:.4e}  (raw {raw:+.4e}, excitation {exc:.3f})")
    for w in cal.warnings:
        print(f"  warning: {w}")
    print(f"  wrote {path}")
    return 0


def _cmd_list_scenarios(args):
    del args
    print("bundled scenarios (pass the name or your own file to --config):")
    for item in sorted(_bundled_dir().iterdir(), key=lambda p: p.name):
        if not item.name.endswith(".yaml"):
            continue
        try:
            doc = config.load_file(item)
            desc = doc.get("description", "")
        except config.ConfigError:
            desc = "(unreadable)"
        print(f"  {item.name.removesuffix('.yaml'):20s} {desc}")
    return 0


def _parser():
    parser = argparse.ArgumentParser(
        prog="rotorsim",
        description="Multirotor flight simulation and wind estimation, batch mode.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True,
                           help="scenario file or bundled scenario name")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")

    p_run = sub.add_parser("run", help="run one scenario, write CSV + JSON")
    common(p_run)
    p_run.add_argument("--no-aero", action="store_true",
                       help="disable aerodynamic wrenches in the plant")
    p_run.set_defaults(func=_cmd_run)

    p_mc = sub.add_parser("montecarlo", help="randomized-vehicle wind study")
    common(p_mc)
    p_mc.add_argument("--trials", type=int, default=None,
                      help="override the trial count")
    p_mc.add_argument("--parallel", type=int, default=1,
                      help="worker processes (default sequential)")
    p_mc.set_defaults(func=_cmd_montecarlo)

    p_bench = sub.add_parser("benchmark-circle",
                             help="circle tracking with aero on and off")
    p_bench.add_argument("--config", default="benchmark_circle",
                         help="circle scenario (default: bundled benchmark)")
    p_bench.add_argument("--out", default="out", help="output directory")
    p_bench.add_argument("--seed", type=int, default=None,
                         help="override the config seed")
    p_bench.set_defaults(func=_cmd_benchmark_circle)

    p_cal = sub.add_parser("calibrate",
                           help="fly the calibration pattern, fit drag")
    common(p_cal)
    p_cal.set_defaults(func=_cmd_calibrate)

    p_list = sub.add_parser("list-scenarios", help="list bundled scenarios")
    p_list.set_defaults(func=_cmd_list_scenarios)
    return parser


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except config.ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except RuntimeError as err:
        print(f"simulation failed: {err}", file=sys.stderr)
        return 3


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
