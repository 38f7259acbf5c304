"""Command-line front end: ``mudforce {simulate,calibrate,evaluate,sweep,protocol-gen}``.

Exit codes: 0 success, 1 invalid input, 2 numerical or optimizer failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

import numpy as np

from .calibration import CalibrationError, FitConfig, error_profile, fit_parameters, load_bounds, save_fit_result
from .dynamics import DEFAULT_DT, simulate
from .params import FIT_NAMES, IntruderGeometry, MudParameters, load_parameters, load_preset
from .svgplot import write_line_chart
from .trajectory import ProtocolSpec, TrialRecord, generate_protocol, load_trial, save_trial

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2

TRACE_METRICS = ("peak_force", "suction_min", "steady_sustain_force", "necking_time")
METRICS = TRACE_METRICS + FIT_NAMES

# name -> (SI unit, table unit, table scale from SI)
_UNITS = {
    "k_i": ("Pa/m", "MPa/m", 1e-6),
    "b_i": ("Pa s/m", "MPa s/m", 1e-6),
    "k_w": ("Pa/m", "MPa/m", 1e-6),
    "b_w": ("Pa s/m", "MPa s/m", 1e-6),
    "alpha": ("Pa", "MPa", 1e-6),
    "beta": ("", "", 1.0),
    "sigma_y": ("Pa", "kPa", 1e-3),
    "zeta": ("", "", 1.0),
    "omega0": ("rad/s", "rad/s", 1.0),
    "peak_force": ("N", "N", 1.0),
    "suction_min": ("N", "N", 1.0),
    "steady_sustain_force": ("N", "N", 1.0),
    "necking_time": ("s", "s", 1.0),
}

_SUMMARY_KEYS = {
    "peak_force_N": "peak_force",
    "suction_min_N": "suction_min",
    "steady_sustain_force_N": "steady_sustain_force",
    "necking_time_s": "necking_time",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _convert(name: str, value: float | None, units: str) -> tuple[float | None, str]:
    si_unit, table_unit, scale = _UNITS[name]
    if units == "paper":
        # round away binary noise from the unit change (e.g. 6000 Pa -> 6.0 kPa)
        return (None if value is None else float(f"{value * scale:.12g}")), table_unit
    return value, si_unit


def _fmt(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def _add_protocol_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("protocol")
    g.add_argument("--v-down", type=float, default=0.01, help="intrusion speed, m/s (default 0.01)")
    g.add_argument("--v-up", type=float, default=None, help="withdrawal speed, m/s (default: --v-down)")
    g.add_argument("--depth", type=float, default=0.05, help="intrusion depth, m (default 0.05)")
    g.add_argument("--t-sustain", type=float, default=6.0, help="hold time, s (default 6)")
    g.add_argument("--z-end", type=float, default=0.0, help="final height, m; <= 0 is above the surface")


def _add_params_args(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--params", type=Path, help="parameter file (JSON)")
    g.add_argument("--preset", help="shipped preset, e.g. 25 or W25")


def _protocol(args, v_down: float | None = None) -> ProtocolSpec:
    v = args.v_down if v_down is None else v_down
    v_up = args.v_up if v_down is None else None
    return ProtocolSpec(v_down=v, depth=args.depth, t_sustain=args.t_sustain, v_up=v_up, dt=args.dt, z_end=args.z_end)


def _params(args) -> MudParameters:
    return load_parameters(args.params) if args.params is not None else load_preset(args.preset)


def _emit(text: str, path: str) -> None:
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _report_stream(output: str):
    # keep stdout clean when the data itself goes there
    return sys.stderr if output == "-" else sys.stdout


def cmd_simulate(args) -> int:
    params = _params(args)
    geometry = IntruderGeometry()
    if args.trial is not None:
        record = load_trial(args.trial, smoothing_window=args.smoothing)
        traj = record.trajectory
        meta = {"W": record.water_content if record.water_content is not None else params.water_content}
    else:
        spec = _protocol(args)
        traj = generate_protocol(spec)
        meta = {"W": params.water_content, "v": spec.v_down}
    trace = simulate(params, geometry, traj, deadband=args.deadband)
    trace.metadata = {k: repr(float(v)) for k, v in meta.items() if v is not None}
    _emit(trace.to_csv(normalize=args.normalize), args.output)
    if args.svg is not None:
        F = trace.F_total
        ylabel = "F [N]"
        if args.normalize:
            F = F / max(float(np.abs(F).max()), 1e-300)
            ylabel = "F / max|F|"
        write_line_chart(args.svg, [("F_total", trace.t, F)], "t [s]", ylabel)
    out = _report_stream(args.output)
    for key, value in trace.summary().items():
        print(f"{key}: {'none' if value is None else f'{value:.6g}'}", file=out)
    return EXIT_OK


def cmd_protocol_gen(args) -> int:
    spec = _protocol(args)
    record = TrialRecord(generate_protocol(spec), velocity=spec.v_down)
    _emit(save_trial(record, include_velocity=not args.no_velocity), args.output)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    trials = [load_trial(path, smoothing_window=args.smoothing) for path in args.trials]
    config = FitConfig(
        bounds=load_bounds(args.bounds) if args.bounds is not None else {},
        n_starts=args.starts,
        max_evals=args.max_evals,
        seed=args.seed,
        deadband=args.deadband,
    )
    result = fit_parameters(trials, IntruderGeometry(), config, lambda_drag=args.lambda_drag, rho_m=args.rho_m)
    save_fit_result(result, args.output)
    print(f"rmse_N: {result.objective:.6g}")
    print(f"evaluations: {result.n_evals}")
    print(f"converged: {str(result.converged).lower()}")
    for name in FIT_NAMES:
        value, unit = _convert(name, getattr(result.params, name), args.units)
        flag = f"  [at {result.at_bound[name]} bound]" if result.at_bound[name] else ""
        print(f"{name}: {value:.6g} {unit}".rstrip() + flag)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    params = _params(args)
    trials = [load_trial(path, smoothing_window=args.smoothing) for path in args.trials]
    for path, trial in zip(args.trials, trials):
        if trial.F_meas is None:
            raise ValueError(f"{path}: missing force column 'F_N'")
    profile = error_profile(trials, params, IntruderGeometry(), n_points=args.points, deadband=args.deadband)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["u", "mean_error_N", "std_error_N"])
    for row in zip(profile.u, profile.mean, profile.std):
        w.writerow([repr(float(v)) for v in row])
    _emit(buf.getvalue(), args.output)

    table = io.StringIO()
    w = csv.writer(table, lineterminator="\n")
    w.writerow(["trial", "rmse_N"])
    for path, trial, score in zip(args.trials, trials, profile.trial_rmse):
        w.writerow([trial.trial_id or Path(path).name, repr(score)])
    if args.rmse_table is not None:
        Path(args.rmse_table).write_text(table.getvalue(), encoding="utf-8")
    _report_stream(args.output).write(table.getvalue())
    return EXIT_OK


def _parse_axis(axis: str, values: str) -> list:
    items = [v.strip() for v in values.split(",") if v.strip()]
    if not items:
        raise ValueError("sweep axis is empty")
    if axis == "water":
        return [load_preset(v) for v in items]
    speeds = [float(v) for v in items]
    if any(not np.isfinite(v) or v <= 0 for v in speeds):
        raise ValueError("sweep velocities must be finite and > 0")
    return speeds


def cmd_sweep(args) -> int:
    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
    unknown = [m for m in metrics if m not in METRICS]
    if unknown or not metrics:
        raise ValueError(f"unknown metric(s) {unknown or metrics}; choose from {', '.join(METRICS)}")
    axis_values = _parse_axis(args.axis, args.values)
    geometry = IntruderGeometry()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["axis", "axis_value", "metric", "value", "unit"])
    for item in axis_values:
        if args.axis == "water":
            params, spec = item, _protocol(args)
            label = f"{round(params.water_content * 100):d}" if params.water_content is not None else ""
        else:
            params, spec = _params(args), _protocol(args, v_down=item)
            label = repr(item)
        summary = {}
        if any(m in TRACE_METRICS for m in metrics):
            trace = simulate(params, geometry, generate_protocol(spec), deadband=args.deadband)
            summary = {_SUMMARY_KEYS[k]: v for k, v in trace.summary().items()}
        for m in metrics:
            raw = summary[m] if m in TRACE_METRICS else getattr(params, m)
            value, unit = _convert(m, raw, args.units)
            w.writerow([args.axis, label, m, _fmt(value), unit])
    _emit(buf.getvalue(), args.output)
    return EXIT_OK


def _add_global_args(p: argparse.ArgumentParser, default) -> None:
    p.add_argument("--dt", type=float, default=default, help="protocol sample interval, s (trial files keep their own)")
    p.add_argument("--seed", type=int, default=default, help="seed for multi-start calibration")
    p.add_argument("--units", choices=("SI", "paper"), default=default, help="units for printed parameter values")
    p.add_argument("--deadband", type=float, default=default, help="|zdot| treated as zero when choosing the regime, m/s")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mudforce", description="Foot-mud resistive force model: simulate, calibrate, evaluate.")
    _add_global_args(parser, argparse.SUPPRESS)
    parser.set_defaults(dt=DEFAULT_DT, seed=0, units="SI", deadband=0.0)
    common = _Parser(add_help=False)
    # accepted after the command name too; SUPPRESS keeps the top-level value unless repeated
    _add_global_args(common, argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common], help="simulate a protocol or recorded trajectory")
    _add_params_args(p)
    _add_protocol_args(p)
    p.add_argument("--trial", type=Path, help="use the motion of a trial CSV instead of a protocol")
    p.add_argument("--smoothing", type=int, default=5, help="velocity smoothing window for trial files")
    p.add_argument("--normalize", action="store_true", help="scale the force column by max |F|")
    p.add_argument("--svg", type=Path, help="also write a force-time SVG chart")
    p.add_argument("-o", "--output", default="-", help="trace CSV path ('-' for stdout)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("protocol-gen", parents=[common], help="write a down/hold/up trajectory as a trial CSV")
    _add_protocol_args(p)
    p.add_argument("--no-velocity", action="store_true", help="omit the velocity column")
    p.add_argument("-o", "--output", default="-", help="trial CSV path ('-' for stdout)")
    p.set_defaults(func=cmd_protocol_gen)

    p = sub.add_parser("calibrate", parents=[common], help="fit the nine model constants to trial files")
    p.add_argument("trials", nargs="+", type=Path, help="trial CSV files with an F_N column")
    p.add_argument("--bounds", type=Path, help="bounds file (JSON, MPa/kPa or SI keys)")
    p.add_argument("--starts", type=int, default=8, help="Latin-hypercube starts per stage (default 8)")
    p.add_argument("--max-evals", type=int, default=60000, help="objective evaluation budget")
    p.add_argument("--lambda-drag", type=float, default=0.013, help="fixed drag factor")
    p.add_argument("--rho-m", type=float, default=1840.0, help="fixed mud density, kg/m^3")
    p.add_argument("--smoothing", type=int, default=5, help="velocity smoothing window for trial files")
    p.add_argument("-o", "--output", required=True, help="fitted parameter file (JSON)")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("evaluate", parents=[common], help="per-trial RMSE and normalized error profile")
    _add_params_args(p)
    p.add_argument("trials", nargs="+", type=Path, help="trial CSV files with an F_N column")
    p.add_argument("--points", type=int, default=101, help="samples on the normalized axis (default 101)")
    p.add_argument("--rmse-table", type=Path, help="also write the per-trial RMSE table here")
    p.add_argument("--smoothing", type=int, default=5, help="velocity smoothing window for trial files")
    p.add_argument("-o", "--output", default="-", help="error-profile CSV path ('-' for stdout)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", parents=[common], help="metrics across presets or intrusion velocities (long-format CSV)")
    p.add_argument("--axis", choices=("water", "velocity"), required=True)
    p.add_argument("--values", required=True, help="comma list: presets (15,20,...) or velocities in m/s")
    p.add_argument("--metrics", default="peak_force,suction_min,steady_sustain_force",
                   help=f"comma list from: {', '.join(METRICS)}")
    _add_protocol_args(p)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--params", type=Path, help="parameter file for a velocity sweep")
    g.add_argument("--preset", default="25", help="preset for a velocity sweep (default 25)")
    p.add_argument("-o", "--output", default="-", help="CSV path ('-' for stdout)")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CalibrationError as exc:
        print(f"mudforce: calibration failed: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (FloatingPointError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"mudforce: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError, KeyError) as exc:
        print(f"mudforce: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
