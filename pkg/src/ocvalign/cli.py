"""Command-line entry point.

Exit codes: 0 success, 1 usage or parse error, 2 data or estimation error,
3 oracle certificate failure. The result document goes to stdout (or
``--output``); diagnostics go to stderr.

Every subcommand accepts ``--config FILE``: a JSON object whose keys are
option names (``nominal_capacity``, ``capacity_bounds``, ...). Command-line
flags take precedence over the file.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import io
from .errors import EmptyInput, OcvAlignError, ParseError
from .estimator import (
    CERTIFICATE_SLACK,
    EstimationProblem,
    SolverSettings,
    estimate,
    estimate_window,
    fraction_window,
    grid_oracle,
)
from .metrics import aggregate
from .synth import NOMINAL_CAPACITY_AH, generate, reference_nominal_curve

log = logging.getLogger("ocvalign")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CERTIFICATE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _pair(text):
    try:
        lo, hi = (float(x) for x in str(text).split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI, got {text!r}") from None
    if not lo < hi:
        raise argparse.ArgumentTypeError(f"expected LO < HI, got {text!r}")
    return lo, hi


def _window(text):
    """``0.33:0.66`` selects a fractional span; ``10:200`` selects indices."""
    parts = str(text).split(":")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected START:END, got {text!r}")
    if all(p.strip().lstrip("-").isdigit() for p in parts):
        start, end = (int(p) for p in parts)
        if not 0 <= start < end:
            raise argparse.ArgumentTypeError(f"index window needs 0 <= START < END, got {text!r}")
        return ("index", start, end)
    try:
        start, end = (float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected START:END, got {text!r}") from None
    if not 0.0 <= start < end <= 1.0:
        raise argparse.ArgumentTypeError(f"fraction window needs 0 <= START < END <= 1, got {text!r}")
    return ("fraction", start, end)


def _add_common(p):
    p.add_argument("--config", type=Path, help="JSON file of option defaults")
    p.add_argument("--nominal", type=Path, help="nominal curve CSV (soc,ocv_v); built-in reference if omitted")
    p.add_argument("--repair-curve", action="store_true", help="isotonic repair of a noisy nominal curve")
    p.add_argument("--output", "-o", type=Path, help="output path (stdout if omitted)")
    p.add_argument("--verbose", "-v", action="store_true")


def _add_estimation(p):
    p.add_argument("--nominal-capacity", type=float, help=f"nominal capacity in Ah (default {NOMINAL_CAPACITY_AH})")
    p.add_argument("--capacity-bounds", type=_pair, metavar="LO:HI", help="capacity search range in Ah")
    p.add_argument("--z0-bounds", type=_pair, metavar="LO:HI", help="initial SOC search range")
    p.add_argument("--window", type=_window, metavar="START:END", help="fractions (0.33:0.66) or indices (10:200)")
    p.add_argument("--grid", type=int, help="coarse grid points per axis (default 64)")
    p.add_argument("--max-iter", type=int, help="simplex iteration budget (default 500)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ocvalign", description="Battery capacity estimation by OCV-SOC curve alignment.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    parser.commands = sub.choices

    p = sub.add_parser("estimate", help="estimate capacity and initial SOC from a trace")
    _add_common(p)
    _add_estimation(p)
    p.add_argument("--trace", type=Path, help="trace CSV (time_s,current_a,ocv_v)")

    p = sub.add_parser("plot-data", help="write nominal vs aligned aged OCV-SOC series")
    _add_common(p)
    _add_estimation(p)
    p.add_argument("--trace", type=Path)

    p = sub.add_parser("oracle", help="cross-check estimate against an exhaustive grid")
    _add_common(p)
    _add_estimation(p)
    p.add_argument("--trace", type=Path)
    p.add_argument("--oracle-grid", type=int, nargs=2, metavar=("N_CAPACITY", "N_Z0"))

    p = sub.add_parser("validate", help="batch estimate over a manifest and score against actual capacity")
    _add_common(p)
    _add_estimation(p)
    p.add_argument("--manifest", type=Path, help="CSV: cycle_id,trace_path,actual_capacity_ah")
    p.add_argument("--report-csv", type=Path, help="also write the per-cycle table as CSV")
    p.add_argument("--jobs", type=int, help="parallel workers (default 1)")

    p = sub.add_parser("simulate", help="generate a synthetic aged-battery trace")
    _add_common(p)
    p.add_argument("--scenario", type=Path, help="scenario JSON; flags below override it")
    p.add_argument("--capacity", type=float, dest="true_capacity_ah")
    p.add_argument("--z0", type=float, dest="true_z0")
    p.add_argument("--current", type=float, dest="discharge_current_a")
    p.add_argument("--sigma", type=float, dest="ocv_noise_sigma_v")
    p.add_argument("--period", type=float, dest="sample_period_s")
    p.add_argument("--soc-stop", type=float, dest="soc_stop")
    p.add_argument("--seed", type=int)
    return parser


def _parse(parser, argv):
    args = parser.parse_args(argv)
    if args.command is None:
        parser.error("a subcommand is required")
    if args.config is not None:
        doc = io.read_json(args.config)
        subparser = parser.commands[args.command]
        dests = {a.dest for a in subparser._actions}
        converters = {"capacity_bounds": _pair, "z0_bounds": _pair, "window": _window}
        defaults = {}
        for key, value in doc.items():
            dest = key.replace("-", "_")
            if dest not in dests or dest == "config":
                raise UsageError(f"unknown config key {key!r} for {args.command}")
            if dest in converters and isinstance(value, (list, tuple)):
                value = ":".join(str(v) for v in value)
            if dest in converters:
                try:
                    value = converters[dest](value)
                except argparse.ArgumentTypeError as exc:
                    raise UsageError(f"config key {key!r}: {exc}") from None
            elif isinstance(value, str) and dest in {"nominal", "trace", "manifest", "scenario", "output", "report_csv"}:
                value = Path(value) if Path(value).is_absolute() else args.config.parent / value
            defaults[dest] = value
        subparser.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def _nominal(args):
    if args.nominal is None:
        return reference_nominal_curve()
    return io.read_curve_csv(args.nominal, repair=args.repair_curve)


def _settings(args) -> SolverSettings:
    s = SolverSettings()
    if args.grid is not None:
        s = replace(s, grid_capacity=args.grid, grid_z0=args.grid)
    if args.max_iter is not None:
        s = replace(s, max_iter=args.max_iter)
    return s


def _problem(args, nominal, trace_path):
    trace = io.read_trace_csv(trace_path)
    kwargs = {"settings": _settings(args)}
    if args.capacity_bounds is not None:
        kwargs["capacity_bounds"] = args.capacity_bounds
    if args.z0_bounds is not None:
        kwargs["z0_bounds"] = args.z0_bounds
    cn = args.nominal_capacity if args.nominal_capacity is not None else NOMINAL_CAPACITY_AH
    return EstimationProblem.from_trace(nominal, trace, cn, **kwargs)


def _index_window(spec, n):
    if spec is None:
        return None
    kind, start, end = spec
    if kind == "fraction":
        return fraction_window(n, start, end)
    return start, min(end, n)


def _solve(args, problem):
    window = _index_window(args.window, problem.n_residuals)
    if window is None:
        return problem, estimate(problem)
    return problem.subset(*window), estimate_window(problem, window)


def _require(args, *names):
    for name in names:
        if getattr(args, name, None) is None:
            raise UsageError(f"--{name.replace('_', '-')} is required")


def _emit(args, doc):
    text = io.dumps(doc)
    if args.output is None:
        sys.stdout.write(text)
    else:
        Path(args.output).write_text(text, encoding="utf-8")


def _report_flatness(result):
    if not result.converged:
        log.warning("simplex stopped at the iteration budget; result is the best point found")
    if not result.well_conditioned:
        log.warning("flatness indicator %.3g: capacity and initial SOC are poorly separated", result.flatness_indicator)


def cmd_estimate(args) -> int:
    _require(args, "trace")
    problem = _problem(args, _nominal(args), args.trace)
    _, result = _solve(args, problem)
    _report_flatness(result)
    _emit(args, io.result_document(result, trace=str(args.trace)))
    return EXIT_OK


def cmd_plot_data(args) -> int:
    _require(args, "trace", "output")
    problem = _problem(args, _nominal(args), args.trace)
    sub, result = _solve(args, problem)
    _report_flatness(result)
    io.write_alignment_plot_data(result, sub, args.output)
    return EXIT_OK


def cmd_oracle(args) -> int:
    _require(args, "trace")
    problem = _problem(args, _nominal(args), args.trace)
    sub, result = _solve(args, problem)
    n_cap, n_z0 = args.oracle_grid or (200, 200)
    c, z, best = grid_oracle(sub, n_cap, n_z0)
    ok = result.objective <= best + CERTIFICATE_SLACK
    doc = {
        "estimate": io.result_document(result),
        "oracle": {"capacity_ah": c, "z0": z, "objective_v2": best, "grid": [n_cap, n_z0]},
        "certified": ok,
    }
    _emit(args, doc)
    if not ok:
        log.error("certificate failed: estimate objective %.17g > oracle %.17g", result.objective, best)
        return EXIT_CERTIFICATE
    return EXIT_OK


def cmd_validate(args) -> int:
    _require(args, "manifest")
    rows = io.read_manifest(args.manifest)
    if not rows:
        raise EmptyInput(f"{args.manifest}: manifest has no rows")
    nominal = _nominal(args)

    def run(row):
        cycle_id, trace_path, actual = row
        _, result = _solve(args, _problem(args, nominal, trace_path))
        return cycle_id, result, actual

    jobs = args.jobs or 1
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            solved = list(pool.map(run, rows))
    else:
        solved = [run(row) for row in rows]
    report = aggregate((cid, res.capacity, actual) for cid, res, actual in solved)
    doc = report.to_dict()
    for entry, (_, res, _) in zip(doc["per_cycle"], solved):
        entry["result"] = io.result_document(res)
    _emit(args, doc)
    if args.report_csv is not None:
        io.write_report_csv(report, args.report_csv)
    return EXIT_OK


def cmd_simulate(args) -> int:
    doc = io.read_json(args.scenario) if args.scenario is not None else {}
    for key in io.SCENARIO_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            doc[key] = value
    for key in ("true_capacity_ah", "true_z0"):
        if key not in doc:
            raise UsageError(f"scenario needs {key} (flag or --scenario file)")
    base = args.scenario.parent if args.scenario is not None else None
    nominal = _nominal(args) if args.nominal is not None else None
    scenario = io.scenario_from_dict(doc, base_dir=base, nominal=nominal)
    trace = generate(scenario)
    if args.output is None:
        io.write_trace_csv(trace, sys.stdout)
    else:
        io.write_trace_csv(trace, args.output)
    return EXIT_OK


COMMANDS = {
    "estimate": cmd_estimate,
    "plot-data": cmd_plot_data,
    "oracle": cmd_oracle,
    "validate": cmd_validate,
    "simulate": cmd_simulate,
}


def main(argv=None) -> int:
    parser = build_parser()
    logging.basicConfig(format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        try:
            args = _parse(parser, argv)
        except SystemExit as exc:
            return exc.code if isinstance(exc.code, int) else EXIT_USAGE
        log.setLevel(logging.INFO if args.verbose else logging.WARNING)
        return COMMANDS[args.command](args)
    except (UsageError, ParseError) as exc:
        print(f"ocvalign: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OcvAlignError as exc:
        print(f"ocvalign: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"ocvalign: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
