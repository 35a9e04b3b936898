"""Command line front end: validate, run and sweep scenario files."""

from __future__ import annotations

import argparse
import copy
import csv
import json
import os
import sys
from pathlib import Path

from .errors import OptosyncError, ParseError, UnknownParameter, ValidationError
from .metrics import SUMMARY_COLUMNS
from .runner import run_scenario
from .scenario import (
    bundled_names,
    load_scenario,
    resolve_scenario_path,
    set_by_path,
    validate_scenario,
)

EXIT_OK = 0
EXIT_SCENARIO = 2   # unreadable, unparseable or invalid scenario
EXIT_RUNTIME = 3    # scenario was valid but the run failed


def _default_out() -> str:
    return os.environ.get("OPTOSYNC_OUT_DIR", "optosync-out")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="optosync",
        description="Deterministic simulator for synchronized optical switching.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "scenario",
        help="scenario file path, or the bare name of a bundled scenario "
             f"({', '.join(bundled_names())})",
    )

    sub.add_parser("validate", parents=[common],
                   help="check a scenario file and report every problem")

    run_p = sub.add_parser("run", parents=[common], help="run one scenario")
    run_p.add_argument("--seed", type=int, default=None,
                       help="override the scenario's root seed")
    run_p.add_argument("--out", default=None,
                       help="output directory (default: $OPTOSYNC_OUT_DIR or ./optosync-out)")
    run_p.add_argument("--no-trace", action="store_true",
                       help="skip writing the full event trace CSV")

    sweep_p = sub.add_parser("sweep", parents=[common],
                             help="run a scenario once per parameter value")
    sweep_p.add_argument("--param", required=True,
                         help="dotted path into the scenario document, "
                              "e.g. control.scheduling_overhead")
    sweep_p.add_argument("--values", required=True,
                         help="comma-separated values; each is tried as JSON "
                              "first, else kept as a string")
    sweep_p.add_argument("--seed", type=int, default=None,
                         help="base seed; run i uses base + i")
    sweep_p.add_argument("--out", default=None, help="output directory")
    sweep_p.add_argument("--no-trace", action="store_true",
                         help="skip writing per-run event trace CSVs")
    return parser


def _load(path_arg: str):
    try:
        return load_scenario(path_arg)
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_SCENARIO)


def _print_report(report) -> None:
    print(f"scenario {report.scenario_id} seed {report.seed} "
          f"experiment {report.experiment}")
    for key in sorted(report.headlines):
        print(f"  {key} {report.headlines[key]}")
    print(f"  wall_seconds {report.wall_seconds:.3f}")
    for name in sorted(report.csv_paths):
        print(f"  wrote {report.csv_paths[name]}")


def _cmd_validate(args) -> int:
    scenario = _load(args.scenario)
    print(f"ok: {scenario.scenario_id} ({scenario.experiment})")
    return EXIT_OK


def _cmd_run(args) -> int:
    scenario = _load(args.scenario)
    out = Path(args.out if args.out is not None else _default_out())
    out = out / scenario.scenario_id
    try:
        report = run_scenario(
            scenario, out, seed=args.seed, write_trace=not args.no_trace
        )
    except OptosyncError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    _print_report(report)
    return EXIT_OK


def _parse_sweep_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _cmd_sweep(args) -> int:
    base = _load(args.scenario)
    values = [_parse_sweep_value(v.strip()) for v in args.values.split(",")]
    if not values:
        print("error: --values is empty", file=sys.stderr)
        return EXIT_SCENARIO
    out_root = Path(args.out if args.out is not None else _default_out())
    out_root = out_root / base.scenario_id / f"sweep-{args.param}"
    base_seed = base.root_seed if args.seed is None else args.seed

    rows = []
    for index, value in enumerate(values):
        doc = copy.deepcopy(base.raw)
        try:
            set_by_path(doc, args.param, value)
            scenario = validate_scenario(doc)
        except (UnknownParameter, ValidationError) as exc:
            print(f"error at value {value!r}: {exc}", file=sys.stderr)
            return EXIT_SCENARIO
        run_dir = out_root / f"{index:02d}_{value}"
        try:
            report = run_scenario(
                scenario, run_dir,
                seed=base_seed + index,
                write_trace=not args.no_trace,
            )
        except OptosyncError as exc:
            print(f"run failed at value {value!r}: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
        _print_report(report)
        row = {"param": args.param, "value": value,
               "scenario_id": report.scenario_id, "seed": report.seed,
               "experiment": report.experiment}
        for key in SUMMARY_COLUMNS:
            if key in report.headlines:
                row[key] = report.headlines[key]
        rows.append(row)

    out_root.mkdir(parents=True, exist_ok=True)
    summary = out_root / "sweep_summary.csv"
    columns = ["param", "value"] + list(SUMMARY_COLUMNS)
    with open(summary, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {summary}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.verb == "validate":
        return _cmd_validate(args)
    if args.verb == "run":
        return _cmd_run(args)
    return _cmd_sweep(args)


if __name__ == "__main__":
    sys.exit(main())
