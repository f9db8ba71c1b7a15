"""Command-line entry point: ``opcorona {check,project,invert,geninvert,all} SCENARIO``."""
from __future__ import annotations

import argparse
import json
import sys

from .disk import GridError
from .field import FieldError
from .report import TASKS, ScenarioError, bundled_scenarios, load_scenario, run_scenario

EXIT_PASS, EXIT_FAIL, EXIT_INVALID = 0, 1, 2


def build_parser():
    parser = argparse.ArgumentParser(
        prog="opcorona",
        description="Corona-problem checks and constructions for matrix polynomials on the disk.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "check": "corona constants, projection identities, witness and necessity checks",
        "project": "Hankel-form pipeline producing a bounded analytic projection",
        "invert": "left inverse from the certified analytic projection",
        "geninvert": "generalized inverse from analytic range and kernel projections",
        "all": "every task listed in the scenario",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("scenario", help=f"scenario JSON path or bundled name ({', '.join(bundled_scenarios())})")
        p.add_argument("--grid", nargs=2, type=int, metavar=("R", "A"), help="radial and angular node counts")
        p.add_argument("--modes", type=int, metavar="N", help="test-vector mode cutoff")
        p.add_argument("--symbol-modes", type=int, metavar="N'", help="symbol mode cutoff (default 2N)")
        p.add_argument("--dilate", type=float, metavar="r", help="run on F(r z)")
        p.add_argument("--witness", choices=["trace", "logdet"], help="subharmonic witness kind")
        p.add_argument("--out", metavar="DIR", help="write report.json, timings.json and CSV tables here")
        p.add_argument("--seed", type=int, metavar="S", help="seed for randomized diagnostics")
    return parser


def _apply_overrides(scenario, args):
    changes = {}
    if args.grid is not None:
        changes["radial_nodes"], changes["angular_count"] = args.grid
    if args.modes is not None:
        changes["modes"] = args.modes
    if args.symbol_modes is not None:
        changes["symbol_modes"] = args.symbol_modes
    if args.dilate is not None:
        changes["dilation"] = args.dilate
    if args.witness is not None:
        changes["witness"] = args.witness
    if args.seed is not None:
        changes["seed"] = args.seed
    return scenario.replace(**changes) if changes else scenario


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        scenario = _apply_overrides(load_scenario(args.scenario), args)
        tasks = scenario.tasks if args.command == "all" else [args.command]
        report = run_scenario(scenario, tasks, out_dir=args.out)
    except (ScenarioError, GridError, FieldError) as exc:
        print(f"opcorona: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    for name, status in report.statuses.items():
        print(f"{name:10s} {status}")
    if args.out is None:
        print(json.dumps({k: v["status"] for k, v in report.as_dict()["tasks"].items()}))
    return EXIT_PASS if report.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
