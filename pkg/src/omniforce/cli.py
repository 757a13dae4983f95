"""Command-line interface.

Subcommands: ``run``, ``batch``, ``calibrate``, ``replay``, ``presets``.
Exit codes: 0 success, 2 configuration error, 3 simulation instability.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError
from .runner import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_UNSTABLE,
    batch,
    calibrate,
    default_out_dir,
    extract_columns,
    replay,
    run,
)
from .simulator import SimulationUnstable


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="omniforce",
        description="Collision force estimation and reaction testbed for a "
                    "three-omniwheel base")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario config")
    p_run.add_argument("--config", required=True, help="scenario YAML path")
    p_run.add_argument("--out", default=None, help="output directory "
                       "(default $OMNIFORCE_OUT or ./out)")
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the config's random seed")

    p_batch = sub.add_parser("batch", help="run every config matching a glob")
    p_batch.add_argument("--config", required=True, help="glob of scenario YAMLs")
    p_batch.add_argument("--out", default=None)
    p_batch.add_argument("--seed", type=int, default=None)
    p_batch.add_argument("--parallel", type=int, default=1)

    p_cal = sub.add_parser("calibrate", help="fit roller friction parameters")
    p_cal.add_argument("--config", required=True)
    p_cal.add_argument("--out", default=None)
    p_cal.add_argument("--measured", default=None,
                       help="measured torque CSV (trace schema); defaults to "
                            "self-generated simulator data")

    p_rep = sub.add_parser("replay", help="recompute a report from a trace")
    p_rep.add_argument("--config", required=True)
    p_rep.add_argument("--trace", required=True)
    p_rep.add_argument("--out", default=None)
    p_rep.add_argument("--columns", default=None,
                       help="comma-separated trace columns to print instead")

    p_pre = sub.add_parser("presets", help="emit the paper-suite scenario configs")
    p_pre.add_argument("--out", default=None, help="directory for the configs "
                       "(default <out>/presets)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            res = run(args.config, out_dir=args.out, seed=args.seed)
            print(f"{res.scenario_id}: wrote {res.trace_path}")
            for key, val in res.report.rows():
                print(f"  {key} = {val}")
        elif args.command == "batch":
            result = batch(args.config, out_dir=args.out,
                           parallel=args.parallel, seed=args.seed)
            sys.stdout.write(result.summary_text())
        elif args.command == "calibrate":
            res = calibrate(args.config, out_dir=args.out,
                            measured_csv=args.measured)
            print(f"{res.scenario_id}: {res.report.status}")
        elif args.command == "replay":
            if args.columns:
                sys.stdout.write(
                    extract_columns(args.trace, args.columns.split(",")))
            else:
                res = replay(args.config, args.trace, out_dir=args.out)
                for key, val in res.report.rows():
                    print(f"{key} = {val}")
        elif args.command == "presets":
            from .presets import write_presets
            dest = Path(args.out) if args.out else default_out_dir() / "presets"
            paths = write_presets(dest)
            for path in paths:
                print(path)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationUnstable as exc:
        print(f"simulation unstable: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
