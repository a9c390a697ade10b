"""Command-line orchestrator: simulate, converge, couple, validate."""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import plan_from_file
from .errors import ConfigError, KacsimError
from .experiments import emit_results, run_convergence_study, run_couple, run_simulate
from .validation import run_validation_suite


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kacsim",
        description="Event-driven collision Monte Carlo and convergence experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, needs_config in (
        ("simulate", True),
        ("converge", True),
        ("couple", True),
        ("validate", False),
    ):
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=needs_config, help="flat key=value config file")
        cmd.add_argument("--seed", type=int, default=None, help="override base_seed")
        cmd.add_argument("--out", default=None, help="override output_path")
        cmd.add_argument("--threads", type=int, default=1, help="worker pool size")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            seed = args.seed if args.seed is not None else 20240801
            report = run_validation_suite(seed=seed)
            out_dir = args.out or "out"
            os.makedirs(out_dir, exist_ok=True)
            path = os.path.join(out_dir, "validation.json")
            with open(path, "w", encoding="ascii", newline="\n") as fh:
                json.dump(report, fh, sort_keys=True, indent=2)
                fh.write("\n")
            for check in report["checks"]:
                status = "PASS" if check["passed"] else "FAIL"
                print(f"{status} {check['name']}: {check['detail']}")
            print(f"report written to {path}")
            return 0 if report["all_passed"] else 1

        plan = plan_from_file(args.config, args.seed, args.out)
        if plan.mode != args.command:
            raise ConfigError(
                f"config mode {plan.mode!r} does not match subcommand {args.command!r}"
            )
        if args.command == "simulate":
            csv_path, json_path = run_simulate(plan, threads=args.threads)
        elif args.command == "converge":
            report = run_convergence_study(plan, threads=args.threads)
            csv_path, json_path = emit_results(report, plan.output_path)
            if report.fitted_slope is not None:
                print(f"fitted slope {report.fitted_slope:.4f} (stderr {report.slope_stderr:.4f})")
            else:
                print("slope undefined: " + "; ".join(report.diagnostics))
        else:
            csv_path, json_path = run_couple(plan, threads=args.threads)
        print(f"wrote {csv_path}")
        print(f"wrote {json_path}")
        return 0
    except KacsimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
