"""Command-line entry point: ``wtaplan --builtin-case 1 --out run1``."""
from __future__ import annotations

import argparse
import logging
import sys

from .pipeline import RunConfig, StageError, run_pipeline
from .scenario import ScenarioError, build_w_formation_scenario, load_scenario_file


def _budget(text: str) -> tuple[int | None, float | None]:
    try:
        nodes, seconds = text.split(",")
        return (int(nodes) if nodes else None, float(seconds) if seconds else None)
    except ValueError:
        raise argparse.ArgumentTypeError("expected NODES,SECONDS (either may be empty)") from None


def parse_args(argv=None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="wtaplan",
        description="Plan interference-free weapon-target assignments over predicted intercept points.",
    )
    src = parser.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", metavar="PATH", help="YAML scenario file")
    src.add_argument("--builtin-case", type=int, choices=(1, 2), help="W-formation case 1 or 2")
    parser.add_argument("--no-interference", action="store_true",
                        help="skip the interference table and solve without interference constraints")
    parser.add_argument("--compare", action="store_true",
                        help="solve both with and without interference constraints")
    parser.add_argument("--seed", type=int, default=0, help="seed for target impact offsets (default: 0)")
    parser.add_argument("--out", default="wtaplan-out", help="output directory (default: wtaplan-out)")
    parser.add_argument("--solver-budget", type=_budget, default=(200_000, 600.0), metavar="NODES,SECONDS",
                        help="branch-and-bound limits (default: 200000,600)")
    parser.add_argument("--table-include-all", action="store_true",
                        help="also check same-farm pairs already excluded by the launch delay")
    parser.add_argument("--dump-trajectories", action="store_true",
                        help="write every feasible engagement to trajectories/")
    parser.add_argument("--workers", type=int, default=1, help="threads for the interference table")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser.parse_args(argv)


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.scenario:
            scenario = load_scenario_file(args.scenario)
        else:
            scenario = build_w_formation_scenario(args.builtin_case)
    except ScenarioError as exc:
        for err in exc.errors:
            print(f"scenario error: {err}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 2

    max_nodes, seconds = args.solver_budget
    config = RunConfig(
        seed=args.seed,
        interference=not args.no_interference,
        compare=args.compare,
        include_all=args.table_include_all,
        dump_trajectories=args.dump_trajectories,
        max_nodes=max_nodes,
        time_limit=seconds,
        workers=args.workers,
    )
    try:
        report = run_pipeline(scenario, args.out, config)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    print(f"targets: {report.n_targets}  PIPs: {report.n_pips}  output: {args.out}")
    if report.interference:
        for kind in ("physical", "seeker"):
            k = report.interference[kind]
            print(f"{kind:>8} pairs: {k['total']} ({k['cross_farm']} cross-farm, "
                  f"{100 * k['cross_farm_fraction']:.2f}% of farm-vs-farm table)")
    for label, sol in report.solutions.items():
        status = "optimal" if sol["optimal"] else f"gap {sol['gap']:g}"
        print(f"{label}: {sol['weapons_assigned']} weapons, objective {sol['objective']:g} ({status})")
    for stage, secs in report.timings.items():
        print(f"  {stage}: {secs:.2f} s", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
