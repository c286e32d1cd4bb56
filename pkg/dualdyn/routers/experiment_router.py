import argparse
import json
import logging

from dualdyn.services.ExperimentService import REPRODUCTION_CASES, ExperimentService
from dualdyn.utils.exceptions import BOUND_VIOLATION_EXIT_CODE, DualDynError
from dualdyn.utils.functions import to_jsonable

logger = logging.getLogger(__name__)


def _print_json(payload) -> None:
    print(json.dumps(to_jsonable(payload), indent=2))


def run_command(args: argparse.Namespace) -> int:
    """Exit 0 when the bound holds (or none is configured), 2 on a violation."""
    service = ExperimentService(args.output_dir)
    result = service.run(service.load_config(args.config))
    _print_json(result.model_dump(exclude={"reports"}))
    return result.exit_code


def reproduce_command(args: argparse.Namespace) -> int:
    """Exit 4 if any sub-run failed, 2 if any bound was violated, else 0."""
    service = ExperimentService(args.output_dir)
    summary = service.reproduce(args.case)
    _print_json(summary["comparisons"])
    if summary["failed"]:
        logger.error("❌ failed runs: %s", ", ".join(summary["failed"]))
        return 4
    violated = [run["name"] for run in summary["runs"] if run["passed"] is False]
    if violated:
        logger.error("❌ bound violated in: %s", ", ".join(violated))
        return BOUND_VIOLATION_EXIT_CODE
    return 0


def analyze_command(args: argparse.Namespace) -> int:
    service = ExperimentService(args.output_dir)
    report = service.analyze(service.load_config(args.config))
    _print_json(report.model_dump())
    return 0


def solve_ne_command(args: argparse.Namespace) -> int:
    service = ExperimentService(args.output_dir)
    _print_json(service.solve_equilibria(service.load_config(args.config)))
    return 0


def register(subparsers) -> None:
    """Attach the experiment subcommands to the root parser."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output-dir", default=None,
                        help="artifact folder (default: DUALDYN_OUTPUT_DIR or ./output)")

    run = subparsers.add_parser("run", parents=[common], help="integrate one experiment and verify its bound")
    run.add_argument("config", help="experiment file (key=value)")
    run.set_defaults(handler=run_command)

    reproduce = subparsers.add_parser("reproduce", parents=[common], help="run a pinned case study")
    reproduce.add_argument("case", help="one of: " + ", ".join(sorted(REPRODUCTION_CASES)))
    reproduce.set_defaults(handler=reproduce_command)

    analyze = subparsers.add_parser("analyze", parents=[common], help="estimate monotonicity moduli by sampling")
    analyze.add_argument("config")
    analyze.set_defaults(handler=analyze_command)

    solve = subparsers.add_parser("solve-ne", parents=[common], help="compute the NE and perturbed NE")
    solve.add_argument("config")
    solve.set_defaults(handler=solve_ne_command)


def dispatch(args: argparse.Namespace) -> int:
    """Run the selected handler, mapping library errors to exit codes."""
    try:
        return args.handler(args)
    except DualDynError as e:
        logger.error("❌ %s: %s", type(e).__name__, e.detail)
        return e.exit_code
