import argparse
import sys
from typing import List, Optional

from dualdyn.config.settings import setup_logging
from dualdyn.routers import experiment_router


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dualdyn",
        description="Dual-space game dynamics (MD, DMD, AC): simulate, verify rate bounds, reproduce case studies.",
    )
    parser.add_argument("--log-level", default=None, help="overrides DUALDYN_LOG_LEVEL")
    subparsers = parser.add_subparsers(dest="command", required=True)
    experiment_router.register(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)
    return experiment_router.dispatch(args)


if __name__ == "__main__":
    sys.exit(main())
