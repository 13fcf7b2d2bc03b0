"""Command line entry point: spinrim {synth,evaluate,analyze,report}."""

import argparse
import logging
import sys
from typing import List, Optional

from spinrim.dephasing import HashMismatchError
from spinrim.dynamics import NumericalIntegrityError
from spinrim.pipeline import stages
from spinrim.pipeline.config import ConfigError, PipelineConfig

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

VERBS = {
    "synth": stages.cmd_synth,
    "evaluate": stages.cmd_evaluate,
    "analyze": stages.cmd_analyze,
    "report": stages.cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinrim",
        description="Robustness of spin network controllers to dephasing.",
    )
    parser.add_argument("verb", choices=sorted(VERBS),
                        help="Pipeline stage to run.")
    parser.add_argument("--config", help="JSON configuration file.")
    parser.add_argument("--seed", type=int,
                        help="Seed of the controller optimization.")
    parser.add_argument("--dephasing-seed", type=int,
                        help="Seed of the dephasing sets.")
    parser.add_argument("--out", dest="out_dir", help="Output directory.")
    parser.add_argument("--jobs", type=int, help="Number of workers.")
    parser.add_argument(
        "--problems",
        help="Comma separated problems such as chain:5,ring:6:4:A.",
    )
    parser.add_argument("--delta-max", type=float,
                        help="Largest dephasing strength.")
    parser.add_argument("--delta-steps", type=int,
                        help="Intervals of the strength grid.")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="-v for INFO, -vv for DEBUG.")
    return parser


def load_config(args: argparse.Namespace) -> PipelineConfig:
    config = PipelineConfig.from_file(args.config) if args.config \
        else PipelineConfig()
    return config.with_overrides(
        synth_seed=args.seed,
        dephasing_seed=args.dephasing_seed,
        out_dir=args.out_dir,
        jobs=args.jobs,
        problems=args.problems,
        delta_max=args.delta_max,
        delta_steps=args.delta_steps,
    )


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as error:
        return EXIT_OK if error.code == 0 else EXIT_CONFIG

    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose,
                                                      logging.DEBUG)
    logging.basicConfig(
        level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s"
    )

    try:
        config = load_config(args)
        result = VERBS[args.verb](config)
    except (ConfigError, FileNotFoundError) as error:
        logger.error("%s", error)
        return EXIT_CONFIG
    except (NumericalIntegrityError, HashMismatchError) as error:
        logger.error("%s", error)
        return EXIT_NUMERICAL
    except Exception:
        logger.exception("spinrim %s failed.", args.verb)
        return EXIT_FAILURE

    if isinstance(result, str):
        print(result)
    else:
        for path in result:
            logger.info("Wrote %s", path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
