#!/usr/bin/env python3
"""
Command-line entry point for the antifragile RL pipeline.

Usage:
    antifragile-rl train-ensemble --profile fast --out runs/demo
    antifragile-rl calibrate --profile fast --out runs/demo
    antifragile-rl evaluate --profile fast --out runs/demo
    antifragile-rl bandit-sim --seed 3
"""

import argparse
import logging
import sys
from typing import List, Optional

from .exceptions import (
    CalibrationMissingError,
    CheckpointMissingError,
    ConfigError,
    EnsembleEmptyError,
    TrainingDivergedError,
)
from .harness.config import DEFAULT_PROFILE, PROFILES, load_config

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_MISSING_INPUT = 1
EXIT_CONFIG = 2
EXIT_DIVERGED = 3

COMMANDS = {
    'train-ensemble': 'Train the entropy-gap ensemble and the benchmark policies',
    'calibrate': 'Measure value-distribution shifts per attack strength',
    'evaluate': 'Evaluate fixed, benchmark and switched policies under attack',
    'bandit-sim': 'Simulate sampler regret on a synthetic reward schedule',
}


def _add_common_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--config', help='JSON configuration file layered over the profile')
    parser.add_argument('--seed', type=int, help='Master seed (overrides the configuration)')
    parser.add_argument('--out', help='Output directory (overrides the configuration)')
    parser.add_argument('--profile', choices=PROFILES, default=DEFAULT_PROFILE,
                        help=f'Built-in profile (default: {DEFAULT_PROFILE})')
    parser.add_argument('--workers', type=int, help='Worker processes for seed cells')
    parser.add_argument('--verbose', '-v', action='store_true', help='Debug logging')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='antifragile-rl',
        description='Antifragile robust RL for UAV deconfliction under observation attacks'
    )
    subparsers = parser.add_subparsers(dest='command', help='Command to run')
    for name, help_text in COMMANDS.items():
        _add_common_options(subparsers.add_parser(name, help=help_text))
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main function for CLI. Returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return EXIT_OK

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

    # deferred so --help stays fast
    from .harness import experiments

    overrides = {'seed': args.seed, 'output_dir': args.out, 'workers': args.workers}
    try:
        config = load_config(args.config, args.profile, overrides)
        summary = experiments.run_stage(args.command, config)
    except ConfigError as e:
        logger.error(str(e))
        return EXIT_CONFIG
    except TrainingDivergedError as e:
        logger.error(f"Training diverged: {e}")
        return EXIT_DIVERGED
    except (EnsembleEmptyError, CheckpointMissingError, CalibrationMissingError) as e:
        logger.error(str(e))
        return EXIT_MISSING_INPUT

    logger.info(f"{args.command} finished: {summary}")
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
