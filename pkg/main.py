#!/usr/bin/env python3
"""
Main entry point for the claim/release mutex verification harness.

Subcommands:
    explore     exhaustively explore every interleaving and check the oracles
    stress      run the mutex on the cooperative multi-runner runtime
    cas-report  per-scenario CAS counts against the resolution table

Exit codes: 0 clean, 1 property violation, 2 budget or timeout, 64 usage.
"""

import argparse
import logging
import sys

from config import load_config
from pipeline import ConfigValidator, ExplorationManager

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_INCOMPLETE = 2
EXIT_USAGE = 64

EXIT_CODES = {
    'success': EXIT_OK,
    'violation': EXIT_VIOLATION,
    'incomplete': EXIT_INCOMPLETE,
    'error': EXIT_INCOMPLETE,
}


class UsageError(Exception):
    pass


class ArgumentParser(argparse.ArgumentParser):
    """argparse parser whose usage errors surface as UsageError."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=str, default=None,
                        help='Path to configuration file (default: config/config.yaml)')
    common.add_argument('--log-level', type=str, default=None,
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'],
                        help='Override logging.level from the configuration')
    common.add_argument('--output', type=str, default=None,
                        help='Report directory (default: report.output_dir)')

    parser = ArgumentParser(
        prog='main.py',
        description='Claim/release mutex verification harness',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Exhaustive exploration, 2 processes, one claim/release cycle each
  python main.py explore --processes 2 --cycles 1

  # Check that the oracles catch a broken protocol
  python main.py explore --processes 2 --cycles 1 --mutant grant-on-wait

  # 8 processes x 10000 cycles on 4 runner threads
  python main.py stress --processes 8 --iterations 10000 --runners 4 --seed 7

  # Resolution table from a fresh exploration or from an earlier report
  python main.py cas-report
  python main.py cas-report --input results/exploration.jsonl
        """
    )
    subcommands = parser.add_subparsers(dest='subcommand', metavar='{explore,stress,cas-report}')
    subcommands.required = True

    explore = subcommands.add_parser(
        'explore', parents=[common], help='Exhaustive interleaving exploration')
    explore.add_argument('--processes', type=int, help='Number of processes (1-4)')
    explore.add_argument('--cycles', type=int, help='Claim/release cycles per process (1-2)')
    explore.add_argument('--state-budget', type=int, help='Distinct states before giving up')
    explore.add_argument('--long-run', action='store_true',
                         help='Allow 4 processes (may take an hour)')
    explore.add_argument('--oracles', type=str,
                         help='Comma-separated oracle names (default: all)')
    explore.add_argument('--no-witness', action='store_true',
                         help='Skip the nondeterminism witness search')
    explore.add_argument('--progress', action='store_true', help='Show a progress bar')
    explore.add_argument('--mutant', type=str, help='Explore a deliberately broken protocol')

    stress = subcommands.add_parser(
        'stress', parents=[common], help='Threaded stress test on k runners')
    stress.add_argument('--processes', type=int, help='Number of processes')
    stress.add_argument('--iterations', type=int, help='Claim/release cycles per process')
    stress.add_argument('--runners', type=int, help='Runner threads')
    stress.add_argument('--seed', type=int, help='Seed for spawn order and pauses')
    stress.add_argument('--repeats', type=int, help='Runs, with seeds seed..seed+repeats-1')
    stress.add_argument('--timeout', type=float, help='Seconds per run before giving up')
    stress.add_argument('--mutant', type=str, help='Stress a deliberately broken protocol')

    cas = subcommands.add_parser(
        'cas-report', parents=[common], help='CAS counts per resolution scenario')
    cas.add_argument('--processes', type=int, help='Number of processes (default 3)')
    cas.add_argument('--cycles', type=int, help='Claim/release cycles per process (default 2)')
    cas.add_argument('--input', type=str, help='Derive the table from this report file')
    cas.add_argument('--mutant', type=str, help='Report on a deliberately broken protocol')
    return parser


def apply_overrides(config: dict, args) -> dict:
    """Fold command-line flags into the configuration."""
    if args.log_level:
        config['logging']['level'] = args.log_level
    if args.output:
        config['report']['output_dir'] = args.output
    if getattr(args, 'mutant', None):
        config['mutant'] = args.mutant

    if args.subcommand == 'explore':
        section = config['explorer']
        for flag, key in (('processes', 'processes'), ('cycles', 'cycles'),
                          ('state_budget', 'state_budget')):
            if getattr(args, flag) is not None:
                section[key] = getattr(args, flag)
        if args.long_run:
            section['long_run'] = True
        if args.oracles:
            section['oracles'] = [name.strip() for name in args.oracles.split(',') if name.strip()]
        if args.no_witness:
            section['witness'] = False
        if args.progress:
            section['show_progress'] = True
    elif args.subcommand == 'stress':
        section = config['stress']
        for flag, key in (('processes', 'processes'), ('iterations', 'iterations'),
                          ('runners', 'runners'), ('seed', 'seed'), ('repeats', 'repeats'),
                          ('timeout', 'timeout_s')):
            if getattr(args, flag) is not None:
                section[key] = getattr(args, flag)
    else:
        section = config['cas_report']
        for flag in ('processes', 'cycles'):
            if getattr(args, flag) is not None:
                section[flag] = getattr(args, flag)
    return config


def main(argv=None):
    """Main execution function."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE

    try:
        config = apply_overrides(load_config(args.config), args)
    except (OSError, ValueError) as e:
        print(f"main.py: error: {e}", file=sys.stderr)
        return EXIT_USAGE

    logging.basicConfig(
        level=getattr(logging, config['logging']['level'], logging.INFO),
        format=config['logging']['format'],
    )

    is_valid, errors = ConfigValidator.validate(config)
    if not is_valid:
        logger.error("Configuration validation failed!")
        for error in errors:
            logger.error(f"  - {error}")
        return EXIT_USAGE

    manager = ExplorationManager(config)
    logger.info("=" * 80)
    logger.info(f"RUNNING {args.subcommand.upper()}")
    logger.info("=" * 80)

    if args.subcommand == 'explore':
        result = manager.execute_explore()
    elif args.subcommand == 'stress':
        result = manager.execute_stress()
    else:
        result = manager.execute_cas_report(args.input)
        if result['summary'].get('table'):
            print(result['summary']['table'], end='')

    summary = result['summary']
    if result['status'] == 'success':
        logger.info("=" * 80)
        logger.info(f"{args.subcommand.upper()} PASSED")
        logger.info("=" * 80)
    else:
        logger.error("=" * 80)
        logger.error(f"{args.subcommand.upper()} {result['status'].upper()}")
        logger.error(f"Error: {result.get('error_message')}")
        logger.error("=" * 80)

    for key, value in summary.items():
        if key in ('table', 'report', 'runs', 'record'):
            continue
        logger.info(f"  {key}: {value}")
    if result['exported_files']:
        logger.info("Exported files:")
        for filepath in result['exported_files']:
            logger.info(f"  {filepath}")

    return EXIT_CODES[result['status']]


if __name__ == '__main__':
    sys.exit(main())
