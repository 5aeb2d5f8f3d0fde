#!/usr/bin/env python3
import argparse
import os
import sys
import logging

# Ensure the project root is in the Python path
project_root = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, project_root)

from modules.cli import list_fixtures, run
from modules.lab_config import DEFAULT_CONFIG_PATH, create_default_config, load_settings

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def setup_logging(log_file, level='INFO'):
    """Log to the configured file and to stdout."""
    handlers = [logging.StreamHandler(sys.stdout)]
    try:
        directory = os.path.dirname(log_file)
        if directory:
            os.makedirs(directory, exist_ok=True)
        handlers.insert(0, logging.FileHandler(log_file))
    except OSError as e:
        print(f"Cannot open log file {log_file}: {e}", file=sys.stderr)
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )


def build_parser():
    parser = argparse.ArgumentParser(description='Non-local energy and Sobolev cut-norm lab')
    parser.add_argument('--settings',
                        help='Path to the lab settings file',
                        default=DEFAULT_CONFIG_PATH)

    subparsers = parser.add_subparsers(dest='command', help='Command to run')

    run_parser = subparsers.add_parser('run', help='Run a JSON experiment configuration')
    run_parser.add_argument('config', help='Path to the run configuration (JSON)')
    run_parser.add_argument('--no-export',
                            action='store_true',
                            help='Do not write report files')

    subparsers.add_parser('list', help='List fixtures and sequence families')
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)

    # Create default settings if they don't exist
    if args.settings == DEFAULT_CONFIG_PATH and not os.path.exists(DEFAULT_CONFIG_PATH):
        create_default_config(DEFAULT_CONFIG_PATH)

    settings = load_settings(args.settings)
    setup_logging(settings.log_file, settings.log_level)

    if args.command == 'list':
        print(list_fixtures())
        sys.exit(0)

    if args.command == 'run':
        if not os.path.exists(args.config):
            logger.error(f"Configuration file not found: {args.config}")
            sys.exit(1)
        code = run(args.config, settings, export=not args.no_export)
        logger.info(f"Finished {args.config} with exit code {code}")
        sys.exit(code)

    parser.print_help()
    sys.exit(1)


if __name__ == "__main__":
    main()
