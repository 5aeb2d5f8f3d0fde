#!/usr/bin/env python3
"""
Runs every experiment configuration under config/runs/ and exports the reports.
"""

import os
import sys
import glob
import json
import logging
import argparse
from datetime import datetime

project_root = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, project_root)

from modules.cli import run
from modules.lab_config import DEFAULT_CONFIG_PATH, create_default_config, load_settings
from modules.schemas import COMMANDS

logger = logging.getLogger(__name__)

RUNS_DIR = os.path.join(project_root, 'config', 'runs')


def ensure_directories(settings):
    """Make sure the log and report directories exist."""
    directories = ['logs', settings.output_dir, os.path.dirname(DEFAULT_CONFIG_PATH)]
    for directory in directories:
        os.makedirs(directory, exist_ok=True)


def ensure_config():
    """Make sure the settings file exists."""
    if not os.path.exists(DEFAULT_CONFIG_PATH):
        logger.info("Creating new settings file")
        create_default_config(DEFAULT_CONFIG_PATH)
    return DEFAULT_CONFIG_PATH


def parse_args(argv=None):
    """Parse command line arguments."""
    parser = argparse.ArgumentParser(description='Run all lab experiment configurations')
    parser.add_argument('--only', choices=COMMANDS, help='Only run configurations with this command')
    parser.add_argument('--no-export', action='store_true', help='Do not write report files')
    parser.add_argument('--runs-dir', default=RUNS_DIR, help='Directory holding the JSON configurations')
    return parser.parse_args(argv)


def select_configs(runs_dir, only=None):
    """Configuration paths in lexicographic order, optionally filtered by command."""
    paths = sorted(glob.glob(os.path.join(runs_dir, '*.json')))
    if only is None:
        return paths
    selected = []
    for path in paths:
        try:
            with open(path, 'r', encoding='utf-8') as f:
                command = json.load(f).get('command')
        except (OSError, json.JSONDecodeError) as e:
            logger.error(f"Skipping unreadable configuration {path}: {e}")
            continue
        if command == only:
            selected.append(path)
    return selected


def main(argv=None):
    """Run every selected configuration; the exit code is the worst one seen."""
    args = parse_args(argv)
    settings = load_settings(ensure_config())
    ensure_directories(settings)

    logging.basicConfig(
        level=getattr(logging, settings.log_level, logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(os.path.join('logs', f'lab_suite_{datetime.now().strftime("%Y%m%d")}.log')),
            logging.StreamHandler(sys.stdout)
        ]
    )

    paths = select_configs(args.runs_dir, args.only)
    if not paths:
        logger.warning(f"No configurations found in {args.runs_dir}")
        return 0

    results = {}
    for path in paths:
        logger.info(f"Running {os.path.basename(path)}")
        results[path] = run(path, settings, export=not args.no_export)

    failed = [p for p, code in results.items() if code != 0]
    logger.info(f"Suite finished: {len(paths) - len(failed)} of {len(paths)} configurations passed")
    for path in failed:
        logger.warning(f"  {os.path.basename(path)} exited with {results[path]}")

    # 1 (error) outranks 2 (failed verdict)
    codes = set(results.values())
    return 1 if 1 in codes else (2 if 2 in codes else 0)


if __name__ == "__main__":
    sys.exit(main())
