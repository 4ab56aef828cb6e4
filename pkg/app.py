# app.py
# Command-line entry point for the QKD pool planner

import argparse
import json
import logging
import os
import sys
from typing import List, Optional

from dotenv import load_dotenv

from experiments.config import ExperimentConfig
from experiments.experiment_runner import ExperimentRunner, exit_code_for
from planning.exceptions import PlanningError

# Load environment variables from .env file
load_dotenv()

# Configure logging
logging.basicConfig(level=os.getenv('LOG_LEVEL', 'INFO').upper(),
                    format='%(asctime)s %(levelname)s %(name)s: %(message)s')
logger = logging.getLogger(__name__)

COMMANDS = {
    'plan': ExperimentRunner.run_plan,
    'sweep': ExperimentRunner.run_sweep,
    'bounds': ExperimentRunner.run_bounds,
    'coalition': ExperimentRunner.run_coalition,
    'oracle-check': ExperimentRunner.run_oracle_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='qkd-pool-planner',
        description='Plan QKD and key-management wavelength pools under uncertain key demand.')
    subparsers = parser.add_subparsers(dest='command', required=True)
    for name in COMMANDS:
        sub = subparsers.add_parser(name)
        sub.add_argument('--config', required=True, help='Experiment config (JSON)')
        sub.add_argument('--out', default='out', help='Output directory')
        sub.add_argument('--seed', type=int, default=None, help='Override the config seed')
        sub.add_argument('--exhaustive', action='store_true', help='Force exhaustive route search')
        sub.add_argument('--baseline', action='store_true',
                         help='Add the shortest-path on-demand baseline column')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run one subcommand.

    Returns:
        0 on success, 2 on configuration errors, 3 on solver errors
    """
    args = build_parser().parse_args(argv)
    try:
        config = ExperimentConfig.load(args.config, seed=args.seed)
    except PlanningError as e:
        logger.error(f"Could not load {args.config}: {e}")
        print(e.to_json(), file=sys.stderr)
        return exit_code_for(e)

    runner = ExperimentRunner(config, args.out, exhaustive=args.exhaustive, baseline=args.baseline)
    result, code = COMMANDS[args.command](runner)
    print(json.dumps(result, indent=2, sort_keys=True, default=str))
    return code


if __name__ == '__main__':
    sys.exit(main())
