import json
import os
import sys
import unittest
from unittest.mock import patch

import pytest

# Add the parent directory to the path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app import COMMANDS, build_parser, main
from experiments.experiment_runner import EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, exit_code_for
from planning.exceptions import (
    ConfigurationError, OracleLimitError, ParameterError, StationaryConvergenceError, UnreachableRequestError,
)

CONFIGS = os.path.join(os.path.dirname(__file__), '..', 'instances', 'configs')


class TestParser(unittest.TestCase):

    def test_every_subcommand_is_registered(self):
        self.assertEqual(sorted(COMMANDS), ['bounds', 'coalition', 'oracle-check', 'plan', 'sweep'])

    def test_plan_arguments(self):
        args = build_parser().parse_args(['plan', '--config', 'c.json', '--seed', '4', '--exhaustive'])

        self.assertEqual(args.command, 'plan')
        self.assertEqual(args.config, 'c.json')
        self.assertEqual(args.out, 'out')
        self.assertEqual(args.seed, 4)
        self.assertTrue(args.exhaustive)
        self.assertFalse(args.baseline)

    def test_config_is_required(self):
        with self.assertRaises(SystemExit):
            build_parser().parse_args(['plan'])

    def test_unknown_subcommand(self):
        with self.assertRaises(SystemExit):
            build_parser().parse_args(['optimize', '--config', 'c.json'])


class TestExitCodes(unittest.TestCase):

    def test_configuration_and_validation_errors(self):
        self.assertEqual(exit_code_for(ConfigurationError("bad")), EXIT_CONFIG)
        self.assertEqual(exit_code_for(ParameterError("bad")), EXIT_CONFIG)

    def test_solver_errors(self):
        self.assertEqual(exit_code_for(UnreachableRequestError("no path")), EXIT_SOLVER)
        self.assertEqual(exit_code_for(OracleLimitError("too big")), EXIT_SOLVER)
        self.assertEqual(exit_code_for(StationaryConvergenceError("slow")), EXIT_SOLVER)
        self.assertEqual(exit_code_for(RuntimeError("boom")), EXIT_SOLVER)


class TestMain:

    def test_prints_the_result(self, tmp_path, capsys):
        code = main(['plan', '--config', os.path.join(CONFIGS, 'micro_plan.json'), '--out', str(tmp_path)])

        assert code == EXIT_OK
        result = json.loads(capsys.readouterr().out)
        assert result['total_cost'] == pytest.approx(15.0)

    def test_missing_config(self, tmp_path, capsys):
        code = main(['plan', '--config', str(tmp_path / 'missing.json'), '--out', str(tmp_path)])

        assert code == EXIT_CONFIG
        err = capsys.readouterr().err
        error = json.loads(err[err.index('{\n'):])
        assert error['error_type'] == 'ConfigurationError'

    def test_runner_failure_code_is_returned(self, tmp_path):
        with patch.dict(COMMANDS, {'plan': lambda runner: ({'success': False}, EXIT_SOLVER)}):
            code = main(['plan', '--config', os.path.join(CONFIGS, 'micro_plan.json'), '--out', str(tmp_path)])
        assert code == EXIT_SOLVER


if __name__ == '__main__':
    unittest.main()
