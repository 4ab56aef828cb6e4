#!/usr/bin/env python3
"""
End-to-end tests of the command line: exit codes, report contents,
byte-identical reruns and the runtime of the fourteen-node plan.
"""

import json
import os
import sys
import time
from pathlib import Path

import pandas as pd
import pytest

# Add parent directory to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '../..'))

from app import main

ROOT = Path(__file__).parent.parent.parent
CONFIGS = ROOT / 'instances' / 'configs'
FIXTURES = ROOT / 'fixtures'


def run(command, config, out, *extra):
    return main([command, '--config', str(config), '--out', str(out), *extra])


def snapshot(directory: Path):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


class TestExitCodes:

    def test_success(self, tmp_path):
        assert run('plan', CONFIGS / 'micro_plan.json', tmp_path) == 0
        assert (tmp_path / 'plan.json').exists()

    def test_missing_config_file(self, tmp_path):
        assert run('plan', tmp_path / 'nope.json', tmp_path) == 2

    def test_malformed_config(self, tmp_path):
        config = tmp_path / 'broken.json'
        config.write_text('{"topology": ', encoding='utf-8')
        assert run('plan', config, tmp_path / 'out') == 2

    def test_invalid_topology(self, tmp_path):
        config = tmp_path / 'loop.json'
        config.write_text(json.dumps({
            "topology": {"nodes": ["1", "2"], "links": [{"a": "1", "b": "1", "km": 5}]},
        }), encoding='utf-8')
        assert run('plan', config, tmp_path / 'out') == 2

    def test_unreachable_request(self, tmp_path, capsys):
        assert run('plan', FIXTURES / 'unreachable_config.json', tmp_path) == 3
        result = json.loads(capsys.readouterr().out)
        assert result['error']['error_type'] == 'UnreachableRequestError'


class TestReports:

    def test_micro_bounds(self, tmp_path):
        assert run('bounds', CONFIGS / 'micro_bounds.json', tmp_path, '--baseline') == 0

        row = pd.read_csv(tmp_path / 'bounds.csv').iloc[0]
        assert (row['requests'], row['ws'], row['sp'], row['eev']) == (1, 12.0, 15.0, 16.5)
        assert row['ws_gap_pct'] == pytest.approx(20.0)
        assert row['eev_gap_pct'] == pytest.approx(10.0)

    def test_oracle_check(self, tmp_path):
        assert run('oracle-check', CONFIGS / 'micro_oracle.json', tmp_path) == 0
        assert bool(pd.read_csv(tmp_path / 'oracle.csv').iloc[0]['match'])

    def test_exhaustive_flag(self, tmp_path, capsys):
        assert run('plan', FIXTURES / 'diamond_config.json', tmp_path, '--exhaustive') == 0
        assert json.loads(capsys.readouterr().out)['mode'] == 'exhaustive'


class TestDeterminism:

    @pytest.mark.parametrize("command,config", [
        ('plan', FIXTURES / 'diamond_config.json'),
        ('coalition', CONFIGS / 'recorded_payoffs_qkd.json'),
        ('bounds', CONFIGS / 'micro_bounds.json'),
    ])
    def test_reruns_are_byte_identical(self, tmp_path, command, config):
        assert run(command, config, tmp_path / 'first') == 0
        assert run(command, config, tmp_path / 'second') == 0
        assert snapshot(tmp_path / 'first') == snapshot(tmp_path / 'second')

    def test_seed_changes_only_sampled_columns(self, tmp_path):
        config = CONFIGS / 'recorded_payoffs_qkd.json'
        assert run('coalition', config, tmp_path / 'a', '--seed', '1') == 0
        assert run('coalition', config, tmp_path / 'b', '--seed', '2') == 0

        first = pd.read_csv(tmp_path / 'a' / 'stationary.csv')
        second = pd.read_csv(tmp_path / 'b' / 'stationary.csv')
        assert list(first['probability']) == list(second['probability'])
        assert (tmp_path / 'a' / 'payoffs.csv').read_bytes() == (tmp_path / 'b' / 'payoffs.csv').read_bytes()


class TestFourteenNodePlan:

    def test_plan_within_a_minute(self, tmp_path, capsys):
        started = time.perf_counter()
        code = run('plan', CONFIGS / 'nsfnet_plan.json', tmp_path)
        elapsed = time.perf_counter() - started

        assert code == 0
        result = json.loads(capsys.readouterr().out)
        assert result['violations'] == []
        assert elapsed < 60.0

        routes = pd.read_csv(tmp_path / 'routes.csv')
        assert len(routes) == 10


if __name__ == '__main__':
    pytest.main([__file__, '-v'])
