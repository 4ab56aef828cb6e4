#!/usr/bin/env python3
"""
Integration tests for config → instance → planner → audit → reports, and
for how planned cost responds to the pool and to demand.
"""

import os
import sys
from pathlib import Path

import pandas as pd
import pytest

# Add parent directory to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '../..'))

from experiments.config import ExperimentConfig
from experiments.experiment_runner import EXIT_OK, ExperimentRunner
from planning.instance import PoolCapacities
from planning.sp_planner import StochasticPlanner

FIXTURES = Path(__file__).parent.parent.parent / 'fixtures'
CONFIGS = Path(__file__).parent.parent.parent / 'instances' / 'configs'


class TestPoolMonotonicity:

    @pytest.fixture
    def diamond(self):
        return ExperimentConfig.load(str(FIXTURES / 'diamond_config.json')).instance()

    def test_larger_qkd_pool_never_costs_more(self, diamond):
        totals = []
        for qkd in range(0, 13, 2):
            pooled = diamond.with_pools(PoolCapacities.uniform(diamond.topology, qkd, 2))
            result = StochasticPlanner(pooled, k=2).solve(mode="exhaustive", with_breakdown=False)
            assert result.exact
            totals.append(result.total)

        for smaller, larger in zip(totals, totals[1:]):
            assert larger <= smaller * (1 + 1e-9)
        assert totals[-1] < totals[0]

    def test_larger_km_pool_never_costs_more(self, diamond):
        totals = []
        for km in range(0, 5):
            pooled = diamond.with_pools(PoolCapacities.uniform(diamond.topology, 6, km))
            totals.append(StochasticPlanner(pooled, k=2).solve(mode="exhaustive", with_breakdown=False).total)
        assert all(b <= a * (1 + 1e-9) for a, b in zip(totals, totals[1:]))


class TestRunnerFlows:
    """Runner subcommands on the small configs."""

    def test_plan_on_the_diamond(self, tmp_path):
        runner = ExperimentRunner(ExperimentConfig.load(str(FIXTURES / 'diamond_config.json')), str(tmp_path))
        result, code = runner.run_plan()

        assert code == EXIT_OK
        assert result['success']
        assert result['violations'] == []
        routes = pd.read_csv(tmp_path / 'routes.csv')
        assert list(routes['request']) == ['f1', 'f2']

    def test_micro_bounds_row(self, tmp_path):
        runner = ExperimentRunner(ExperimentConfig.load(str(CONFIGS / 'micro_bounds.json')), str(tmp_path),
                                  baseline=True)
        result, code = runner.run_bounds()

        assert code == EXIT_OK
        row = pd.read_csv(tmp_path / 'bounds.csv').iloc[0]
        assert row['ws'] == pytest.approx(12.0)
        assert row['sp'] == pytest.approx(15.0)
        assert row['eev'] == pytest.approx(16.5)
        assert row['eev_gap_pct'] == pytest.approx(10.0)
        assert row['ws_gap_pct'] == pytest.approx(20.0)
        assert row['baseline'] == pytest.approx(24.0)

    def test_reservation_sweep_on_the_micro_instance(self, tmp_path):
        config = ExperimentConfig.load(str(CONFIGS / 'micro_plan.json'))
        config.experiment = {'axis': 'reserved_qkd', 'values': [0, 3, 6, 9]}
        result, code = ExperimentRunner(config, str(tmp_path)).run_sweep()

        assert code == EXIT_OK
        sweep = pd.read_csv(tmp_path / 'sweep.csv')
        assert list(sweep['total_cost']) == pytest.approx([24.0, 18.0, 16.5, 15.0])

    def test_oracle_check_on_the_micro_instance(self, tmp_path):
        result, code = ExperimentRunner(ExperimentConfig.load(str(CONFIGS / 'micro_oracle.json')),
                                        str(tmp_path)).run_oracle_check()
        assert code == EXIT_OK
        assert result['match']

    def test_unknown_sweep_axis(self, tmp_path):
        config = ExperimentConfig.load(str(CONFIGS / 'micro_plan.json'))
        config.experiment = {'axis': 'weather', 'values': [1]}
        result, code = ExperimentRunner(config, str(tmp_path)).run_sweep()
        assert code == 2
        assert result['error']['context']['config_key'] == 'experiment.axis'

    def test_zero_candidate_paths_is_a_config_exit(self, tmp_path):
        config = ExperimentConfig.load(str(CONFIGS / 'micro_plan.json'))
        config.k = 0
        result, code = ExperimentRunner(config, str(tmp_path)).run_plan()
        assert code == 2
        assert result['error']['context']['parameter'] == 'k'


if __name__ == '__main__':
    pytest.main([__file__, '-v'])
