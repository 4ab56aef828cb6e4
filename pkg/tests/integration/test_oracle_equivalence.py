#!/usr/bin/env python3
"""
Integration tests: the planner against the brute-force oracle, and the
WS <= SP <= EEV sandwich, on small random instances.
"""

import os
import sys

import numpy as np
import pytest

# Add parent directory to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '../..'))

from planning.cost_model import PhysicalParams, PriceTable
from planning.demand_scenarios import degenerate_distribution, table_distribution
from planning.exceptions import OracleLimitError
from planning.instance import PlanningInstance, PoolCapacities
from planning.network_model import ChainRequest, load_topology
from planning.oracle import brute_force_oracle
from planning.settings import SolverSettings
from planning.sp_planner import StochasticPlanner, greedy_on_demand_baseline, solve_eev, solve_ws

NODES = ["1", "2", "3", "4"]


def random_instance(rng: np.random.Generator) -> PlanningInstance:
    """Four-node ring, one to three requests with demand 1 or 2, a small uniform pool."""
    ring = [("1", "2"), ("2", "3"), ("3", "4"), ("4", "1")]
    topology = load_topology({
        "nodes": NODES,
        "links": [{"a": a, "b": b, "km": int(rng.integers(40, 400))} for a, b in ring],
    })

    count = int(rng.integers(1, 4))
    requests = []
    for i in range(count):
        src, dst = rng.choice(NODES, size=2, replace=False)
        if rng.random() < 0.2:
            demand = degenerate_distribution(float(rng.integers(1, 3)))
        else:
            low = float(rng.choice([0.25, 0.5, 0.75]))
            demand = table_distribution([1, 2], [low, 1.0 - low])
        requests.append(ChainRequest(f"f{i + 1}", str(src), str(dst), demand))

    pools = PoolCapacities.uniform(topology, int(rng.integers(0, 9)), int(rng.integers(0, 4)))
    # Three requests keep one parallel link each so the oracle stays quick.
    key_rate = 2.0 if count == 3 else float(rng.choice([1.0, 2.0]))
    params = PhysicalParams(key_rate_per_link=key_rate)
    return PlanningInstance(topology, tuple(requests), pools, PriceTable.reference(), params)


@pytest.fixture(scope="module")
def instances():
    rng = np.random.default_rng(20240521)
    return [random_instance(rng) for _ in range(50)]


class TestOracleEquivalence:
    """Exhaustive planner totals equal the oracle's on every small instance."""

    def test_fifty_random_instances(self, instances):
        for index, instance in enumerate(instances):
            oracle = brute_force_oracle(instance, k=2)
            result = StochasticPlanner(instance, k=2).solve(mode="exhaustive", with_breakdown=False)

            assert result.exact, index
            assert result.total == pytest.approx(oracle.total, rel=1e-9, abs=1e-9), index

    def test_oracle_refuses_large_instances(self, instances):
        instance = instances[0]
        requests = [ChainRequest(f"g{i}", "1", "3", degenerate_distribution(1.0)) for i in range(4)]
        with pytest.raises(OracleLimitError):
            brute_force_oracle(instance.with_requests(requests), k=2)


class TestExactLinkEnumeration:
    """Oracle-sized instances are enumerated link by link without the budget."""

    @staticmethod
    def _shared_line(count: int, qkd_pool: int) -> PlanningInstance:
        topology = load_topology({"nodes": ["1", "2", "3"],
                                  "links": [{"a": "1", "b": "2", "km": 120}, {"a": "2", "b": "3", "km": 90}]})
        requests = tuple(ChainRequest(f"f{i + 1}", "1", "3", table_distribution([1, 2], [0.5, 0.5]))
                         for i in range(count))
        pools = PoolCapacities.uniform(topology, qkd_pool, 8)
        return PlanningInstance(topology, requests, pools, PriceTable.reference(),
                                PhysicalParams(key_rate_per_link=1.0), resources=("qkd",))

    def test_binding_link_matches_the_oracle_under_a_tiny_budget(self):
        instance = self._shared_line(3, qkd_pool=5)
        planner = StochasticPlanner(instance, SolverSettings(link_enumeration_budget=1), k=1)

        result = planner.solve(mode="exhaustive", with_breakdown=False)
        oracle = brute_force_oracle(instance, k=1)

        assert planner.link_budget() is None
        assert result.exact
        assert "repaired" not in result.evaluation.flags
        assert "heuristic" not in result.evaluation.flags
        assert result.total == pytest.approx(oracle.total, rel=1e-9, abs=1e-9)

    def test_larger_instances_keep_the_configured_budget(self):
        instance = self._shared_line(4, qkd_pool=5)
        planner = StochasticPlanner(instance, SolverSettings(link_enumeration_budget=1), k=1)

        assert planner.link_budget() == 1
        assert not planner.solve(mode="exhaustive", with_breakdown=False).exact


class TestBoundSandwich:

    def test_ws_sp_eev_order(self, instances):
        for index, instance in enumerate(instances[:25]):
            sp = StochasticPlanner(instance, k=2).solve(mode="exhaustive", with_breakdown=False).total
            ws = solve_ws(instance, k=2)
            eev = solve_eev(instance, k=2).total
            tolerance = 1e-9 * max(1.0, sp)

            assert ws.value <= sp + tolerance, index
            assert sp <= eev + tolerance, index

    def test_baseline_never_beats_the_planner(self, instances):
        for index, instance in enumerate(instances[:25]):
            sp = StochasticPlanner(instance, k=2).solve(mode="exhaustive", with_breakdown=False).total
            baseline = greedy_on_demand_baseline(instance, k=2).total
            assert sp <= baseline + 1e-9 * max(1.0, baseline), index


if __name__ == '__main__':
    pytest.main([__file__, '-v'])
