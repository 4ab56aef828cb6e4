"""
Planning package: network model, cost model, demand scenarios and the stochastic planner.

Usage Examples:
    from planning import load_topology, load_requests, PlanningInstance, PoolCapacities, solve
    instance = PlanningInstance(topology, tuple(requests), PoolCapacities.slack(topology),
                                PriceTable.reference(), PhysicalParams(key_rate_per_link=4.0))
    result = solve(instance)
    print(result.total, result.plan.routes)

    # Bounds
    from planning import solve_eev, solve_ws
    ws, eev = solve_ws(instance).value, solve_eev(instance).total
"""

from .cost_model import (
    DeviceCounts,
    PhysicalParams,
    PriceTable,
    link_channel_cost,
    objective_coefficients,
    parallel_links,
    per_link_device_counts,
)
from .demand_scenarios import (
    DemandDistribution,
    JointScenarioSpace,
    degenerate_distribution,
    enumerate_joint,
    expected_demand,
    table_distribution,
    uniform_distribution,
)
from .feasibility import FeasibilityReport, check_feasibility
from .instance import Plan, PlanEvaluation, PlanningInstance, PoolCapacities, Recourse, SolveResult
from .network_model import (
    ChainRequest,
    Provider,
    Topology,
    k_candidate_paths,
    load_providers,
    load_requests,
    load_topology,
)
from .oracle import brute_force_oracle
from .recourse import allocate_link_recourse, newsvendor_reservation, optimal_recourse
from .settings import SolverSettings
from .sp_planner import (
    StochasticPlanner,
    evaluate_plan,
    greedy_on_demand_baseline,
    optimal_reservation_for_route,
    solve,
    solve_eev,
    solve_ws,
)

__all__ = [
    # Network model
    'Topology',
    'ChainRequest',
    'Provider',
    'load_topology',
    'load_requests',
    'load_providers',
    'k_candidate_paths',

    # Cost model
    'PriceTable',
    'PhysicalParams',
    'DeviceCounts',
    'parallel_links',
    'per_link_device_counts',
    'link_channel_cost',
    'objective_coefficients',

    # Demand scenarios
    'DemandDistribution',
    'JointScenarioSpace',
    'uniform_distribution',
    'table_distribution',
    'degenerate_distribution',
    'expected_demand',
    'enumerate_joint',

    # Planner
    'PlanningInstance',
    'PoolCapacities',
    'Plan',
    'PlanEvaluation',
    'Recourse',
    'SolveResult',
    'SolverSettings',
    'StochasticPlanner',
    'solve',
    'solve_eev',
    'solve_ws',
    'evaluate_plan',
    'greedy_on_demand_baseline',
    'optimal_reservation_for_route',
    'optimal_recourse',
    'allocate_link_recourse',
    'newsvendor_reservation',
    'brute_force_oracle',
    'check_feasibility',
    'FeasibilityReport',
]
