"""
Coalition package: provider pooling, Shapley cost sharing and coalition-formation dynamics.

Usage Examples:
    from coalitions import TabulatedEconomics, CoalitionDynamics, DynamicsConfig
    economics = TabulatedEconomics.from_rows(["1", "2", "3"], rows)
    dynamics = CoalitionDynamics(economics)
    print(dynamics.stable_structures())

    matrix = dynamics.transition_matrix(DynamicsConfig(update_probability=0.5, irrationality=0.1))
"""

from .dynamics import (
    CoalitionDynamics,
    DynamicsConfig,
    StationaryResult,
    StrategyProfile,
    best_response,
    fee_sweep,
    is_equilibrium,
    provider_cost,
    simulate_dynamics,
    stationary_distribution,
    structure_from_profile,
    transition_matrix,
)
from .economics import (
    CharacteristicCache,
    CoalitionEconomics,
    CoalitionStructure,
    CostShare,
    ShapleyEconomics,
    TabulatedEconomics,
    characteristic_cost,
    enumerate_structures,
    is_subadditive,
    planner_cache,
    pool_capacities,
    provider_total_cost,
    shapley_shares,
    shapley_shares_exact,
    with_fees,
)

__all__ = [
    # Economics
    'CoalitionStructure',
    'CharacteristicCache',
    'CostShare',
    'CoalitionEconomics',
    'ShapleyEconomics',
    'TabulatedEconomics',
    'pool_capacities',
    'characteristic_cost',
    'planner_cache',
    'shapley_shares',
    'shapley_shares_exact',
    'provider_total_cost',
    'enumerate_structures',
    'is_subadditive',
    'with_fees',

    # Dynamics
    'StrategyProfile',
    'DynamicsConfig',
    'StationaryResult',
    'CoalitionDynamics',
    'structure_from_profile',
    'provider_cost',
    'best_response',
    'is_equilibrium',
    'transition_matrix',
    'stationary_distribution',
    'simulate_dynamics',
    'fee_sweep',
]
