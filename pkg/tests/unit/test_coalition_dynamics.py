"""
Unit tests for coalition formation: induced structures, best responses,
equilibria, the transition matrix, stationary distributions and simulation.
"""

import json
import os
import sys
import unittest
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '../..'))

from coalitions.dynamics import (
    CoalitionDynamics, DynamicsConfig, StrategyProfile, best_response, equilibrium_states, fee_sweep,
    is_equilibrium, profile_for, provider_cost, simulate_dynamics, stationary_distribution, structure_from_profile,
    transition_matrix,
)
from coalitions.economics import CoalitionStructure, TabulatedEconomics, with_fees
from planning.exceptions import ParameterError, StateSpaceLimitError
from planning.network_model import load_providers

INSTANCES = Path(__file__).parent.parent.parent / 'instances'

PROVIDERS = ("1", "2", "3")


def payoff_rows(pool):
    with open(INSTANCES / 'recorded_payoffs.json', 'r', encoding='utf-8') as f:
        return json.load(f)["pools"][pool]


def tabulated(pool, providers=None):
    return TabulatedEconomics.from_rows(PROVIDERS, payoff_rows(pool), providers)


def pair_economics():
    """Two providers who both halve their cost by cooperating."""
    return TabulatedEconomics.from_rows(("1", "2"), {"C1": [10.0, 10.0], "C2": [5.0, 5.0]})


class TestStructureFromProfile(unittest.TestCase):

    def test_no_flags_gives_singletons(self):
        structure, consistent = structure_from_profile(StrategyProfile(PROVIDERS))
        self.assertEqual(structure, CoalitionStructure.of([["1"], ["2"], ["3"]]))
        self.assertTrue(consistent)

    def test_single_pair(self):
        structure, consistent = structure_from_profile(profile_for(PROVIDERS, {("1", "2"): 1}))
        self.assertEqual(structure.label(), "{1,2} {3}")
        self.assertTrue(consistent)

    def test_non_transitive_flags_join_everyone(self):
        profile = profile_for(PROVIDERS, {("1", "2"): 1, ("3", "2"): 1})
        structure, consistent = structure_from_profile(profile)

        self.assertEqual(structure.label(), "{1,2,3}")
        self.assertFalse(consistent)

    def test_profile_round_trips_a_structure(self):
        structure = CoalitionStructure.of([["1", "3"], ["2"]])
        profile = StrategyProfile.from_structure(PROVIDERS, structure)
        self.assertEqual(profile.vector("1"), (0, 1))
        self.assertEqual(structure_from_profile(profile)[0], structure)


class TestBestResponseAndEquilibria:

    @pytest.fixture
    def qkd(self):
        return tabulated("qkd")

    @pytest.fixture
    def km(self):
        return tabulated("km")

    def test_provider_one_teams_up_with_two(self, qkd):
        assert best_response("1", StrategyProfile(PROVIDERS), qkd) == (1, 0)

    def test_provider_cost_reads_the_induced_structure(self, qkd):
        profile = StrategyProfile.from_structure(PROVIDERS, qkd.structure("C2"))
        costs = provider_cost(profile, qkd)

        assert sorted(costs) == list(PROVIDERS)
        assert costs == qkd.provider_costs(qkd.structure("C2"))

    def test_qkd_pool_stable_structures(self, qkd):
        assert CoalitionDynamics(qkd).stable_structures() == ["C2"]

    def test_km_pool_stable_structures(self, km):
        assert CoalitionDynamics(km).stable_structures() == ["C5"]

    def test_provider_one_leaves_for_the_grand_coalition(self, qkd):
        profile = StrategyProfile.from_structure(PROVIDERS, qkd.structure("C4"))
        stable, deviations = is_equilibrium(profile, qkd)

        assert not stable
        moves = [(d.provider, d.vector) for d in deviations]
        assert ("1", (1, 1)) in moves
        assert all(d.new_cost < d.current_cost for d in deviations)

    def test_closure_equilibria_are_the_connected_profiles(self, km):
        dynamics = CoalitionDynamics(km, "closure")
        assert equilibrium_states(dynamics) == [3, 5, 6, 7]

    def test_unknown_scope(self, km):
        with pytest.raises(ParameterError):
            CoalitionDynamics(km, "anything")


class TestTransitionMatrix:

    @pytest.fixture
    def config(self):
        return DynamicsConfig(update_probability=0.5, irrationality=0.1)

    def test_two_provider_entries(self, config):
        matrix = transition_matrix(pair_economics(), config)

        assert matrix[0, 1] == pytest.approx(0.2025)
        assert matrix[1, 0] == pytest.approx(0.0025)
        assert matrix[0, 0] == pytest.approx(0.7975)

    def test_rows_are_stochastic(self, config):
        matrix = transition_matrix(tabulated("qkd"), config)
        assert matrix.shape == (8, 8)
        assert np.all(matrix >= 0)
        assert np.allclose(matrix.sum(axis=1), 1.0, atol=1e-10)

    def test_no_updates_means_no_moves(self):
        matrix = transition_matrix(tabulated("km"), DynamicsConfig(update_probability=0.0))
        assert np.array_equal(matrix, np.eye(8))

    def test_rational_providers_never_leave(self):
        matrix = transition_matrix(pair_economics(), DynamicsConfig(update_probability=0.5, irrationality=0.0))
        assert matrix[1, 0] == 0.0
        assert matrix[0, 1] == pytest.approx(0.25)

    def test_state_space_cap(self, config):
        with pytest.raises(StateSpaceLimitError) as exc:
            CoalitionDynamics(tabulated("qkd")).transition_matrix(config, state_space_cap=4)
        assert exc.value.context['size'] == 8


class TestStationaryDistribution(unittest.TestCase):

    def test_two_state_chain(self):
        result = stationary_distribution(np.array([[0.5, 0.5], [1.0, 0.0]]))

        self.assertFalse(result.reducible)
        np.testing.assert_allclose(result.distribution, [2 / 3, 1 / 3], atol=1e-9)
        self.assertLessEqual(result.residual, 1e-10)

    def test_uniform_chain(self):
        result = stationary_distribution(np.full((4, 4), 0.25))
        np.testing.assert_allclose(result.distribution, [0.25] * 4)

    def test_identity_is_reducible(self):
        result = stationary_distribution(np.eye(3))

        self.assertTrue(result.reducible)
        self.assertIsNone(result.distribution)
        self.assertEqual([c.states for c in result.classes], [[0], [1], [2]])

    def test_absorbing_cooperation(self):
        matrix = transition_matrix(pair_economics(), DynamicsConfig(update_probability=0.5, irrationality=0.0))
        result = stationary_distribution(matrix)
        self.assertTrue(result.reducible)
        self.assertEqual([c.states for c in result.classes], [[1]])

    def test_rejects_non_stochastic(self):
        for matrix in (np.array([[0.5, 0.4], [0.0, 1.0]]), np.ones((2, 3)), np.array([[1.5, -0.5], [0, 1]])):
            with self.assertRaises(ParameterError):
                stationary_distribution(matrix)

    def test_less_irrationality_never_loses_equilibrium_mass(self):
        masses = {}
        for pool in ("qkd", "km"):
            dynamics = CoalitionDynamics(tabulated(pool), "closure")
            equilibria = equilibrium_states(dynamics)
            masses[pool] = []
            for irrationality in (0.1, 0.01, 0.001):
                matrix = dynamics.transition_matrix(DynamicsConfig(update_probability=0.5, irrationality=irrationality))
                result = stationary_distribution(matrix)
                self.assertLessEqual(result.residual, 1e-10)
                masses[pool].append(float(result.distribution[equilibria].sum()))
            self.assertEqual(masses[pool], sorted(masses[pool]), pool)
        self.assertGreater(masses["km"][-1], masses["km"][0])

    def test_every_qkd_profile_has_an_improving_move_under_closure(self):
        self.assertEqual(equilibrium_states(CoalitionDynamics(tabulated("qkd"), "closure")), [])

    def test_slowly_mixing_chain_meets_the_residual_target(self):
        dynamics = CoalitionDynamics(tabulated("qkd"), "closure")
        matrix = dynamics.transition_matrix(DynamicsConfig(update_probability=0.5, irrationality=0.001))
        result = stationary_distribution(matrix)
        pi = result.distribution

        self.assertFalse(result.reducible)
        self.assertLessEqual(float(np.max(np.abs(pi @ matrix - pi))), 1e-10)
        self.assertAlmostEqual(float(pi.sum()), 1.0, places=12)
        self.assertTrue(np.all(pi >= 0.0))

        eigenvalues, eigenvectors = np.linalg.eig(matrix.T)
        reference = np.real(eigenvectors[:, np.argmin(np.abs(eigenvalues - 1.0))])
        np.testing.assert_allclose(pi, reference / reference.sum(), atol=1e-10)


class TestSimulation:

    def test_zero_iterations_stay_put(self):
        result = simulate_dynamics(pair_economics(), DynamicsConfig(max_iterations=0, seed=1))
        assert result.trajectory == [0]
        assert list(result.frequencies) == [1.0, 0.0]

    def test_rational_full_updates_absorb_immediately(self):
        config = DynamicsConfig(update_probability=1.0, irrationality=0.0, max_iterations=20, seed=4)
        result = simulate_dynamics(pair_economics(), config)

        assert result.trajectory[1:] == [1] * 20
        assert result.final.flag("1", "2") == 1

    def test_frequencies_match_the_stationary_distribution(self):
        config = DynamicsConfig(update_probability=0.5, irrationality=0.1, max_iterations=100000, seed=2024)
        economics = pair_economics()
        pi = stationary_distribution(transition_matrix(economics, config)).distribution
        result = simulate_dynamics(economics, config)

        assert 0.5 * np.abs(result.frequencies - pi).sum() < 0.05

    def test_seeded_runs_repeat(self):
        config = DynamicsConfig(max_iterations=200, seed=9)
        first = simulate_dynamics(tabulated("qkd"), config)
        second = simulate_dynamics(tabulated("qkd"), config)
        assert first.trajectory == second.trajectory


class TestFeeSweep:

    @pytest.fixture
    def providers(self):
        with open(INSTANCES / 'providers.json', 'r', encoding='utf-8') as f:
            return load_providers(json.load(f))

    def test_free_sharing_matches_the_table(self, providers):
        rows = fee_sweep(tabulated("qkd", providers), [0.0], [0.0])
        assert rows == [{'qkd_share_price': 0.0, 'km_share_price': 0.0,
                         'stable_structure': 'C2', 'stable_count': 1}]

    def test_prohibitive_fees_keep_everyone_alone(self, providers):
        rows = fee_sweep(tabulated("qkd", providers), [0.0, 100000.0], [0.0, 1000000.0], cooperation_fee=0.0)

        assert len(rows) == 4
        assert rows[-1]['stable_structure'] == 'C1'

    @pytest.mark.parametrize("pool, expected", [
        ("qkd", ["C2", "C2", "C2", "none", "C1", "C1"]),
        ("km", ["C5", "C5", "none", "none", "none", "C1"]),
    ])
    def test_rising_cooperation_fee_never_revives_cooperation(self, providers, pool, expected):
        fees = [0.0, 50000.0, 100000.0, 500000.0, 1000000.0, 5000000.0]
        economics = tabulated(pool, providers)

        cooperative, chosen = [], []
        for fee in fees:
            priced = economics.with_providers(with_fees(economics.providers, 0.0, 0.0, fee))
            stable = CoalitionDynamics(priced).stable_structures()
            cooperative.append(any(sid != "C1" for sid in stable))
            chosen.append(fee_sweep(economics, [0.0], [0.0], cooperation_fee=fee)[0]['stable_structure'])

        assert cooperative == sorted(cooperative, reverse=True)
        assert chosen == expected


class TestDynamicsConfig:

    @pytest.mark.parametrize("kwargs", [
        {"update_probability": 1.5},
        {"update_probability": -0.1},
        {"irrationality": 1.0},
        {"max_iterations": -1},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ParameterError):
            DynamicsConfig(**kwargs)


if __name__ == '__main__':
    pytest.main([__file__, '-v'])
