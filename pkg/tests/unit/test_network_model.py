"""
Unit tests for the fiber network model: topology parsing, request loading,
provider records and k-shortest candidate paths.
"""

import json
import os
import sys
import unittest
from pathlib import Path

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '../..'))

from experiments.experiment_runner import EXIT_CONFIG, exit_code_for
from planning.demand_scenarios import degenerate_distribution
from planning.exceptions import ParameterError, TopologyValidationError, UnreachableRequestError
from planning.network_model import (
    ChainRequest, k_candidate_paths, link_key, load_providers, load_requests, load_topology, parse_link_label,
)

FIXTURES = Path(__file__).parent.parent.parent / 'fixtures'
INSTANCES = Path(__file__).parent.parent.parent / 'instances'


def triangle_document(lengths=(100, 100, 250)):
    return {
        "nodes": ["1", "2", "3"],
        "links": [
            {"a": "1", "b": "2", "km": lengths[0]},
            {"a": "2", "b": "3", "km": lengths[1]},
            {"a": "1", "b": "3", "km": lengths[2]},
        ],
    }


class TestLoadTopology(unittest.TestCase):
    """Test topology parsing and validation."""

    def test_triangle_parses(self):
        topology = load_topology(triangle_document((100, 120, 150)))

        self.assertEqual(len(topology.nodes), 3)
        self.assertEqual(len(topology.links), 3)
        self.assertEqual(topology.length_km(link_key("2", "3")), 120.0)

    def test_accepts_json_text(self):
        topology = load_topology(json.dumps(triangle_document()))
        self.assertTrue(topology.has_node("2"))

    def test_links_are_undirected(self):
        topology = load_topology(triangle_document())
        self.assertEqual(topology.link("3", "1"), topology.link("1", "3"))
        self.assertEqual(topology.path_length(("3", "2", "1")), 200.0)

    def test_directional_views(self):
        topology = load_topology(triangle_document())
        self.assertEqual(topology.outgoing("1"), [("1", "2"), ("1", "3")])
        self.assertEqual(topology.incoming("2"), [("1", "2"), ("3", "2")])

    def test_rejects_unknown_endpoint(self):
        document = triangle_document()
        document["links"].append({"a": "1", "b": "9", "km": 10})

        with self.assertRaises(TopologyValidationError) as ctx:
            load_topology(document)
        self.assertEqual(ctx.exception.context['element'], {"a": "1", "b": "9", "km": 10})

    def test_rejects_duplicate_link_in_either_direction(self):
        document = triangle_document()
        document["links"].append({"a": "2", "b": "1", "km": 90})

        with self.assertRaises(TopologyValidationError):
            load_topology(document)

    def test_rejects_self_loop_and_bad_length(self):
        for bad in ({"a": "1", "b": "1", "km": 5}, {"a": "1", "b": "2", "km": 0},
                    {"a": "1", "b": "2", "km": float("inf")}):
            document = {"nodes": ["1", "2"], "links": [bad]}
            with self.assertRaises(TopologyValidationError):
                load_topology(document)

    def test_rejects_duplicate_node(self):
        with self.assertRaises(TopologyValidationError):
            load_topology({"nodes": ["1", "1"], "links": []})

    def test_rejects_malformed_json(self):
        with self.assertRaises(TopologyValidationError):
            load_topology("{not json")

    def test_authored_instances_parse(self):
        for name, nodes in (("nsfnet14_topology.json", 14), ("usnet24_topology.json", 24)):
            with open(INSTANCES / name, 'r', encoding='utf-8') as f:
                topology = load_topology(json.load(f))
            self.assertEqual(len(topology.nodes), nodes)


class TestLoadRequests(unittest.TestCase):
    """Test request parsing."""

    def setUp(self):
        self.topology = load_topology(triangle_document())

    def test_named_distribution(self):
        document = {
            "distributions": {"d": {"kind": "uniform", "min": 2, "max": 10, "step": 2}},
            "requests": [{"id": "f1", "src": "1", "dst": "3", "demand": "d", "provider": 2}],
        }
        requests = load_requests(document, self.topology)

        self.assertEqual(len(requests), 1)
        self.assertEqual(requests[0].demand.support, (2.0, 4.0, 6.0, 8.0, 10.0))
        self.assertEqual(requests[0].provider, "2")
        self.assertEqual(requests[0].planning_rate, 6.0)

    def test_rejects_identical_endpoints(self):
        document = {"requests": [{"id": "f1", "src": "1", "dst": "1", "demand": {"kind": "fixed", "rate": 1}}]}
        with self.assertRaises(TopologyValidationError):
            load_requests(document, self.topology)

    def test_rejects_unknown_node_and_distribution(self):
        unknown_node = {"requests": [{"id": "f1", "src": "1", "dst": "7", "demand": {"kind": "fixed", "rate": 1}}]}
        unknown_dist = {"requests": [{"id": "f1", "src": "1", "dst": "3", "demand": "missing"}]}
        for document in (unknown_node, unknown_dist):
            with self.assertRaises(TopologyValidationError):
                load_requests(document, self.topology)

    def test_rejects_duplicate_ids(self):
        entry = {"id": "f1", "src": "1", "dst": "3", "demand": {"kind": "fixed", "rate": 1}}
        with self.assertRaises(TopologyValidationError):
            load_requests({"requests": [entry, dict(entry)]}, self.topology)

    def test_explicit_first_stage_rate(self):
        document = {"requests": [{"id": "f1", "src": "1", "dst": "3", "first_stage_rate": 4,
                                  "demand": {"kind": "table", "support": [1, 3], "probs": [0.5, 0.5]}}]}
        request = load_requests(document, self.topology)[0]
        self.assertEqual(request.planning_rate, 4.0)


class TestLoadProviders:
    """Provider records and per-link overrides."""

    def test_authored_providers(self):
        with open(INSTANCES / 'providers.json', 'r', encoding='utf-8') as f:
            providers = load_providers(json.load(f))

        assert [p.id for p in providers] == ["1", "2", "3"]
        assert [p.qkd_contribution_per_link for p in providers] == [10, 15, 20]
        assert [p.km_contribution_per_link for p in providers] == [40, 55, 65]

    def test_link_override(self):
        providers = load_providers({"providers": [{"id": "1", "qkd": 10, "km": 4, "links": {"2-1": {"qkd": 0}}}]})
        provider = providers[0]

        assert provider.contribution(link_key("1", "2"), "qkd") == 0
        assert provider.contribution(link_key("1", "2"), "km") == 4
        assert provider.contribution(link_key("2", "3"), "qkd") == 10

    @pytest.mark.parametrize("entry", [
        {"id": "1", "qkd": -1},
        {"id": "1", "km": 2.5},
        {"id": "1", "qkd_price": -3},
    ])
    def test_rejects_bad_values(self, entry):
        with pytest.raises(TopologyValidationError):
            load_providers({"providers": [entry]})

    def test_malformed_link_label(self):
        with pytest.raises(TopologyValidationError):
            parse_link_label("12")


class TestCandidatePaths:
    """k shortest loop-free paths."""

    @pytest.fixture
    def triangle(self):
        with open(FIXTURES / 'triangle_topology.json', 'r', encoding='utf-8') as f:
            return load_topology(json.load(f))

    def _request(self, src, dst):
        return ChainRequest("f1", src, dst, degenerate_distribution(1.0))

    def test_two_paths_shortest_first(self, triangle):
        paths = k_candidate_paths(triangle, self._request("1", "3"), 2)
        assert paths == [("1", "2", "3"), ("1", "3")]

    def test_k_one_keeps_shortest(self, triangle):
        assert k_candidate_paths(triangle, self._request("1", "3"), 1) == [("1", "2", "3")]

    def test_fewer_paths_than_k(self, triangle):
        assert len(k_candidate_paths(triangle, self._request("1", "3"), 8)) == 2

    @pytest.mark.parametrize("k", [0, -2])
    def test_k_below_one_is_a_parameter_error(self, triangle, k):
        with pytest.raises(ParameterError) as exc:
            k_candidate_paths(triangle, self._request("1", "3"), k)
        assert exc.value.context['parameter'] == "k"
        assert exit_code_for(exc.value) == EXIT_CONFIG

    def test_ties_ordered_by_node_sequence(self):
        square = load_topology({
            "nodes": ["1", "2", "3", "4"],
            "links": [{"a": "1", "b": "3", "km": 50}, {"a": "3", "b": "4", "km": 50},
                      {"a": "1", "b": "2", "km": 50}, {"a": "2", "b": "4", "km": 50}],
        })
        assert k_candidate_paths(square, self._request("1", "4"), 1) == [("1", "2", "4")]
        assert k_candidate_paths(square, self._request("1", "4"), 2) == [("1", "2", "4"), ("1", "3", "4")]

    def test_unreachable(self):
        split = load_topology({"nodes": ["1", "2", "3"], "links": [{"a": "1", "b": "2", "km": 10}]})
        with pytest.raises(UnreachableRequestError) as exc:
            k_candidate_paths(split, self._request("1", "3"), 2)
        assert exc.value.context['request_id'] == "f1"

    def test_usnet_path_for_request_1_to_23(self):
        with open(INSTANCES / 'usnet24_topology.json', 'r', encoding='utf-8') as f:
            usnet = load_topology(json.load(f))
        paths = k_candidate_paths(usnet, self._request("1", "23"), 1)
        assert paths == [("1", "6", "9", "12", "16", "22", "23")]


if __name__ == '__main__':
    pytest.main([__file__, '-v'])
