# planning/network_model.py
"""
Fiber network model: topology, chain requests, providers and candidate paths.

Links are undirected and keyed canonically as a sorted node pair, so the
same fiber is reachable from either end. Routing decisions are drawn from
the k shortest loop-free paths of every request.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import networkx as nx

from planning.demand_scenarios import DemandDistribution, distribution_from_document
from planning.exceptions import ParameterError, TopologyValidationError, UnreachableRequestError

logger = logging.getLogger(__name__)

LinkKey = Tuple[str, str]
Path = Tuple[str, ...]


def node_sort_key(node: str) -> Tuple[int, Any]:
    """Numeric ids sort by value, everything else after them by text."""
    return (0, int(node), "") if node.isdigit() else (1, 0, node)


def link_key(a: str, b: str) -> LinkKey:
    """Canonical key of the undirected link joining a and b."""
    return (a, b) if node_sort_key(a) <= node_sort_key(b) else (b, a)


def link_label(link: LinkKey) -> str:
    return f"{link[0]}-{link[1]}"


def parse_link_label(label: str) -> LinkKey:
    a, sep, b = label.partition("-")
    if not sep or not a or not b:
        raise TopologyValidationError(f"Malformed link label '{label}'", element=label)
    return link_key(a, b)


@dataclass(frozen=True)
class Topology:
    """Undirected fiber network with per-link lengths in km."""

    nodes: Tuple[str, ...]
    lengths: Dict[LinkKey, float]

    @cached_property
    def graph(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(self.nodes)
        for (a, b), km in self.lengths.items():
            graph.add_edge(a, b, km=km)
        return graph

    @property
    def links(self) -> List[LinkKey]:
        return sorted(self.lengths, key=lambda l: (node_sort_key(l[0]), node_sort_key(l[1])))

    def has_node(self, node: str) -> bool:
        return node in self.graph

    def link(self, u: str, v: str) -> LinkKey:
        key = link_key(u, v)
        if key not in self.lengths:
            raise TopologyValidationError(f"No link between {u} and {v}", element=[u, v])
        return key

    def length_km(self, link: LinkKey) -> float:
        return self.lengths[link]

    def outgoing(self, node: str) -> List[Tuple[str, str]]:
        """Directed view of the links leaving a node."""
        return [(node, m) for m in sorted(self.graph.neighbors(node), key=node_sort_key)]

    def incoming(self, node: str) -> List[Tuple[str, str]]:
        """Directed view of the links entering a node."""
        return [(m, node) for m in sorted(self.graph.neighbors(node), key=node_sort_key)]

    def path_links(self, path: Sequence[str]) -> List[LinkKey]:
        return [self.link(path[i], path[i + 1]) for i in range(len(path) - 1)]

    def path_length(self, path: Sequence[str]) -> float:
        return sum(self.lengths[link] for link in self.path_links(path))


@dataclass(frozen=True)
class ChainRequest:
    """A secured chain request f from source to destination."""

    id: str
    source: str
    destination: str
    demand: DemandDistribution
    provider: Optional[str] = None
    # Rate used to price stage-one devices; the expected demand when unset.
    first_stage_rate: Optional[float] = None

    @property
    def planning_rate(self) -> float:
        if self.first_stage_rate is not None:
            return self.first_stage_rate
        return self.demand.expected()


@dataclass(frozen=True)
class Provider:
    """A QKD service provider and what it brings to a pool."""

    id: str
    qkd_contribution_per_link: int = 0
    km_contribution_per_link: int = 0
    qkd_share_price: float = 0.0
    km_share_price: float = 0.0
    cooperation_fee: float = 0.0
    link_overrides: Dict[LinkKey, Dict[str, int]] = field(default_factory=dict)

    def contribution(self, link: LinkKey, resource: str) -> int:
        """Wavelengths of the given resource ('qkd' or 'km') offered on a link."""
        override = self.link_overrides.get(link, {})
        if resource in override:
            return override[resource]
        if resource == "qkd":
            return self.qkd_contribution_per_link
        return self.km_contribution_per_link


def _as_document(document: Union[str, Dict[str, Any]], what: str) -> Dict[str, Any]:
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as e:
            raise TopologyValidationError(f"{what} document is not valid JSON: {e}",
                                          operation=f"load_{what}", cause=e)
    if not isinstance(document, dict):
        raise TopologyValidationError(f"{what} document must be a JSON object",
                                      operation=f"load_{what}")
    return document


def _positive_finite(value: Any) -> bool:
    return (isinstance(value, (int, float)) and not isinstance(value, bool)
            and math.isfinite(value) and value > 0)


def load_topology(document: Union[str, Dict[str, Any]]) -> Topology:
    """
    Parse and validate a topology document.

    Args:
        document: JSON text or parsed object {"nodes": [...], "links": [{"a", "b", "km"}...]}

    Returns:
        Validated Topology

    Raises:
        TopologyValidationError: naming the offending element
    """
    doc = _as_document(document, "topology")
    nodes = doc.get("nodes")
    links = doc.get("links")
    if not isinstance(nodes, list) or not isinstance(links, list):
        raise TopologyValidationError("Topology needs 'nodes' and 'links' lists", element=sorted(doc))

    declared: List[str] = []
    for node in nodes:
        if not isinstance(node, str) or not node:
            raise TopologyValidationError(f"Node ids must be non-empty strings, got {node!r}", element=node)
        if node in declared:
            raise TopologyValidationError(f"Duplicate node '{node}'", element=node)
        declared.append(node)
    known = set(declared)

    lengths: Dict[LinkKey, float] = {}
    for entry in links:
        if not isinstance(entry, dict) or not {"a", "b", "km"} <= set(entry):
            raise TopologyValidationError("Link entries need 'a', 'b' and 'km'", element=entry)
        a, b, km = entry["a"], entry["b"], entry["km"]
        if a == b:
            raise TopologyValidationError(f"Self-loop on node '{a}'", element=entry)
        for endpoint in (a, b):
            if endpoint not in known:
                raise TopologyValidationError(f"Link endpoint '{endpoint}' is not a declared node",
                                              element=entry)
        if not _positive_finite(km):
            raise TopologyValidationError(f"Link {a}-{b} length must be positive and finite",
                                          element=entry)
        key = link_key(a, b)
        if key in lengths:
            raise TopologyValidationError(f"Duplicate link {link_label(key)}", element=entry)
        lengths[key] = float(km)

    topology = Topology(nodes=tuple(declared), lengths=lengths)
    logger.debug(f"Loaded topology with {len(declared)} nodes and {len(lengths)} links")
    return topology


def load_requests(document: Union[str, Dict[str, Any]],
                  topology: Topology,
                  distributions: Optional[Dict[str, Any]] = None) -> List[ChainRequest]:
    """
    Parse chain requests and attach their demand distributions.

    A request's "demand" is either an inline distribution document or the
    name of an entry in the document's "distributions" map (or the
    distributions argument).
    """
    doc = _as_document(document, "requests")
    entries = doc.get("requests")
    if not isinstance(entries, list):
        raise TopologyValidationError("Requests document needs a 'requests' list",
                                      operation="load_requests")
    named = dict(distributions or {})
    named.update(doc.get("distributions", {}))

    requests: List[ChainRequest] = []
    seen = set()
    for entry in entries:
        if not isinstance(entry, dict) or not {"id", "src", "dst", "demand"} <= set(entry):
            raise TopologyValidationError("Request entries need 'id', 'src', 'dst' and 'demand'",
                                          element=entry, operation="load_requests")
        rid, src, dst = str(entry["id"]), str(entry["src"]), str(entry["dst"])
        if rid in seen:
            raise TopologyValidationError(f"Duplicate request id '{rid}'", element=entry,
                                          operation="load_requests")
        seen.add(rid)
        if src == dst:
            raise TopologyValidationError(f"Request {rid} has identical source and destination",
                                          element=entry, operation="load_requests")
        for endpoint in (src, dst):
            if not topology.has_node(endpoint):
                raise TopologyValidationError(f"Request {rid} names unknown node '{endpoint}'",
                                              element=entry, operation="load_requests")

        demand_ref = entry["demand"]
        if isinstance(demand_ref, str):
            if demand_ref not in named:
                raise TopologyValidationError(f"Request {rid} references unknown distribution "
                                              f"'{demand_ref}'", element=entry, operation="load_requests")
            demand_ref = named[demand_ref]
        demand = distribution_from_document(demand_ref)

        first_stage_rate = entry.get("first_stage_rate")
        requests.append(ChainRequest(
            id=rid,
            source=src,
            destination=dst,
            demand=demand,
            provider=str(entry["provider"]) if entry.get("provider") is not None else None,
            first_stage_rate=float(first_stage_rate) if first_stage_rate is not None else None,
        ))

    return requests


def load_providers(document: Union[str, Dict[str, Any]]) -> List[Provider]:
    """Parse the provider list, including optional per-link contribution overrides."""
    doc = _as_document(document, "providers")
    entries = doc.get("providers")
    if not isinstance(entries, list):
        raise TopologyValidationError("Providers document needs a 'providers' list",
                                      operation="load_providers")

    providers: List[Provider] = []
    seen = set()
    for entry in entries:
        if not isinstance(entry, dict) or "id" not in entry:
            raise TopologyValidationError("Provider entries need an 'id'", element=entry,
                                          operation="load_providers")
        pid = str(entry["id"])
        if pid in seen:
            raise TopologyValidationError(f"Duplicate provider id '{pid}'", element=entry,
                                          operation="load_providers")
        seen.add(pid)

        counts = {key: entry.get(key, 0) for key in ("qkd", "km")}
        prices = {key: entry.get(key, 0.0) for key in ("qkd_price", "km_price", "cooperation_fee")}
        for key, value in counts.items():
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise TopologyValidationError(f"Provider {pid} '{key}' must be a nonnegative integer",
                                              element=entry, operation="load_providers")
        for key, value in prices.items():
            if not isinstance(value, (int, float)) or isinstance(value, bool) or value < 0:
                raise TopologyValidationError(f"Provider {pid} '{key}' must be nonnegative",
                                              element=entry, operation="load_providers")

        overrides: Dict[LinkKey, Dict[str, int]] = {}
        for label, override in entry.get("links", {}).items():
            overrides[parse_link_label(label)] = {k: int(v) for k, v in override.items()
                                                  if k in ("qkd", "km")}

        providers.append(Provider(
            id=pid,
            qkd_contribution_per_link=counts["qkd"],
            km_contribution_per_link=counts["km"],
            qkd_share_price=float(prices["qkd_price"]),
            km_share_price=float(prices["km_price"]),
            cooperation_fee=float(prices["cooperation_fee"]),
            link_overrides=overrides,
        ))

    return providers


def k_candidate_paths(topology: Topology, request: ChainRequest, k: int) -> List[Path]:
    """
    Up to k loop-free paths for a request, shortest first.

    Paths of equal length are ordered by their node sequence. Every path
    tied with the k-th length is collected before truncating so the
    tie-break sees the whole tie class.

    Raises:
        ParameterError: k below 1
        UnreachableRequestError: when source and destination are disconnected
    """
    if k < 1:
        raise ParameterError("k must be >= 1", parameter="k", value=k, component="network_model",
                             operation="k_candidate_paths")

    src, dst = request.source, request.destination
    if not (topology.has_node(src) and topology.has_node(dst)) or not nx.has_path(topology.graph, src, dst):
        raise UnreachableRequestError(f"No path from {src} to {dst} for request {request.id}",
                                      source=src, destination=dst, request_id=request.id)

    collected: List[Tuple[float, Path]] = []
    kth_length: Optional[float] = None
    for candidate in nx.shortest_simple_paths(topology.graph, src, dst, weight="km"):
        length = topology.path_length(candidate)
        if kth_length is not None and not math.isclose(length, kth_length, rel_tol=1e-12, abs_tol=1e-9):
            break
        collected.append((length, tuple(candidate)))
        if len(collected) == k:
            kth_length = length

    collected.sort(key=lambda item: (round(item[0], 9), [node_sort_key(n) for n in item[1]]))
    return [path for _, path in collected[:k]]
