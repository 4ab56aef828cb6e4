# planning/instance.py
"""
Planning instance and plan types shared by the solver, oracle and checker.
"""

from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Sequence, Tuple

from planning.cost_model import PhysicalParams, PriceTable
from planning.demand_scenarios import DemandDistribution, Scenario, degenerate_distribution
from planning.exceptions import ParameterError
from planning.network_model import ChainRequest, LinkKey, Path, Topology, link_label

RESOURCES = ("qkd", "km")

ReservationKey = Tuple[LinkKey, str]


@dataclass(frozen=True)
class PoolCapacities:
    """Per-link wavelength capacity of a coalition's pool."""

    qkd_per_link: Dict[LinkKey, int]
    km_per_link: Dict[LinkKey, int]
    qkd_cap: int = 1000
    km_cap: int = 300

    def __post_init__(self):
        for resource, per_link, cap in (("qkd", self.qkd_per_link, self.qkd_cap),
                                        ("km", self.km_per_link, self.km_cap)):
            for link, value in per_link.items():
                if not isinstance(value, int) or value < 0:
                    raise ParameterError(f"{resource} capacity on {link_label(link)} must be a "
                                         f"nonnegative integer", parameter=f"{resource}_per_link",
                                         value=value, component="sp_planner")
                if value > cap:
                    raise ParameterError(f"{resource} capacity {value} on {link_label(link)} exceeds "
                                         f"the pool maximum {cap}", parameter=f"{resource}_per_link",
                                         value=value, component="sp_planner")

    def capacity(self, link: LinkKey, resource: str) -> int:
        per_link = self.qkd_per_link if resource == "qkd" else self.km_per_link
        return per_link.get(link, 0)

    @classmethod
    def uniform(cls, topology: Topology, qkd: int, km: int,
                qkd_cap: int = 1000, km_cap: int = 300) -> "PoolCapacities":
        """Same capacity on every link."""
        return cls(
            qkd_per_link={link: qkd for link in topology.links},
            km_per_link={link: km for link in topology.links},
            qkd_cap=qkd_cap,
            km_cap=km_cap,
        )

    @classmethod
    def slack(cls, topology: Topology, qkd_cap: int = 1000, km_cap: int = 300) -> "PoolCapacities":
        return cls.uniform(topology, qkd_cap, km_cap, qkd_cap, km_cap)


@dataclass(frozen=True)
class PlanningInstance:
    """Everything a solve needs: network, requests, pool, prices and physics."""

    topology: Topology
    requests: Tuple[ChainRequest, ...]
    pools: PoolCapacities
    prices: PriceTable
    params: PhysicalParams
    resources: Tuple[str, ...] = RESOURCES

    def __post_init__(self):
        unknown = [r for r in self.resources if r not in RESOURCES]
        if unknown or not self.resources:
            raise ParameterError(f"Resources must be a nonempty subset of {RESOURCES}",
                                 parameter="resources", value=list(self.resources),
                                 component="sp_planner")
        ids = [r.id for r in self.requests]
        if len(set(ids)) != len(ids):
            raise ParameterError("Request ids must be unique", parameter="requests", value=ids,
                                 component="sp_planner")

    @property
    def request_ids(self) -> List[str]:
        return sorted(r.id for r in self.requests)

    def request(self, request_id: str) -> ChainRequest:
        for request in self.requests:
            if request.id == request_id:
                return request
        raise KeyError(request_id)

    def with_requests(self, requests: Sequence[ChainRequest]) -> "PlanningInstance":
        return replace(self, requests=tuple(requests))

    def with_pools(self, pools: PoolCapacities) -> "PlanningInstance":
        return replace(self, pools=pools)

    def with_prices(self, prices: PriceTable) -> "PlanningInstance":
        return replace(self, prices=prices)

    def with_demands(self, demands: Dict[str, DemandDistribution]) -> "PlanningInstance":
        """Replace demand distributions while keeping every request's stage-one rate."""
        return self.with_requests([
            replace(r, demand=demands[r.id], first_stage_rate=r.planning_rate) if r.id in demands else r
            for r in self.requests
        ])

    def expected_value_instance(self) -> "PlanningInstance":
        """Every demand fixed at its expectation."""
        return self.with_demands({r.id: degenerate_distribution(r.demand.expected()) for r in self.requests})

    def scenario_instance(self, scenario: Scenario) -> "PlanningInstance":
        """Demands known in advance; stage-one prices stay at the expected rates."""
        return self.with_demands({rid: degenerate_distribution(rate) for rid, rate in scenario.items()})


@dataclass(frozen=True)
class Plan:
    """Stage-one decisions: one route per request and per-link reservations."""

    routes: Dict[str, Path]
    qkd_reserved: Dict[ReservationKey, int] = field(default_factory=dict)
    km_reserved: Dict[ReservationKey, int] = field(default_factory=dict)

    def reservations(self, resource: str) -> Dict[ReservationKey, int]:
        return self.qkd_reserved if resource == "qkd" else self.km_reserved

    def reserved(self, resource: str, link: LinkKey, request_id: str) -> int:
        return self.reservations(resource).get((link, request_id), 0)

    def to_document(self) -> Dict[str, Any]:
        def rows(reserved: Dict[ReservationKey, int]) -> List[Dict[str, Any]]:
            return [{"link": link_label(link), "request": rid, "wavelengths": count}
                    for (link, rid), count in sorted(reserved.items(),
                                                     key=lambda item: (item[0][1], item[0][0]))
                    if count]

        return {
            "routes": {rid: list(path) for rid, path in sorted(self.routes.items())},
            "qkd_reserved": rows(self.qkd_reserved),
            "km_reserved": rows(self.km_reserved),
        }


@dataclass(frozen=True)
class LinkUsage:
    """Second-stage wavelengths of one request on one link in one scenario."""

    qkd_used: int = 0
    qkd_on_demand: int = 0
    km_used: int = 0
    km_on_demand: int = 0

    def used(self, resource: str) -> int:
        return self.qkd_used if resource == "qkd" else self.km_used

    def on_demand(self, resource: str) -> int:
        return self.qkd_on_demand if resource == "qkd" else self.km_on_demand


@dataclass(frozen=True)
class Recourse:
    scenario: Scenario
    usage: Dict[ReservationKey, LinkUsage]
    cost: float


@dataclass(frozen=True)
class ScenarioRow:
    index: int
    probability: float
    first_stage_cost: float
    second_stage_cost: float


@dataclass(frozen=True)
class PlanEvaluation:
    """Cost of a plan: stage one plus expected stage two."""

    first_stage_cost: float
    expected_second_stage_cost: float
    breakdown: Tuple[ScenarioRow, ...] = ()
    exact: bool = True
    flags: Tuple[str, ...] = ()

    @property
    def total(self) -> float:
        return self.first_stage_cost + self.expected_second_stage_cost


@dataclass(frozen=True)
class SolveResult:
    plan: Plan
    evaluation: PlanEvaluation
    recourse: Tuple[Recourse, ...] = ()
    mode: str = "independent"

    @property
    def total(self) -> float:
        return self.evaluation.total

    @property
    def exact(self) -> bool:
        return self.evaluation.exact

    @property
    def flags(self) -> Tuple[str, ...]:
        return self.evaluation.flags


def demand_wavelengths(parallel: int, resource: str, params: PhysicalParams) -> int:
    """Wavelengths a request needs on each route link for a given parallel-link count."""
    if resource == "qkd":
        return params.qkd_wavelengths_per_link * parallel
    return params.km_wavelengths_per_link * parallel


def first_candidate_routes(candidates: Dict[str, List[Path]]) -> Dict[str, Path]:
    return {rid: paths[0] for rid, paths in candidates.items()}

