# planning/recourse.py
"""
Per-link second-stage recourse and reservation sizing.

Everything here works on one (link, resource) pair at a time: the requests
routed over the link compete for the pool's wavelengths on that link and
for nothing else, so the plan-level problems decompose into these pieces.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from planning.cost_model import WavelengthCoefficients, objective_coefficients, parallel_links
from planning.demand_scenarios import Scenario
from planning.exceptions import ScenarioCapExceededError
from planning.instance import (
    LinkUsage, Plan, PlanningInstance, Recourse, ReservationKey, demand_wavelengths,
)
from planning.network_model import LinkKey, Path, node_sort_key

logger = logging.getLogger(__name__)

_REL_TOL = 1e-12


def _improves(candidate: float, incumbent: Optional[float]) -> bool:
    """Strict improvement that ignores float noise."""
    if incumbent is None:
        return True
    return candidate < incumbent - _REL_TOL * max(1.0, abs(incumbent))


@dataclass(frozen=True)
class LinkClaim:
    """One request's second-stage position on a link in a single scenario."""

    request_id: str
    reserved: int
    demand: int
    utilization_cost: float
    on_demand_cost: float

    @property
    def savings(self) -> float:
        return self.on_demand_cost - self.utilization_cost


@dataclass(frozen=True)
class LinkAllocation:
    request_id: str
    used: int
    on_demand: int


@dataclass(frozen=True)
class DemandOutcome:
    """Wavelength demand of a request on a link with its per-wavelength costs."""

    demand: int
    probability: float
    utilization_cost: float
    on_demand_cost: float

    def used(self, reserved: int) -> int:
        if self.on_demand_cost < self.utilization_cost:
            return 0
        return min(reserved, self.demand)

    def recourse_cost(self, reserved: int) -> float:
        used = self.used(reserved)
        return used * self.utilization_cost + (self.demand - used) * self.on_demand_cost


@dataclass(frozen=True)
class LinkProfile:
    """A request's stochastic view of one link: reservation price plus demand outcomes."""

    request_id: str
    reserve_cost: float
    outcomes: Tuple[DemandOutcome, ...]

    @property
    def max_demand(self) -> int:
        return max(o.demand for o in self.outcomes)

    @property
    def is_degenerate(self) -> bool:
        return len(self.outcomes) == 1

    def expected_recourse(self, reserved: int) -> float:
        return math.fsum(o.probability * o.recourse_cost(reserved) for o in self.outcomes)

    def expected_used(self, reserved: int) -> float:
        return math.fsum(o.probability * o.used(reserved) for o in self.outcomes)

    def marginal_savings(self, reserved: int) -> float:
        """Expected saving of the reserved-th wavelength net of its reservation price."""
        gain = math.fsum(o.probability * (o.on_demand_cost - o.utilization_cost)
                         for o in self.outcomes
                         if o.demand >= reserved and o.on_demand_cost >= o.utilization_cost)
        return gain - self.reserve_cost


@dataclass(frozen=True)
class LinkDecision:
    """Reservations chosen for one (link, resource) and their expected cost."""

    reservations: Dict[str, int]
    first_stage_cost: float
    second_stage_cost: float
    exact: bool
    repaired: bool = False

    @property
    def total(self) -> float:
        return self.first_stage_cost + self.second_stage_cost


def allocate_link_recourse(claims: Sequence[LinkClaim], capacity: int) -> Tuple[List[LinkAllocation], float]:
    """
    Cost-minimal use of reserved wavelengths on one link in one scenario.

    Reserved wavelengths go first to the requests that save the most per
    wavelength (on-demand minus utilization cost, ties by request id) until
    the pool capacity is spent; the rest of every demand is bought on demand.

    Returns:
        (allocations in request-id order, total recourse cost)
    """
    remaining = capacity
    by_request: Dict[str, LinkAllocation] = {}
    for claim in sorted(claims, key=lambda c: (-c.savings, c.request_id)):
        used = min(claim.reserved, claim.demand, remaining) if claim.savings >= 0 else 0
        remaining -= used
        by_request[claim.request_id] = LinkAllocation(claim.request_id, used, claim.demand - used)

    allocations = [by_request[rid] for rid in sorted(by_request)]
    costs = {c.request_id: by_request[c.request_id].used * c.utilization_cost
             + by_request[c.request_id].on_demand * c.on_demand_cost for c in claims}
    return allocations, math.fsum(costs[rid] for rid in sorted(costs))


def newsvendor_reservation(reserve_cost: float, outcomes: Sequence[DemandOutcome]) -> Tuple[int, float]:
    """
    Reservation level minimizing reservation plus expected recourse cost, pool ignored.

    Scans every level from zero to the largest demand; the smallest
    minimizer wins.

    Returns:
        (reservation, expected total cost)
    """
    profile = LinkProfile("", reserve_cost, tuple(outcomes))
    best_level, best_cost = 0, None
    for level in range(profile.max_demand + 1):
        cost = reserve_cost * level + profile.expected_recourse(level)
        if _improves(cost, best_cost):
            best_level, best_cost = level, cost
    return best_level, best_cost


def _joint_outcomes(profiles: Sequence[LinkProfile], scenario_cap: int):
    size = math.prod(len(p.outcomes) for p in profiles)
    if size > scenario_cap:
        raise ScenarioCapExceededError(
            f"Link-local scenario space of {len(profiles)} requests has {size} scenarios, "
            f"above the cap of {scenario_cap}", size=size, limit=scenario_cap,
            operation="expected_link_cost")
    for combo in itertools.product(*(p.outcomes for p in profiles)):
        yield combo, math.prod(o.probability for o in combo)


def expected_link_cost(profiles: Sequence[LinkProfile], reservations: Dict[str, int], capacity: int,
                       scenario_cap: int = 10 ** 6) -> Tuple[float, float]:
    """
    Reservation cost and expected recourse cost of fixed reservations on one link.

    When the reservations cannot exceed the pool even at peak demand, each
    request is evaluated on its own distribution; otherwise the joint
    space of the requests sharing the link is enumerated.

    Returns:
        (first-stage cost, expected second-stage cost)
    """
    ordered = sorted(profiles, key=lambda p: p.request_id)
    first = math.fsum(p.reserve_cost * reservations.get(p.request_id, 0) for p in ordered)
    peak = sum(min(reservations.get(p.request_id, 0), p.max_demand) for p in ordered)
    if peak <= capacity:
        second = math.fsum(p.expected_recourse(reservations.get(p.request_id, 0)) for p in ordered)
        return first, second

    terms = []
    for combo, probability in _joint_outcomes(ordered, scenario_cap):
        claims = [LinkClaim(p.request_id, reservations.get(p.request_id, 0), o.demand,
                            o.utilization_cost, o.on_demand_cost) for p, o in zip(ordered, combo)]
        _, cost = allocate_link_recourse(claims, capacity)
        terms.append(probability * cost)
    return first, math.fsum(terms)


def repair_reservations(profiles: Sequence[LinkProfile], reservations: Dict[str, int],
                        capacity: int) -> Tuple[Dict[str, int], bool]:
    """
    Trim reservations until the expected utilized wavelengths fit the pool.

    The request whose last reserved wavelength saves the least loses it
    first (ties by request id).
    """
    repaired = dict(reservations)
    by_id = {p.request_id: p for p in profiles}
    changed = False
    while math.fsum(by_id[rid].expected_used(level) for rid, level in sorted(repaired.items())) > capacity + 1e-9:
        holders = [rid for rid in sorted(repaired) if repaired[rid] > 0]
        victim = min(holders, key=lambda rid: (by_id[rid].marginal_savings(repaired[rid]), rid))
        repaired[victim] -= 1
        changed = True
    return repaired, changed


def optimize_link(profiles: Sequence[LinkProfile], capacity: int, enumeration_budget: Optional[int] = 20000,
                  scenario_cap: int = 10 ** 6) -> LinkDecision:
    """
    Best reservations for the requests sharing one link.

    Exact when the pool cannot bind, when every demand is known, or when
    the joint space of reservation vectors and scenarios fits the
    enumeration budget (None enumerates regardless of size). Otherwise the per-request optimum is trimmed to the
    pool and compared with reserving nothing; that result is heuristic.
    """
    ordered = sorted(profiles, key=lambda p: p.request_id)
    if not ordered:
        return LinkDecision({}, 0.0, 0.0, exact=True)

    newsvendor = {p.request_id: newsvendor_reservation(p.reserve_cost, p.outcomes)[0] for p in ordered}

    if sum(p.max_demand for p in ordered) <= capacity:
        first, second = expected_link_cost(ordered, newsvendor, capacity, scenario_cap)
        return LinkDecision(newsvendor, first, second, exact=True)

    if all(p.is_degenerate for p in ordered):
        reservations, repaired = repair_reservations(ordered, newsvendor, capacity)
        first, second = expected_link_cost(ordered, reservations, capacity, scenario_cap)
        return LinkDecision(reservations, first, second, exact=True, repaired=repaired)

    levels = [range(min(p.max_demand, capacity) + 1) for p in ordered]
    joint = math.prod(len(p.outcomes) for p in ordered)
    if enumeration_budget is None or math.prod(len(r) for r in levels) * joint <= enumeration_budget:
        return _enumerate_link(ordered, levels, capacity)

    reservations, repaired = repair_reservations(ordered, newsvendor, capacity)
    first, second = expected_link_cost(ordered, reservations, capacity, scenario_cap)
    zero = {p.request_id: 0 for p in ordered}
    zero_first, zero_second = expected_link_cost(ordered, zero, capacity, scenario_cap)
    if _improves(zero_first + zero_second, first + second):
        return LinkDecision(zero, zero_first, zero_second, exact=False, repaired=repaired)
    return LinkDecision(reservations, first, second, exact=False, repaired=repaired)


def _enumerate_link(ordered: Sequence[LinkProfile], levels: Sequence[range], capacity: int) -> LinkDecision:
    ids = [p.request_id for p in ordered]
    scenarios = []
    for combo in itertools.product(*(p.outcomes for p in ordered)):
        probability = math.prod(o.probability for o in combo)
        # Allocation priority depends on the scenario only.
        priority = sorted(range(len(ordered)),
                          key=lambda i: (-(combo[i].on_demand_cost - combo[i].utilization_cost), ids[i]))
        scenarios.append((probability, combo, priority))

    best: Optional[Tuple[float, Tuple[int, ...], float, float]] = None
    for vector in itertools.product(*levels):
        first = math.fsum(p.reserve_cost * level for p, level in zip(ordered, vector))
        terms = []
        for probability, combo, priority in scenarios:
            remaining = capacity
            costs = [0.0] * len(ordered)
            for i in priority:
                outcome = combo[i]
                savings = outcome.on_demand_cost - outcome.utilization_cost
                used = min(vector[i], outcome.demand, remaining) if savings >= 0 else 0
                remaining -= used
                costs[i] = used * outcome.utilization_cost + (outcome.demand - used) * outcome.on_demand_cost
            terms.append(probability * math.fsum(costs))
        second = math.fsum(terms)
        if best is None or _improves(first + second, best[0]):
            best = (first + second, vector, first, second)

    _, vector, first, second = best
    return LinkDecision(dict(zip(ids, vector)), first, second, exact=True)


class CostContext:
    """
    Cached cost coefficients and per-link demand profiles of one instance.

    Requests are seen through their parallel-link counts: rates that need
    the same number of parallel links cost the same, so their outcomes are
    merged.
    """

    def __init__(self, instance: PlanningInstance):
        self.instance = instance
        self._coefficients: Dict[Tuple[LinkKey, int, str], WavelengthCoefficients] = {}
        self._profiles: Dict[Tuple[LinkKey, str, str], LinkProfile] = {}
        self._parallel_outcomes: Dict[str, List[Tuple[int, float, float]]] = {}
        self._route_links: Dict[Path, List[LinkKey]] = {}

    def parallel(self, rate: float) -> int:
        return parallel_links(rate, self.instance.params.key_rate_per_link)

    def coefficients(self, link: LinkKey, parallel: int, phase: str) -> WavelengthCoefficients:
        key = (link, parallel, phase)
        if key not in self._coefficients:
            self._coefficients[key] = objective_coefficients(
                self.instance.topology.length_km(link), parallel,
                self.instance.prices, self.instance.params, phase)
        return self._coefficients[key]

    def route_links(self, route: Path) -> List[LinkKey]:
        if route not in self._route_links:
            self._route_links[route] = self.instance.topology.path_links(route)
        return self._route_links[route]

    def parallel_outcomes(self, request_id: str) -> List[Tuple[int, float, float]]:
        """(parallel links, probability, representative rate) in ascending parallel order."""
        if request_id not in self._parallel_outcomes:
            merged: Dict[int, List[float]] = {}
            for rate, probability in self.instance.request(request_id).demand.outcomes():
                entry = merged.setdefault(self.parallel(rate), [0.0, rate])
                entry[0] += probability
            self._parallel_outcomes[request_id] = [(p, prob, rate) for p, (prob, rate) in sorted(merged.items())]
        return self._parallel_outcomes[request_id]

    def planning_parallel(self, request_id: str) -> int:
        return self.parallel(self.instance.request(request_id).planning_rate)

    def max_demand(self, request_id: str, resource: str) -> int:
        top = self.parallel_outcomes(request_id)[-1][0]
        return demand_wavelengths(top, resource, self.instance.params)

    def profile(self, link: LinkKey, request_id: str, resource: str) -> LinkProfile:
        key = (link, request_id, resource)
        if key not in self._profiles:
            reserve = self.coefficients(link, self.planning_parallel(request_id), "r").for_resource(resource)
            outcomes = []
            for parallel, probability, _ in self.parallel_outcomes(request_id):
                outcomes.append(DemandOutcome(
                    demand=demand_wavelengths(parallel, resource, self.instance.params),
                    probability=probability,
                    utilization_cost=self.coefficients(link, parallel, "e").for_resource(resource),
                    on_demand_cost=self.coefficients(link, parallel, "o").for_resource(resource),
                ))
            self._profiles[key] = LinkProfile(request_id, reserve, tuple(outcomes))
        return self._profiles[key]

    def claim(self, link: LinkKey, request_id: str, resource: str, rate: float, reserved: int) -> LinkClaim:
        parallel = self.parallel(rate)
        return LinkClaim(
            request_id=request_id,
            reserved=reserved,
            demand=demand_wavelengths(parallel, resource, self.instance.params),
            utilization_cost=self.coefficients(link, parallel, "e").for_resource(resource),
            on_demand_cost=self.coefficients(link, parallel, "o").for_resource(resource),
        )


def link_members(routes: Dict[str, Path], context: CostContext) -> Dict[LinkKey, Tuple[str, ...]]:
    """Requests routed over every used link, keyed in link order."""
    members: Dict[LinkKey, List[str]] = {}
    for rid in sorted(routes):
        for link in context.route_links(routes[rid]):
            members.setdefault(link, []).append(rid)
    ordered = sorted(members, key=lambda l: (node_sort_key(l[0]), node_sort_key(l[1])))
    return {link: tuple(members[link]) for link in ordered}


def optimal_recourse(plan: Plan, scenario: Scenario, instance: PlanningInstance,
                     context: Optional[CostContext] = None) -> Recourse:
    """
    Cost-minimal second-stage decisions of a plan in one joint scenario.

    Recourse exists only on route links; every other variable is zero.
    """
    context = context or CostContext(instance)
    usage: Dict[ReservationKey, Dict[str, int]] = {}
    link_costs: List[float] = []
    for link, members in link_members(plan.routes, context).items():
        for resource in instance.resources:
            claims = [context.claim(link, rid, resource, scenario[rid], plan.reserved(resource, link, rid))
                      for rid in members]
            allocations, cost = allocate_link_recourse(claims, instance.pools.capacity(link, resource))
            link_costs.append(cost)
            for allocation in allocations:
                entry = usage.setdefault((link, allocation.request_id), {})
                entry[f"{resource}_used"] = allocation.used
                entry[f"{resource}_on_demand"] = allocation.on_demand

    logger.debug(f"Recourse for scenario {scenario}: {len(link_costs)} link terms")
    return Recourse(
        scenario=dict(scenario),
        usage={key: LinkUsage(**values) for key, values in usage.items()},
        cost=math.fsum(link_costs),
    )
