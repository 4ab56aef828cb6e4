# planning/sp_planner.py
"""
Two-stage stochastic planner.

Stage one picks a route per request and per-link wavelength reservations;
stage two uses reserved wavelengths within the pool and buys the rest on
demand. The deterministic equivalent is solved by decomposition: route
search over candidate paths, and per (link, resource) reservation sizing
over the requests that share the link.
"""

import itertools
import logging
import math
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from planning.cost_model import route_first_stage_energy
from planning.demand_scenarios import (
    JointScenarioSpace, enumerate_joint, sample_joint,
)
from planning.exceptions import ParameterError
from planning.instance import (
    Plan, PlanEvaluation, PlanningInstance, Recourse, ReservationKey, ScenarioRow, SolveResult,
)
from planning.network_model import ChainRequest, LinkKey, Path, k_candidate_paths
from planning.oracle import within_oracle_limits
from planning.recourse import (
    CostContext, LinkDecision, expected_link_cost, link_members, newsvendor_reservation,
    optimal_recourse, optimize_link,
)
from planning.settings import SolverSettings

logger = logging.getLogger(__name__)

SEARCH_MODES = ("independent", "exhaustive", "greedy")

_REL_TOL = 1e-9


def _strictly_below(candidate: float, incumbent: float) -> bool:
    return candidate < incumbent - _REL_TOL * max(1.0, abs(incumbent))


@dataclass(frozen=True)
class WaitAndSeeResult:
    value: float
    relaxed: bool
    scenarios: int


class StochasticPlanner:
    """
    Solver for one planning instance.

    Link decisions are memoized by (link, resource, requests on the link),
    so route assignments that share links reuse each other's work.
    """

    def __init__(self, instance: PlanningInstance, settings: Optional[SolverSettings] = None,
                 k: Optional[int] = None):
        self.instance = instance
        self.settings = settings or SolverSettings()
        self.k = self.settings.candidate_paths if k is None else k
        self.context = CostContext(instance)
        self._decisions: Dict[Tuple[LinkKey, str, Tuple[str, ...]], LinkDecision] = {}
        self._candidates: Optional[Dict[str, List[Path]]] = None
        self._oracle_sized: Optional[bool] = None

    def candidates(self) -> Dict[str, List[Path]]:
        if self._candidates is None:
            self._candidates = {
                r.id: k_candidate_paths(self.instance.topology, r, self.k)
                for r in sorted(self.instance.requests, key=lambda r: r.id)
            }
        return self._candidates

    def link_budget(self) -> Optional[int]:
        """Link enumeration budget; instances the oracle accepts are enumerated without one."""
        if self._oracle_sized is None:
            self._oracle_sized = within_oracle_limits(self.instance, self.candidates())
        return None if self._oracle_sized else self.settings.link_enumeration_budget

    def link_decision(self, link: LinkKey, resource: str, members: Tuple[str, ...]) -> LinkDecision:
        key = (link, resource, members)
        if key not in self._decisions:
            profiles = [self.context.profile(link, rid, resource) for rid in members]
            decision = optimize_link(profiles, self.instance.pools.capacity(link, resource),
                                     self.link_budget(), self.settings.scenario_cap)
            self._decisions[key] = decision
        return self._decisions[key]

    def _energy(self, routes: Dict[str, Path]) -> float:
        return math.fsum(route_first_stage_energy(routes[rid], self.instance.params) for rid in sorted(routes))

    def assignment_decisions(self, routes: Dict[str, Path]) -> List[Tuple[LinkKey, str, LinkDecision]]:
        decisions = []
        for link, members in link_members(routes, self.context).items():
            for resource in self.instance.resources:
                decisions.append((link, resource, self.link_decision(link, resource, members)))
        return decisions

    def assignment_cost(self, routes: Dict[str, Path]) -> Tuple[float, bool]:
        decisions = self.assignment_decisions(routes)
        total = math.fsum([d.total for _, _, d in decisions] + [self._energy(routes)])
        return total, all(d.exact for _, _, d in decisions)

    # Route search

    def _pools_never_bind(self) -> bool:
        """True when every link can hold the peak demand of every request that might use it."""
        load: Dict[Tuple[LinkKey, str], int] = {}
        for rid, paths in self.candidates().items():
            links = {link for path in paths for link in self.context.route_links(path)}
            for link in links:
                for resource in self.instance.resources:
                    key = (link, resource)
                    load[key] = load.get(key, 0) + self.context.max_demand(rid, resource)
        return all(total <= self.instance.pools.capacity(link, resource)
                   for (link, resource), total in load.items())

    def _search_independent(self) -> Tuple[Dict[str, Path], bool]:
        routes = {}
        for rid, paths in self.candidates().items():
            best_path, best_cost = None, None
            for path in paths:
                cost, _ = self.assignment_cost({rid: path})
                if best_cost is None or _strictly_below(cost, best_cost):
                    best_path, best_cost = path, cost
            routes[rid] = best_path
        return routes, True

    def _search_exhaustive(self) -> Tuple[Dict[str, Path], bool]:
        ids = list(self.candidates())
        best_routes, best_cost, all_exact = {}, None, True
        for combo in itertools.product(*(self.candidates()[rid] for rid in ids)):
            routes = dict(zip(ids, combo))
            cost, exact = self.assignment_cost(routes)
            all_exact = all_exact and exact
            if best_cost is None or _strictly_below(cost, best_cost):
                best_routes, best_cost = routes, cost
        return best_routes, all_exact

    def _search_greedy(self) -> Tuple[Dict[str, Path], bool]:
        order = sorted(self.instance.requests, key=lambda r: (-r.demand.expected(), r.id))
        routes: Dict[str, Path] = {}
        for request in order:
            before, _ = self.assignment_cost(routes) if routes else (0.0, True)
            best_path, best_cost = None, None
            for path in self.candidates()[request.id]:
                after, _ = self.assignment_cost({**routes, request.id: path})
                marginal = after - before
                logger.debug(f"Request {request.id} via {'-'.join(path)}: marginal {marginal:.4f}")
                if best_cost is None or _strictly_below(marginal, best_cost):
                    best_path, best_cost = path, marginal
            routes[request.id] = best_path

        shortest = {rid: paths[0] for rid, paths in self.candidates().items()}
        if _strictly_below(self.assignment_cost(shortest)[0], self.assignment_cost(routes)[0]):
            routes = shortest
        return routes, False

    def choose_mode(self, mode: Optional[str] = None) -> str:
        if mode is not None:
            if mode not in SEARCH_MODES:
                raise ParameterError(f"Unknown route search mode '{mode}'", parameter="mode", value=mode,
                                     component="sp_planner", operation="solve")
            return mode
        if self._pools_never_bind():
            return "independent"
        size = math.prod(len(paths) for paths in self.candidates().values())
        if size <= self.settings.route_search_budget:
            return "exhaustive"
        logger.info(f"Route product {size} exceeds budget {self.settings.route_search_budget}; "
                    f"searching greedily")
        return "greedy"

    def search_routes(self, mode: Optional[str] = None) -> Tuple[Dict[str, Path], str, bool]:
        mode = self.choose_mode(mode)
        if mode == "independent":
            routes, exact = self._search_independent()
        elif mode == "exhaustive":
            routes, exact = self._search_exhaustive()
        else:
            routes, exact = self._search_greedy()
        return routes, mode, exact

    # Plans

    def build_plan(self, routes: Dict[str, Path]) -> Tuple[Plan, PlanEvaluation]:
        reserved: Dict[str, Dict[ReservationKey, int]] = {"qkd": {}, "km": {}}
        firsts, seconds = [], []
        exact, repaired = True, False
        for link, resource, decision in self.assignment_decisions(routes):
            for rid, level in decision.reservations.items():
                if level:
                    reserved[resource][(link, rid)] = level
            firsts.append(decision.first_stage_cost)
            seconds.append(decision.second_stage_cost)
            exact = exact and decision.exact
            repaired = repaired or decision.repaired
        firsts.append(self._energy(routes))

        flags = ("repaired",) if repaired else ()
        plan = Plan(routes=dict(routes), qkd_reserved=reserved["qkd"], km_reserved=reserved["km"])
        return plan, PlanEvaluation(math.fsum(firsts), math.fsum(seconds), exact=exact, flags=flags)

    def solve(self, mode: Optional[str] = None, include_expected_value_plan: bool = True,
              with_breakdown: bool = True) -> SolveResult:
        """
        Best plan found, its evaluation and (when the joint space fits the cap) its recourse family.

        Raises:
            UnreachableRequestError: a request has no path
            ScenarioCapExceededError: a link-local scenario space is above the cap
        """
        n = len(self.instance.requests)
        logger.info(f"Solving {n} requests over {len(self.instance.topology.nodes)} nodes "
                    f"(resources: {', '.join(self.instance.resources)})")
        if n == 0:
            return SolveResult(plan=Plan(routes={}), evaluation=PlanEvaluation(0.0, 0.0), mode="independent")

        routes, mode, search_exact = self.search_routes(mode)
        plan, evaluation = self.build_plan(routes)
        exact = search_exact and evaluation.exact
        flags = list(evaluation.flags)

        if include_expected_value_plan and not exact:
            ev = StochasticPlanner(self.instance.expected_value_instance(), self.settings, self.k)
            ev_result = ev.solve(mode=mode, include_expected_value_plan=False, with_breakdown=False)
            ev_evaluation = evaluate_plan(self.instance, ev_result.plan, self.settings)
            if _strictly_below(ev_evaluation.total, evaluation.total):
                logger.info(f"Expected-value plan beats the searched plan "
                            f"({ev_evaluation.total:.4f} < {evaluation.total:.4f})")
                plan, evaluation = ev_result.plan, ev_evaluation
                flags.append("expected_value_plan")

        if not exact:
            flags.append("heuristic")
        evaluation = replace(evaluation, exact=exact, flags=tuple(flags))

        recourse: Tuple[Recourse, ...] = ()
        if with_breakdown:
            rows, recourse = scenario_breakdown(self.instance, plan, evaluation.first_stage_cost,
                                                self.settings, self.context)
            evaluation = replace(evaluation, breakdown=rows)

        logger.info(f"✅ Solved in {mode} mode: total {evaluation.total:.4f} "
                    f"(first {evaluation.first_stage_cost:.4f}, "
                    f"second {evaluation.expected_second_stage_cost:.4f}, exact={exact})")
        return SolveResult(plan=plan, evaluation=evaluation, recourse=recourse, mode=mode)


def scenario_breakdown(instance: PlanningInstance, plan: Plan, first_stage_cost: float,
                       settings: SolverSettings,
                       context: Optional[CostContext] = None) -> Tuple[Tuple[ScenarioRow, ...], Tuple[Recourse, ...]]:
    """Per-scenario recourse of a plan; empty when the joint space is above the cap."""
    space = JointScenarioSpace({r.id: r.demand for r in instance.requests})
    if space.cardinality > settings.scenario_cap:
        logger.warning(f"Joint scenario space has {space.cardinality} scenarios (cap "
                       f"{settings.scenario_cap}); skipping the per-scenario breakdown")
        return (), ()
    context = context or CostContext(instance)
    rows, family = [], []
    for index, (scenario, probability) in enumerate(enumerate_joint(space, settings.scenario_cap)):
        recourse = optimal_recourse(plan, scenario, instance, context)
        family.append(recourse)
        rows.append(ScenarioRow(index, probability, first_stage_cost, recourse.cost))
    return tuple(rows), tuple(family)


def sampled_recourse(instance: PlanningInstance, plan: Plan, n: int,
                     rng: np.random.Generator) -> Tuple[Recourse, ...]:
    """Recourse on sampled joint scenarios, for auditing plans whose joint space is too large."""
    space = JointScenarioSpace({r.id: r.demand for r in instance.requests})
    context = CostContext(instance)
    return tuple(optimal_recourse(plan, scenario, instance, context)
                 for scenario in sample_joint(space, n, rng))


def solve(instance: PlanningInstance, k: Optional[int] = None, settings: Optional[SolverSettings] = None,
          mode: Optional[str] = None, with_breakdown: bool = True) -> SolveResult:
    return StochasticPlanner(instance, settings, k).solve(mode=mode, with_breakdown=with_breakdown)


def optimal_reservation_for_route(route: Path, request: ChainRequest,
                                  instance: PlanningInstance) -> Dict[LinkKey, Dict[str, int]]:
    """Per-link reservations of one request on a fixed route, pool assumed slack."""
    context = CostContext(instance.with_requests([request]))
    result = {}
    for link in context.route_links(tuple(route)):
        result[link] = {}
        for resource in instance.resources:
            profile = context.profile(link, request.id, resource)
            result[link][resource] = newsvendor_reservation(profile.reserve_cost, profile.outcomes)[0]
    return result


def evaluate_plan(instance: PlanningInstance, plan: Plan, settings: Optional[SolverSettings] = None,
                  with_breakdown: bool = False) -> PlanEvaluation:
    """Exact expected cost of any stage-one plan."""
    settings = settings or SolverSettings()
    context = CostContext(instance)
    firsts, seconds = [], []
    for link, members in link_members(plan.routes, context).items():
        for resource in instance.resources:
            profiles = [context.profile(link, rid, resource) for rid in members]
            reservations = {rid: plan.reserved(resource, link, rid) for rid in members}
            first, second = expected_link_cost(profiles, reservations,
                                               instance.pools.capacity(link, resource), settings.scenario_cap)
            firsts.append(first)
            seconds.append(second)
    firsts.extend(route_first_stage_energy(plan.routes[rid], instance.params) for rid in sorted(plan.routes))

    evaluation = PlanEvaluation(math.fsum(firsts), math.fsum(seconds))
    if with_breakdown:
        rows, _ = scenario_breakdown(instance, plan, evaluation.first_stage_cost, settings, context)
        evaluation = replace(evaluation, breakdown=rows)
    return evaluation


def solve_eev(instance: PlanningInstance, k: Optional[int] = None,
              settings: Optional[SolverSettings] = None) -> PlanEvaluation:
    """True expected cost of the plan that is optimal when every demand sits at its mean."""
    settings = settings or SolverSettings()
    ev_result = StochasticPlanner(instance.expected_value_instance(), settings, k).solve(
        include_expected_value_plan=False, with_breakdown=False)
    return evaluate_plan(instance, ev_result.plan, settings)


def _per_request_relaxation(instance: PlanningInstance, k: Optional[int], settings: SolverSettings) -> float:
    terms = []
    for request in sorted(instance.requests, key=lambda r: r.id):
        alone = instance.with_requests([request])
        for parallel, probability, rate in CostContext(alone).parallel_outcomes(request.id):
            result = StochasticPlanner(alone.scenario_instance({request.id: rate}), settings, k).solve(
                include_expected_value_plan=False, with_breakdown=False)
            terms.append(probability * result.total)
    return math.fsum(terms)


def solve_ws(instance: PlanningInstance, k: Optional[int] = None,
             settings: Optional[SolverSettings] = None) -> WaitAndSeeResult:
    """
    Wait-and-see bound: expected cost of planning with every scenario known in advance.

    Stage-one prices stay at the expected rates. When the joint space is too
    large, or some per-scenario solve cannot be certified optimal, every
    request is planned alone against the full pool instead; that value is
    still a lower bound and is flagged relaxed.
    """
    settings = settings or SolverSettings()
    if not instance.requests:
        return WaitAndSeeResult(0.0, relaxed=False, scenarios=1)

    context = CostContext(instance)
    ids = instance.request_ids
    outcome_lists = [context.parallel_outcomes(rid) for rid in ids]
    size = math.prod(len(o) for o in outcome_lists)
    limit = min(settings.scenario_cap, settings.ws_scenario_budget)

    if size <= limit:
        terms = []
        for combo in itertools.product(*outcome_lists):
            scenario = {rid: rate for rid, (_, _, rate) in zip(ids, combo)}
            probability = math.prod(p for _, p, _ in combo)
            result = StochasticPlanner(instance.scenario_instance(scenario), settings, k).solve(
                include_expected_value_plan=False, with_breakdown=False)
            if not result.exact:
                logger.warning("A wait-and-see scenario could not be solved exactly; "
                               "using the per-request relaxation")
                break
            terms.append(probability * result.total)
        else:
            return WaitAndSeeResult(math.fsum(terms), relaxed=False, scenarios=size)
    else:
        logger.warning(f"Wait-and-see space has {size} scenarios (limit {limit}); "
                       f"using the per-request relaxation")

    return WaitAndSeeResult(_per_request_relaxation(instance, k, settings), relaxed=True, scenarios=size)


def greedy_on_demand_baseline(instance: PlanningInstance, k: Optional[int] = None,
                              settings: Optional[SolverSettings] = None) -> PlanEvaluation:
    """Shortest path per request, nothing reserved, every wavelength bought on demand."""
    settings = settings or SolverSettings()
    routes = {r.id: k_candidate_paths(instance.topology, r, 1)[0] for r in instance.requests}
    return evaluate_plan(instance, Plan(routes=routes), settings)


def fixed_reservation_plan(instance: PlanningInstance, routes: Dict[str, Path],
                           qkd: Optional[int] = None, km: Optional[int] = None) -> Plan:
    """Plan reserving the same wavelength count for every request on every route link."""
    context = CostContext(instance)
    qkd_reserved, km_reserved = {}, {}
    for rid, route in routes.items():
        for link in context.route_links(route):
            if qkd is not None:
                qkd_reserved[(link, rid)] = qkd
            if km is not None:
                km_reserved[(link, rid)] = km
    return Plan(routes=dict(routes), qkd_reserved=qkd_reserved, km_reserved=km_reserved)


def scaled_demand_instance(instance: PlanningInstance, factor: float) -> PlanningInstance:
    """Every demand support (and explicit stage-one rate) multiplied by factor."""
    return instance.with_requests([
        replace(r, demand=r.demand.scaled(factor),
                first_stage_rate=r.first_stage_rate * factor if r.first_stage_rate is not None else None)
        for r in instance.requests
    ])


def planned_requests(instance: PlanningInstance, count: int) -> PlanningInstance:
    """Instance restricted to the first count requests in id order."""
    ids = set(instance.request_ids[:count])
    return instance.with_requests([r for r in instance.requests if r.id in ids])
