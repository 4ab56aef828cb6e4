# planning/oracle.py
"""
Brute-force verification oracle for tiny planning instances.

Shares no search code with the planner: it walks every route assignment,
every integer reservation vector up to the peak demand and every integer
utilization vector, pricing each with the cost model directly.
"""

import itertools
import logging
import math
from typing import Dict, List, Optional, Tuple

from planning.cost_model import objective_coefficients, parallel_links, route_first_stage_energy
from planning.exceptions import OracleLimitError
from planning.instance import PlanEvaluation, PlanningInstance, demand_wavelengths
from planning.network_model import LinkKey, Path, k_candidate_paths

logger = logging.getLogger(__name__)

MAX_REQUESTS = 3
MAX_PATHS = 6
MAX_SCENARIOS = 10 ** 4
_LIMITS = {"requests": MAX_REQUESTS, "paths": MAX_PATHS, "scenarios": MAX_SCENARIOS}


def _oversized(instance: PlanningInstance, candidates: Dict[str, List[Path]]) -> Tuple[Dict[str, int], List[str]]:
    report = {
        "requests": len(instance.requests),
        "paths": sum(len(p) for p in candidates.values()),
        "scenarios": math.prod(r.demand.size for r in instance.requests),
    }
    return report, [name for name in report if report[name] > _LIMITS[name]]


def within_oracle_limits(instance: PlanningInstance, candidates: Dict[str, List[Path]]) -> bool:
    """True when the oracle would accept the instance with these candidate paths."""
    return not _oversized(instance, candidates)[1]


def _check_size(instance: PlanningInstance, candidates: Dict[str, List[Path]]) -> None:
    report, over = _oversized(instance, candidates)
    if over:
        raise OracleLimitError(f"Instance too large for exhaustive verification ({', '.join(over)})",
                               size=report, limit=dict(_LIMITS))


class _LinkOracle:
    """Exhaustive optimum of one (link, resource) for a fixed set of requests."""

    def __init__(self, instance: PlanningInstance):
        self.instance = instance
        self._memo: Dict[Tuple[LinkKey, str, Tuple[str, ...]], Tuple[float, float]] = {}

    def _coefficient(self, link: LinkKey, rate: float, phase: str, resource: str) -> float:
        params = self.instance.params
        coefficients = objective_coefficients(self.instance.topology.length_km(link),
                                              parallel_links(rate, params.key_rate_per_link),
                                              self.instance.prices, params, phase)
        return coefficients.for_resource(resource)

    def _demand(self, rate: float, resource: str) -> int:
        params = self.instance.params
        return demand_wavelengths(parallel_links(rate, params.key_rate_per_link), resource, params)

    def best(self, link: LinkKey, resource: str, members: Tuple[str, ...]) -> Tuple[float, float]:
        key = (link, resource, members)
        if key in self._memo:
            return self._memo[key]

        requests = [self.instance.request(rid) for rid in members]
        capacity = self.instance.pools.capacity(link, resource)
        reserve = [self._coefficient(link, r.planning_rate, "r", resource) for r in requests]

        scenarios = []
        for combo in itertools.product(*(r.demand.outcomes() for r in requests)):
            probability = math.prod(p for _, p in combo)
            rows = [(self._demand(rate, resource),
                     self._coefficient(link, rate, "e", resource),
                     self._coefficient(link, rate, "o", resource)) for rate, _ in combo]
            scenarios.append((probability, rows))

        peaks = [max(self._demand(rate, resource) for rate in r.demand.support) for r in requests]
        best: Optional[Tuple[float, float]] = None
        for vector in itertools.product(*(range(peak + 1) for peak in peaks)):
            first = math.fsum(c * y for c, y in zip(reserve, vector))
            second = math.fsum(probability * self._min_recourse(rows, vector, capacity)
                               for probability, rows in scenarios)
            if best is None or first + second < best[0] + best[1]:
                best = (first, second)

        self._memo[key] = best
        return best

    @staticmethod
    def _min_recourse(rows, vector, capacity: int) -> float:
        best = None
        ranges = [range(min(y, demand) + 1) for y, (demand, _, _) in zip(vector, rows)]
        for used in itertools.product(*ranges):
            if sum(used) > capacity:
                continue
            cost = math.fsum(count * e + (demand - count) * o for count, (demand, e, o) in zip(used, rows))
            if best is None or cost < best:
                best = cost
        return best


def brute_force_oracle(instance: PlanningInstance, k: Optional[int] = None) -> PlanEvaluation:
    """
    Global optimum of a tiny instance by exhaustive enumeration.

    Raises:
        OracleLimitError: more than 3 requests, 6 candidate paths or 10^4 joint scenarios
    """
    k = 8 if k is None else k
    ordered = sorted(instance.requests, key=lambda r: r.id)
    candidates = {r.id: k_candidate_paths(instance.topology, r, k) for r in ordered}
    _check_size(instance, candidates)
    if not ordered:
        return PlanEvaluation(0.0, 0.0, flags=("oracle",))

    links = _LinkOracle(instance)
    best: Optional[Tuple[float, float]] = None
    ids = [r.id for r in ordered]
    for combo in itertools.product(*(candidates[rid] for rid in ids)):
        members: Dict[LinkKey, List[str]] = {}
        for rid, path in zip(ids, combo):
            for link in instance.topology.path_links(path):
                members.setdefault(link, []).append(rid)

        firsts = [route_first_stage_energy(path, instance.params) for path in combo]
        seconds = []
        for link in sorted(members):
            for resource in instance.resources:
                first, second = links.best(link, resource, tuple(sorted(members[link])))
                firsts.append(first)
                seconds.append(second)
        candidate = (math.fsum(firsts), math.fsum(seconds))
        if best is None or sum(candidate) < sum(best):
            best = candidate

    logger.info(f"Oracle optimum {sum(best):.6f} over {math.prod(len(c) for c in candidates.values())} "
                f"route assignments")
    return PlanEvaluation(best[0], best[1], flags=("oracle",))
