# planning/feasibility.py
"""Independent audit of a plan and its recourse against every model constraint."""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence

from planning.cost_model import parallel_links
from planning.instance import Plan, PlanningInstance, Recourse, demand_wavelengths
from planning.network_model import link_key, link_label

logger = logging.getLogger(__name__)


@dataclass
class FeasibilityReport:
    violations: List[str] = field(default_factory=list)
    scenarios_checked: int = 0

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> Dict[str, Any]:
        return {
            'success': self.passed,
            'violations': list(self.violations),
            'scenarios_checked': self.scenarios_checked,
        }


def _check_route(instance: PlanningInstance, rid: str, route, report: FeasibilityReport) -> bool:
    request = instance.request(rid)
    if len(route) < 2 or route[0] != request.source or route[-1] != request.destination:
        report.violations.append(f"Route of {rid} does not join {request.source} to {request.destination}")
        return False
    if len(set(route)) != len(route):
        report.violations.append(f"Route of {rid} revisits a node")
        return False
    for u, v in zip(route, route[1:]):
        if link_key(u, v) not in instance.topology.lengths:
            report.violations.append(f"Route of {rid} uses missing link {u}-{v}")
            return False
    return True


def check_feasibility(instance: PlanningInstance, plan: Plan,
                      recourse_family: Sequence[Recourse] = ()) -> FeasibilityReport:
    """
    Check flow, reservation placement, integrality, reservation caps, pool caps and demand.

    Returns:
        FeasibilityReport listing every violated constraint
    """
    report = FeasibilityReport()
    route_links = {}

    known = {r.id for r in instance.requests}
    for rid in sorted(known):
        if rid not in plan.routes:
            report.violations.append(f"Request {rid} has no route")
    for rid, route in sorted(plan.routes.items()):
        if rid not in known:
            report.violations.append(f"Route for unknown request {rid}")
            continue
        if _check_route(instance, rid, route, report):
            route_links[rid] = {link_key(u, v) for u, v in zip(route, route[1:])}

    for resource in ("qkd", "km"):
        per_link_cap = instance.pools.qkd_cap if resource == "qkd" else instance.pools.km_cap
        for link in instance.topology.links:
            if instance.pools.capacity(link, resource) > per_link_cap:
                report.violations.append(f"{resource} pool on {link_label(link)} exceeds its maximum")
        for (link, rid), count in sorted(plan.reservations(resource).items()):
            if not isinstance(count, int) or count < 0:
                report.violations.append(f"{resource} reservation of {rid} on {link_label(link)} "
                                         f"is not a nonnegative integer")
            if count and link not in route_links.get(rid, set()):
                report.violations.append(f"{resource} reservation of {rid} on {link_label(link)} is off-route")

    params = instance.params
    for recourse in recourse_family:
        report.scenarios_checked += 1
        utilized: Dict[tuple, int] = {}
        for (link, rid), usage in sorted(recourse.usage.items()):
            on_route = link in route_links.get(rid, set())
            for resource in ("qkd", "km"):
                used, extra = usage.used(resource), usage.on_demand(resource)
                if used < 0 or extra < 0:
                    report.violations.append(f"Negative {resource} recourse for {rid} on {link_label(link)}")
                if not on_route and (used or extra):
                    report.violations.append(f"{resource} recourse for {rid} on off-route link {link_label(link)}")
                if used > plan.reserved(resource, link, rid):
                    report.violations.append(f"{resource} use of {rid} on {link_label(link)} exceeds its "
                                             f"reservation")
                utilized[(link, resource)] = utilized.get((link, resource), 0) + used

        for (link, resource), total in sorted(utilized.items()):
            if total > instance.pools.capacity(link, resource):
                report.violations.append(f"{resource} use on {link_label(link)} exceeds the pool in "
                                         f"scenario {recourse.scenario}")

        for rid, links in sorted(route_links.items()):
            parallel = parallel_links(recourse.scenario[rid], params.key_rate_per_link)
            for link in sorted(links):
                usage = recourse.usage.get((link, rid))
                for resource in instance.resources:
                    needed = demand_wavelengths(parallel, resource, params)
                    got = (usage.used(resource) + usage.on_demand(resource)) if usage else 0
                    if got < needed:
                        report.violations.append(f"{resource} demand of {rid} on {link_label(link)} "
                                                 f"unmet in scenario {recourse.scenario}")

    if report.passed:
        logger.debug(f"Plan passed the audit over {report.scenarios_checked} scenarios")
    else:
        logger.warning(f"Plan failed the audit with {len(report.violations)} violations")
    return report
