# reports/writers.py
"""
Report writers for planning experiments.

Each writer turns one experiment family's results into plot-ready files:
- PlanReportWriter: plan.json, routes.csv, links.csv, scenarios.csv
- SweepReportWriter / BoundsReportWriter / OracleReportWriter: one CSV each
- CoalitionReportWriter: payoffs, stability, stationary and fee-sweep CSVs
- BaseReportWriter: common functionality shared across writers

Files carry no timestamps, so identical runs produce identical bytes.
"""

import json
import logging
import os
from abc import ABC
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from planning.instance import PlanningInstance, SolveResult
from planning.network_model import link_label

logger = logging.getLogger(__name__)


class BaseReportWriter(ABC):
    """
    Base class for all report writers with common functionality.
    """

    def __init__(self, out_dir: str):
        """
        Initialize base report writer.

        Args:
            out_dir: Directory receiving the files (created when missing)
        """
        self.out_dir = out_dir
        self.written: List[str] = []

    def _path(self, name: str) -> str:
        os.makedirs(self.out_dir, exist_ok=True)
        return os.path.join(self.out_dir, name)

    def write_csv(self, name: str, rows: Sequence[Dict[str, Any]], columns: Sequence[str]) -> Dict[str, Any]:
        """
        Write rows as CSV with a fixed column order.

        Returns:
            Writing result dictionary
        """
        try:
            path = self._path(name)
            frame = pd.DataFrame(list(rows), columns=list(columns))
            frame.to_csv(path, index=False, lineterminator="\n")
            self.written.append(path)
            logger.info(f"✅ Wrote {len(frame)} rows to {path}")
            return {'success': True, 'path': path, 'rows': len(frame)}
        except OSError as e:
            error_msg = f"Failed to write {name}: {str(e)}"
            logger.error(error_msg)
            return {'success': False, 'error': error_msg, 'path': os.path.join(self.out_dir, name)}

    def write_json(self, name: str, document: Dict[str, Any]) -> Dict[str, Any]:
        try:
            path = self._path(name)
            with open(path, "w", encoding="utf-8", newline="\n") as f:
                json.dump(document, f, indent=2, sort_keys=True, ensure_ascii=False)
                f.write("\n")
            self.written.append(path)
            logger.info(f"✅ Wrote {path}")
            return {'success': True, 'path': path}
        except OSError as e:
            error_msg = f"Failed to write {name}: {str(e)}"
            logger.error(error_msg)
            return {'success': False, 'error': error_msg, 'path': os.path.join(self.out_dir, name)}

    @staticmethod
    def combine(results: Sequence[Dict[str, Any]]) -> Dict[str, Any]:
        failed = [r for r in results if not r.get('success')]
        return {
            'success': not failed,
            'files': [r['path'] for r in results if r.get('success')],
            'errors': [r['error'] for r in failed],
        }


def hop_phase(reserved: int, peak_demand: int) -> str:
    """Label of a hop: fully reserved, bought entirely on demand, or both."""
    if reserved == 0:
        return "on-demand"
    if reserved >= peak_demand:
        return "reserved"
    return "mixed"


class PlanReportWriter(BaseReportWriter):
    """Writer for a single planning run."""

    ROUTE_COLUMNS = ['request', 'provider', 'source', 'destination', 'route', 'hops', 'length_km']
    LINK_COLUMNS = ['request', 'hop', 'link', 'resource', 'reserved', 'peak_demand',
                    'expected_used', 'expected_on_demand', 'phase']
    SCENARIO_COLUMNS = ['scenario', 'probability', 'first_stage_cost', 'second_stage_cost', 'total_cost']

    def write_plan(self, instance: PlanningInstance, result: SolveResult,
                   feasibility: Optional[Dict[str, Any]] = None,
                   peak_demand: Optional[Dict[tuple, int]] = None) -> Dict[str, Any]:
        """
        Write plan.json, routes.csv, links.csv and scenarios.csv.

        Args:
            instance: The planned instance
            result: Solver result with optional per-scenario recourse
            feasibility: Audit report to embed in plan.json
            peak_demand: (request, resource) -> largest wavelength demand

        Returns:
            Combined writing result
        """
        evaluation = result.evaluation
        document = {
            'mode': result.mode,
            'exact': result.exact,
            'flags': list(result.flags),
            'first_stage_cost': evaluation.first_stage_cost,
            'expected_second_stage_cost': evaluation.expected_second_stage_cost,
            'total_cost': evaluation.total,
            'resources': list(instance.resources),
            'plan': result.plan.to_document(),
            'feasibility': feasibility or {},
        }

        routes = []
        for rid in instance.request_ids:
            request = instance.request(rid)
            route = result.plan.routes[rid]
            routes.append({
                'request': rid,
                'provider': request.provider or "",
                'source': request.source,
                'destination': request.destination,
                'route': "-".join(route),
                'hops': len(route) - 1,
                'length_km': instance.topology.path_length(route),
            })

        expected: Dict[tuple, List[float]] = {}
        for row, recourse in zip(evaluation.breakdown, result.recourse):
            for (link, rid), usage in recourse.usage.items():
                for resource in instance.resources:
                    entry = expected.setdefault((link, rid, resource), [0.0, 0.0])
                    entry[0] += row.probability * usage.used(resource)
                    entry[1] += row.probability * usage.on_demand(resource)

        links = []
        for rid in instance.request_ids:
            route = result.plan.routes[rid]
            for hop, link in enumerate(instance.topology.path_links(route), start=1):
                for resource in instance.resources:
                    reserved = result.plan.reserved(resource, link, rid)
                    peak = (peak_demand or {}).get((rid, resource), reserved)
                    used, on_demand = expected.get((link, rid, resource), (None, None))
                    links.append({
                        'request': rid,
                        'hop': hop,
                        'link': link_label(link),
                        'resource': resource,
                        'reserved': reserved,
                        'peak_demand': peak,
                        'expected_used': used,
                        'expected_on_demand': on_demand,
                        'phase': hop_phase(reserved, peak),
                    })

        scenarios = [{
            'scenario': row.index,
            'probability': row.probability,
            'first_stage_cost': row.first_stage_cost,
            'second_stage_cost': row.second_stage_cost,
            'total_cost': row.first_stage_cost + row.second_stage_cost,
        } for row in evaluation.breakdown]

        return self.combine([
            self.write_json("plan.json", document),
            self.write_csv("routes.csv", routes, self.ROUTE_COLUMNS),
            self.write_csv("links.csv", links, self.LINK_COLUMNS),
            self.write_csv("scenarios.csv", scenarios, self.SCENARIO_COLUMNS),
        ])


class SweepReportWriter(BaseReportWriter):

    COLUMNS = ['axis', 'value', 'first_stage_cost', 'second_stage_cost', 'total_cost']

    def write_sweep(self, rows: Sequence[Dict[str, Any]], baseline: bool = False) -> Dict[str, Any]:
        columns = self.COLUMNS + (['baseline_cost'] if baseline else [])
        return self.combine([self.write_csv("sweep.csv", rows, columns)])


class BoundsReportWriter(BaseReportWriter):

    COLUMNS = ['requests', 'ws', 'sp', 'eev', 'eev_gap_pct', 'ws_gap_pct', 'ws_relaxed']

    def write_bounds(self, rows: Sequence[Dict[str, Any]], baseline: bool = False) -> Dict[str, Any]:
        columns = self.COLUMNS + (['baseline'] if baseline else [])
        return self.combine([self.write_csv("bounds.csv", rows, columns)])


class OracleReportWriter(BaseReportWriter):

    COLUMNS = ['instance', 'solver_total', 'oracle_total', 'relative_gap', 'match']

    def write_oracle(self, rows: Sequence[Dict[str, Any]]) -> Dict[str, Any]:
        return self.combine([self.write_csv("oracle.csv", rows, self.COLUMNS)])


class CoalitionReportWriter(BaseReportWriter):
    """Writer for the coalition analysis: payoff matrix, stability, stationary mass and fee grid."""

    STABILITY_COLUMNS = ['structure', 'blocks', 'equilibrium', 'deviations', 'stationary_probability']
    STATIONARY_COLUMNS = ['state', 'flags', 'structure', 'consistent', 'probability', 'empirical_frequency']
    FEE_COLUMNS = ['qkd_share_price', 'km_share_price', 'stable_structure', 'stable_count']

    def write_coalition(self, providers: Sequence[str], payoffs: Sequence[Dict[str, Any]],
                        stability: Sequence[Dict[str, Any]], stationary: Sequence[Dict[str, Any]],
                        fee_rows: Sequence[Dict[str, Any]],
                        cost_shares: Optional[Sequence[Dict[str, Any]]] = None) -> Dict[str, Any]:
        payoff_columns = ['structure', 'blocks'] + [f"provider_{p}" for p in providers] + ['total']
        results = [
            self.write_csv("payoffs.csv", payoffs, payoff_columns),
            self.write_csv("stability.csv", stability, self.STABILITY_COLUMNS),
            self.write_csv("stationary.csv", stationary, self.STATIONARY_COLUMNS),
            self.write_csv("fee_sweep.csv", fee_rows, self.FEE_COLUMNS),
        ]
        if cost_shares is not None:
            results.append(self.write_csv(
                "cost_shares.csv", cost_shares,
                ['structure', 'provider', 'block', 'shapley', 'sharing_qkd', 'sharing_km', 'cooperation', 'total']))
        return self.combine(results)
