# experiments/experiment_runner.py
"""
Experiment orchestration: one method per CLI subcommand.

Every run returns (result_dict, exit_code) the way a request handler
returns (response, status): 0 on success, 2 for configuration and
validation problems, 3 for infeasible instances, resource limits and
solver failures.
"""

import logging
import math
from typing import Any, Callable, Dict, List, Optional, Tuple

from coalitions.dynamics import (
    CoalitionDynamics, DynamicsConfig, StrategyProfile, fee_sweep, stationary_distribution, structure_from_profile,
)
from coalitions.economics import (
    CoalitionEconomics, ShapleyEconomics, TabulatedEconomics, is_subadditive, planner_cache,
)
from experiments.config import ExperimentConfig
from planning.cost_model import scale_channel_prices
from planning.exceptions import (
    CombinatorialLimitError, ConfigurationError, ErrorCategory, PlanningError,
)
from planning.feasibility import check_feasibility
from planning.instance import Plan, PlanningInstance
from planning.oracle import brute_force_oracle
from planning.recourse import CostContext
from planning.sp_planner import (
    StochasticPlanner, evaluate_plan, fixed_reservation_plan, greedy_on_demand_baseline, planned_requests,
    sampled_recourse, scaled_demand_instance, solve_eev, solve_ws,
)
from reports.writers import (
    BoundsReportWriter, CoalitionReportWriter, OracleReportWriter, PlanReportWriter, SweepReportWriter,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3

SWEEP_AXES = ("secret_key_rate", "reserved_qkd", "reserved_km", "link_cost_multiplier")

MAX_COALITION_PROVIDERS = 5

AUDIT_SAMPLES = 200

ORACLE_REL_TOL = 1e-9


def exit_code_for(error: Exception) -> int:
    """Exit code of a failed run."""
    if isinstance(error, ConfigurationError):
        return EXIT_CONFIG
    if isinstance(error, PlanningError):
        if error.category in (ErrorCategory.VALIDATION, ErrorCategory.CONFIGURATION):
            return EXIT_CONFIG
        return EXIT_SOLVER
    return EXIT_SOLVER


class ExperimentRunner:
    """
    Runs the experiment families of one configuration and writes their reports.
    """

    def __init__(self, config: ExperimentConfig, out_dir: str, exhaustive: bool = False, baseline: bool = False):
        self.config = config
        self.out_dir = out_dir
        self.exhaustive = exhaustive
        self.baseline = baseline

    @property
    def mode(self) -> Optional[str]:
        return "exhaustive" if self.exhaustive else None

    def _guarded(self, name: str, run: Callable[[], Tuple[Dict[str, Any], int]]) -> Tuple[Dict[str, Any], int]:
        try:
            result, code = run()
            if code == EXIT_OK:
                logger.info(f"✅ {name} finished")
            return result, code
        except PlanningError as e:
            logger.error(f"{name} failed: {e}")
            return {'success': False, 'error': e.to_dict()}, exit_code_for(e)
        except Exception as e:
            logger.error(f"{name} failed with an unexpected error: {str(e)}")
            return {'success': False, 'error': {'error_type': type(e).__name__, 'message': str(e)}}, EXIT_SOLVER

    @staticmethod
    def _written(write_result: Dict[str, Any], result: Dict[str, Any],
                 code: int = EXIT_OK) -> Tuple[Dict[str, Any], int]:
        result['files'] = write_result['files']
        if not write_result['success']:
            result.update({'success': False, 'error': {'message': "; ".join(write_result['errors'])}})
            return result, EXIT_CONFIG
        return result, code

    # Plan

    def run_plan(self) -> Tuple[Dict[str, Any], int]:
        return self._guarded("plan", self._plan)

    def _plan(self) -> Tuple[Dict[str, Any], int]:
        instance = self.config.instance()
        result = StochasticPlanner(instance, self.config.settings, self.config.k).solve(mode=self.mode)

        if result.recourse or not instance.requests:
            report = check_feasibility(instance, result.plan, result.recourse)
        else:
            sampled = sampled_recourse(instance, result.plan, AUDIT_SAMPLES, self.config.rng("audit"))
            report = check_feasibility(instance, result.plan, sampled)

        context = CostContext(instance)
        peaks = {(rid, resource): context.max_demand(rid, resource)
                 for rid in instance.request_ids for resource in instance.resources}
        written = PlanReportWriter(self.out_dir).write_plan(instance, result, report.to_dict(), peaks)

        summary = {
            'success': report.passed,
            'total_cost': result.total,
            'exact': result.exact,
            'mode': result.mode,
            'violations': report.violations,
        }
        return self._written(written, summary, EXIT_OK if report.passed else EXIT_SOLVER)

    # Sweep

    def run_sweep(self) -> Tuple[Dict[str, Any], int]:
        return self._guarded("sweep", self._sweep)

    def _row(self, axis: str, value: Any, instance: PlanningInstance, first: float, second: float) -> Dict[str, Any]:
        row = {'axis': axis, 'value': value, 'first_stage_cost': first, 'second_stage_cost': second,
               'total_cost': first + second}
        if self.baseline:
            row['baseline_cost'] = greedy_on_demand_baseline(instance, self.config.k, self.config.settings).total
        return row

    def _sweep(self) -> Tuple[Dict[str, Any], int]:
        axis = self.config.experiment.get("axis")
        if axis not in SWEEP_AXES:
            raise ConfigurationError(f"'experiment.axis' must be one of {list(SWEEP_AXES)}",
                                     config_key="experiment.axis", path=self.config.path)
        values = self.config.experiment_values("values")
        instance = self.config.instance()
        settings, k = self.config.settings, self.config.k

        rows = []
        if axis in ("reserved_qkd", "reserved_km"):
            if any(not isinstance(v, int) or isinstance(v, bool) or v < 0 for v in values):
                raise ConfigurationError("Reservation sweep values must be nonnegative integers",
                                         config_key="experiment.values", path=self.config.path)
            base = StochasticPlanner(instance, settings, k).solve(mode=self.mode, with_breakdown=False).plan
            for value in values:
                fixed = fixed_reservation_plan(instance, base.routes, **{axis.split("_")[1]: value})
                plan = Plan(routes=base.routes,
                            qkd_reserved=fixed.qkd_reserved if axis == "reserved_qkd" else base.qkd_reserved,
                            km_reserved=fixed.km_reserved if axis == "reserved_km" else base.km_reserved)
                evaluation = evaluate_plan(instance, plan, settings)
                rows.append(self._row(axis, value, instance, evaluation.first_stage_cost,
                                      evaluation.expected_second_stage_cost))
        else:
            for value in values:
                if axis == "secret_key_rate":
                    point = scaled_demand_instance(instance, float(value))
                else:
                    point = instance.with_prices(scale_channel_prices(instance.prices, float(value)))
                result = StochasticPlanner(point, settings, k).solve(mode=self.mode, with_breakdown=False)
                rows.append(self._row(axis, value, point, result.evaluation.first_stage_cost,
                                      result.evaluation.expected_second_stage_cost))

        written = SweepReportWriter(self.out_dir).write_sweep(rows, self.baseline)
        return self._written(written, {'success': True, 'axis': axis, 'points': len(rows)})

    # Bounds

    def run_bounds(self) -> Tuple[Dict[str, Any], int]:
        return self._guarded("bounds", self._bounds)

    def _bounds(self) -> Tuple[Dict[str, Any], int]:
        instance = self.config.instance()
        counts = self.config.experiment_values("request_counts", required=False) or [len(instance.requests)]
        settings, k = self.config.settings, self.config.k

        rows = []
        for count in counts:
            sub = planned_requests(instance, int(count))
            ws = solve_ws(sub, k, settings)
            sp = StochasticPlanner(sub, settings, k).solve(mode=self.mode, with_breakdown=False).total
            eev = solve_eev(sub, k, settings).total
            row = {
                'requests': len(sub.requests),
                'ws': ws.value,
                'sp': sp,
                'eev': eev,
                'eev_gap_pct': 100.0 * (eev - sp) / sp if sp > 0 else 0.0,
                'ws_gap_pct': 100.0 * (sp - ws.value) / sp if sp > 0 else 0.0,
                'ws_relaxed': ws.relaxed,
            }
            if self.baseline:
                row['baseline'] = greedy_on_demand_baseline(sub, k, settings).total
            logger.info(f"Bounds for {row['requests']} requests: WS {ws.value:.4f} SP {sp:.4f} EEV {eev:.4f}")
            rows.append(row)

        written = BoundsReportWriter(self.out_dir).write_bounds(rows, self.baseline)
        return self._written(written, {'success': True, 'rows': len(rows)})

    # Coalition

    def run_coalition(self) -> Tuple[Dict[str, Any], int]:
        return self._guarded("coalition", self._coalition)

    def economics(self) -> CoalitionEconomics:
        """Injected payoff rows when configured, otherwise Shapley shares of planned coalition costs."""
        section = self.config.coalition
        providers = self.config.providers
        if len(providers) > MAX_COALITION_PROVIDERS:
            raise CombinatorialLimitError(f"Coalition analysis supports at most {MAX_COALITION_PROVIDERS} "
                                          f"providers, got {len(providers)}", size=len(providers),
                                          limit=MAX_COALITION_PROVIDERS, operation="run_coalition")
        if "payoffs" in section:
            document = section["payoffs"]
            if isinstance(document, str):
                document = self.config.read_file(document, "coalition.payoffs")
            pool = section.get("pool", "qkd")
            rows = document.get("pools", {}).get(pool) if isinstance(document, dict) else None
            if not isinstance(rows, dict):
                raise ConfigurationError(f"Payoff document has no rows for pool '{pool}'",
                                         config_key="coalition.payoffs", path=self.config.path)
            ids = [str(p) for p in document.get("providers", [p.id for p in providers])]
            try:
                return TabulatedEconomics.from_rows(ids, rows, providers)
            except PlanningError as e:
                raise ConfigurationError(f"Invalid payoff rows: {e.message}", config_key="coalition.payoffs",
                                         path=self.config.path, cause=e)
        if not providers:
            raise ConfigurationError("Coalition analysis needs providers or injected payoffs",
                                     config_key="providers", path=self.config.path)
        instance = self.config.instance()
        cache = planner_cache(instance, providers, self.config.settings)
        return ShapleyEconomics(cache, providers, self.config.settings.shapley_max_block)

    def _dynamics_config(self) -> DynamicsConfig:
        section = self.config.coalition.get("dynamics", {})
        try:
            return DynamicsConfig(
                update_probability=float(section.get("update_probability", 0.5)),
                irrationality=float(section.get("irrationality", 0.1)),
                max_iterations=int(section.get("max_iterations", 10000)),
            )
        except PlanningError as e:
            raise ConfigurationError(f"Invalid dynamics settings: {e.message}", config_key="coalition.dynamics",
                                     path=self.config.path, cause=e)

    def _coalition(self) -> Tuple[Dict[str, Any], int]:
        economics = self.economics()
        scope = self.config.coalition.get("scope", "consistent")
        dynamics = CoalitionDynamics(economics, scope)
        dynamics_config = self._dynamics_config()
        providers = list(economics.provider_ids)

        payoffs, cost_shares = [], None
        for sid, structure in economics.structures:
            costs = economics.provider_costs(structure)
            row = {'structure': sid, 'blocks': structure.label(), 'total': math.fsum(costs.values())}
            row.update({f"provider_{pid}": costs[pid] for pid in providers})
            payoffs.append(row)
        if isinstance(economics, ShapleyEconomics):
            cost_shares = [dict(share.to_dict(), structure=sid)
                           for sid, structure in economics.structures
                           for share in economics.cost_shares(structure).values()]
            grand = tuple(providers)
            if not is_subadditive(economics.cache, grand):
                logger.warning("Characteristic costs are not subadditive; individual fairness is reported only")

        chain = CoalitionDynamics(economics, "closure")
        matrix = chain.transition_matrix(dynamics_config, self.config.settings.state_space_cap)
        stationary = stationary_distribution(matrix, self.config.settings.stationary_max_iterations)
        probabilities = [0.0] * matrix.shape[0]
        for recurrent in stationary.classes:
            for state, mass in zip(recurrent.states, recurrent.distribution):
                probabilities[state] = float(mass)
        simulated = chain.simulate(dynamics_config, rng=self.config.rng("dynamics"))

        stationary_rows = []
        for state in range(matrix.shape[0]):
            profile = StrategyProfile(tuple(providers), state)
            structure, consistent = structure_from_profile(profile)
            stationary_rows.append({
                'state': state,
                'flags': profile.describe(),
                'structure': economics.structure_id(structure),
                'consistent': consistent,
                'probability': probabilities[state],
                'empirical_frequency': float(simulated.frequencies[state]),
            })

        stability_rows, stable = [], []
        for sid, structure in economics.structures:
            profile = StrategyProfile.from_structure(providers, structure)
            ok, deviations = dynamics.is_equilibrium(profile)
            if ok:
                stable.append(sid)
            stability_rows.append({
                'structure': sid,
                'blocks': structure.label(),
                'equilibrium': ok,
                'deviations': len(deviations),
                'stationary_probability': probabilities[profile.bits],
            })

        fees = self.config.coalition.get("fees")
        fee_rows: List[Dict[str, Any]] = []
        if fees:
            fee_rows = fee_sweep(economics, fees.get("qkd_prices", [0.0]), fees.get("km_prices", [0.0]),
                                 fees.get("cooperation_fee"), scope)

        written = CoalitionReportWriter(self.out_dir).write_coalition(
            providers, payoffs, stability_rows, stationary_rows, fee_rows, cost_shares)
        result = {
            'success': True,
            'stable_structures': stable,
            'reducible': stationary.reducible,
        }
        logger.info(f"Stable structures ({scope} deviations): {stable or 'none'}")
        return self._written(written, result)

    # Oracle check

    def run_oracle_check(self) -> Tuple[Dict[str, Any], int]:
        return self._guarded("oracle-check", self._oracle_check)

    def _oracle_check(self) -> Tuple[Dict[str, Any], int]:
        instance = self.config.instance()
        oracle = brute_force_oracle(instance, self.config.k)
        solver = StochasticPlanner(instance, self.config.settings, self.config.k).solve(
            mode="exhaustive", with_breakdown=False)
        gap = abs(solver.total - oracle.total) / max(1.0, abs(oracle.total))
        match = gap <= ORACLE_REL_TOL
        row = {
            'instance': self.config.path,
            'solver_total': solver.total,
            'oracle_total': oracle.total,
            'relative_gap': gap,
            'match': match,
        }
        if not match:
            logger.error(f"Solver total {solver.total:.9f} differs from the oracle's {oracle.total:.9f}")
        written = OracleReportWriter(self.out_dir).write_oracle([row])
        return self._written(written, dict(row, success=match), EXIT_OK if match else EXIT_SOLVER)
