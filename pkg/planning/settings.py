# planning/settings.py
"""Solver tunables, read from the environment with per-run overrides."""

import logging
import os
from typing import Any, Dict

from planning.exceptions import ConfigurationError

logger = logging.getLogger(__name__)


class SolverSettings:
    """
    Size guards and search budgets shared by the planner and the coalition layer.

    Every value falls back to an environment variable; keyword overrides
    (usually from an experiment config's "solver" section) win over both.
    """

    _ENV = {
        'candidate_paths': ('QKD_CANDIDATE_PATHS', '8'),
        'scenario_cap': ('QKD_SCENARIO_CAP', '1000000'),
        'route_search_budget': ('QKD_ROUTE_SEARCH_BUDGET', '4096'),
        'link_enumeration_budget': ('QKD_LINK_ENUMERATION_BUDGET', '20000'),
        'ws_scenario_budget': ('QKD_WS_SCENARIO_BUDGET', '10000'),
        'state_space_cap': ('QKD_STATE_SPACE_CAP', '32768'),
        'pool_qkd_max': ('QKD_POOL_QKD_MAX', '1000'),
        'pool_km_max': ('QKD_POOL_KM_MAX', '300'),
        'stationary_max_iterations': ('QKD_STATIONARY_MAX_ITERATIONS', '1000000'),
        'shapley_max_block': ('QKD_SHAPLEY_MAX_BLOCK', '12'),
    }

    def __init__(self, **overrides: Any):
        for name, (env_var, default) in self._ENV.items():
            raw = os.getenv(env_var, default)
            try:
                setattr(self, name, int(raw))
            except ValueError as e:
                raise ConfigurationError(f"Environment variable {env_var} must be an integer, got '{raw}'",
                                         config_key=env_var, cause=e)

        for name, value in overrides.items():
            if name not in self._ENV:
                raise ConfigurationError(f"Unknown solver setting '{name}'", config_key=name)
            try:
                setattr(self, name, int(value))
            except (TypeError, ValueError) as e:
                raise ConfigurationError(f"Solver setting '{name}' must be an integer", config_key=name,
                                         cause=e)

        if self.candidate_paths < 1:
            raise ConfigurationError("candidate_paths must be at least 1", config_key='candidate_paths')

    def to_dict(self) -> Dict[str, int]:
        return {name: getattr(self, name) for name in self._ENV}

    def __repr__(self) -> str:
        return f"SolverSettings({self.to_dict()})"
