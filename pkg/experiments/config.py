# experiments/config.py
"""
Experiment configuration: one JSON document naming the instance files,
prices, physics, solver knobs, seed and experiment parameters.

File references are resolved relative to the config file. Every loading
problem is reported as a ConfigurationError naming the file and field.
"""

import json
import logging
import os
from typing import Any, Dict, List, Optional, Union

import numpy as np

from coalitions.economics import pool_capacities
from planning.cost_model import PhysicalParams, PriceTable
from planning.exceptions import ConfigurationError, PlanningError
from planning.instance import RESOURCES, PlanningInstance, PoolCapacities
from planning.network_model import ChainRequest, Provider, Topology, load_providers, load_requests, load_topology
from planning.settings import SolverSettings

logger = logging.getLogger(__name__)

SEED_STREAMS = ("dynamics", "audit")

POOL_KINDS = ("grand", "slack", "uniform")


def _read_json(path: str, field: str) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError as e:
        raise ConfigurationError(f"File for '{field}' not found", config_key=field, path=path, cause=e)
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"File for '{field}' is not valid JSON: {e}", config_key=field, path=path,
                                 cause=e)


class ExperimentConfig:
    """
    Parsed experiment configuration.

    Sections: topology, requests, providers, prices, physical, resources,
    pools, solver, k, seed, experiment, coalition.
    """

    def __init__(self, document: Dict[str, Any], base_dir: str = ".", path: Optional[str] = None,
                 seed: Optional[int] = None):
        if not isinstance(document, dict):
            raise ConfigurationError("Experiment config must be a JSON object", path=path)
        self.document = document
        self.base_dir = base_dir
        self.path = path or "<inline>"

        self.topology: Topology = self._load("topology", load_topology)
        self.requests: List[ChainRequest] = self._load(
            "requests", lambda doc: load_requests(doc, self.topology), default={"requests": []})
        self.providers: List[Provider] = self._load("providers", load_providers, default={"providers": []})
        self.prices: PriceTable = self._load_prices()
        self.params: PhysicalParams = self._guard("physical",
                                                  lambda: PhysicalParams.from_document(document.get("physical", {})))
        self.resources = self._load_resources()
        self.settings: SolverSettings = self._guard("solver", lambda: SolverSettings(**document.get("solver", {})))
        self.k: int = int(document.get("k", self.settings.candidate_paths))
        self.seed: int = int(seed if seed is not None else document.get("seed", 0))
        self.experiment: Dict[str, Any] = dict(document.get("experiment", {}))
        self.coalition: Dict[str, Any] = dict(document.get("coalition", {}))
        logger.info(f"Loaded config {self.path}: {len(self.topology.nodes)} nodes, "
                    f"{len(self.requests)} requests, {len(self.providers)} providers")

    @classmethod
    def load(cls, path: str, seed: Optional[int] = None) -> "ExperimentConfig":
        document = _read_json(path, "config")
        return cls(document, os.path.dirname(os.path.abspath(path)), path, seed)

    def resolve(self, reference: str) -> str:
        return reference if os.path.isabs(reference) else os.path.join(self.base_dir, reference)

    def read_file(self, reference: str, field: str) -> Any:
        return _read_json(self.resolve(reference), field)

    def section(self, field: str, default: Any = None) -> Any:
        """A section's document, read from its file when the config holds a path."""
        value = self.document.get(field, default)
        if value is None:
            raise ConfigurationError(f"Config is missing '{field}'", config_key=field, path=self.path)
        if isinstance(value, str):
            return _read_json(self.resolve(value), field)
        return value

    def _guard(self, field: str, build):
        try:
            return build()
        except ConfigurationError:
            raise
        except PlanningError as e:
            raise ConfigurationError(f"Invalid '{field}': {e.message}", config_key=field, path=self.path,
                                     cause=e, context={'original_error': e.to_dict()})
        except (TypeError, ValueError) as e:
            raise ConfigurationError(f"Invalid '{field}': {e}", config_key=field, path=self.path, cause=e)

    def _load(self, field: str, loader, default: Any = None):
        document = self.section(field, default)
        return self._guard(field, lambda: loader(document))

    def _load_prices(self) -> PriceTable:
        value = self.document.get("prices", "reference")
        if value == "reference":
            return PriceTable.reference()
        return self._guard("prices", lambda: PriceTable.from_document(self.section("prices")))

    def _load_resources(self) -> tuple:
        resources = self.document.get("resources", list(RESOURCES))
        if not isinstance(resources, list) or not resources or any(r not in RESOURCES for r in resources):
            raise ConfigurationError(f"'resources' must be a nonempty subset of {list(RESOURCES)}",
                                     config_key="resources", path=self.path)
        return tuple(r for r in RESOURCES if r in resources)

    def pools(self) -> PoolCapacities:
        """Pool of the planning run: the grand coalition's by default when providers are configured."""
        spec = self.document.get("pools", {"kind": "grand" if self.providers else "slack"})
        kind = spec.get("kind", "grand")
        qkd_max, km_max = self.settings.pool_qkd_max, self.settings.pool_km_max
        if kind not in POOL_KINDS:
            raise ConfigurationError(f"Unknown pool kind '{kind}'", config_key="pools.kind", path=self.path)
        if kind == "slack":
            return PoolCapacities.slack(self.topology, qkd_max, km_max)
        if kind == "uniform":
            return self._guard("pools", lambda: PoolCapacities.uniform(
                self.topology, int(spec["qkd"]), int(spec["km"]), qkd_max, km_max))
        if not self.providers:
            raise ConfigurationError("A grand-coalition pool needs providers", config_key="pools",
                                     path=self.path)
        return self._guard("pools", lambda: pool_capacities(
            [p.id for p in self.providers], self.topology, self.providers, qkd_max, km_max))

    def instance(self) -> PlanningInstance:
        return self._guard("instance", lambda: PlanningInstance(
            topology=self.topology,
            requests=tuple(self.requests),
            pools=self.pools(),
            prices=self.prices,
            params=self.params,
            resources=self.resources,
        ))

    def rng(self, stream: str) -> np.random.Generator:
        """Generator for one named sub-stream of the config seed."""
        if stream not in SEED_STREAMS:
            raise ConfigurationError(f"Unknown random stream '{stream}'", config_key="seed", path=self.path)
        children = np.random.SeedSequence(self.seed).spawn(len(SEED_STREAMS))
        return np.random.default_rng(children[SEED_STREAMS.index(stream)])

    def experiment_values(self, key: str, required: bool = True) -> Union[List[Any], None]:
        values = self.experiment.get(key)
        if values is None and not required:
            return None
        if not isinstance(values, list) or not values:
            raise ConfigurationError(f"'experiment.{key}' must be a nonempty list", config_key=f"experiment.{key}",
                                     path=self.path)
        return values
