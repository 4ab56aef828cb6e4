# planning/demand_scenarios.py
"""
Discrete secret-key-rate distributions and the joint scenario space.

Requests are independent, so a joint scenario's probability is the product
of the per-request probabilities. Enumeration walks request ids in sorted
order with the last request varying fastest.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Iterator, List, Sequence, Tuple

import numpy as np

from planning.exceptions import ParameterError, ScenarioCapExceededError

logger = logging.getLogger(__name__)

Scenario = Dict[str, float]


@dataclass(frozen=True)
class DemandDistribution:
    """Finite distribution over secret-key rates in kbps."""

    support: Tuple[float, ...]
    probabilities: Tuple[float, ...]

    def __post_init__(self):
        if not self.support:
            raise ParameterError("Distribution support is empty", parameter="support",
                                 component="demand_scenarios")
        if len(self.support) != len(self.probabilities):
            raise ParameterError("Support and probabilities differ in length",
                                 parameter="probabilities", component="demand_scenarios",
                                 value=[len(self.support), len(self.probabilities)])
        if any(v < 0 or not math.isfinite(v) for v in self.support):
            raise ParameterError("Support values must be finite and nonnegative",
                                 parameter="support", value=list(self.support),
                                 component="demand_scenarios")
        if any(b <= a for a, b in zip(self.support, self.support[1:])):
            raise ParameterError("Support values must be distinct and ascending",
                                 parameter="support", value=list(self.support),
                                 component="demand_scenarios")
        if any(p < 0 for p in self.probabilities):
            raise ParameterError("Probabilities must be nonnegative", parameter="probabilities",
                                 value=list(self.probabilities), component="demand_scenarios")
        if abs(math.fsum(self.probabilities) - 1.0) > 1e-12:
            raise ParameterError("Probabilities must sum to 1", parameter="probabilities",
                                 value=math.fsum(self.probabilities), component="demand_scenarios")

    @property
    def size(self) -> int:
        return len(self.support)

    @property
    def max_rate(self) -> float:
        return self.support[-1]

    @property
    def is_degenerate(self) -> bool:
        return len(self.support) == 1

    def outcomes(self) -> List[Tuple[float, float]]:
        return list(zip(self.support, self.probabilities))

    def expected(self) -> float:
        return math.fsum(v * p for v, p in zip(self.support, self.probabilities))

    def scaled(self, factor: float) -> "DemandDistribution":
        """Same probabilities on a support multiplied by factor."""
        if factor <= 0:
            raise ParameterError("Scale factor must be positive", parameter="factor", value=factor,
                                 component="demand_scenarios")
        return DemandDistribution(tuple(v * factor for v in self.support), self.probabilities)

    def to_document(self) -> Dict[str, Any]:
        return {"kind": "table", "support": list(self.support), "probs": list(self.probabilities)}


def uniform_distribution(min_rate: float, max_rate: float, step: float) -> DemandDistribution:
    """Equiprobable support {min, min+step, ..., max}."""
    if step <= 0:
        raise ParameterError("Step must be positive", parameter="step", value=step,
                             component="demand_scenarios", operation="uniform_distribution")
    if min_rate < 0 or max_rate < min_rate:
        raise ParameterError(f"Need 0 <= min <= max, got ({min_rate}, {max_rate})",
                             parameter="min_rate", value=[min_rate, max_rate],
                             component="demand_scenarios", operation="uniform_distribution")
    count = int(math.floor((max_rate - min_rate) / step + 1e-9)) + 1
    support = tuple(round(min_rate + i * step, 12) for i in range(count))
    return DemandDistribution(support, tuple(1.0 / count for _ in support))


def table_distribution(support: Sequence[float], probs: Sequence[float]) -> DemandDistribution:
    pairs = sorted(zip((float(v) for v in support), (float(p) for p in probs)))
    return DemandDistribution(tuple(v for v, _ in pairs), tuple(p for _, p in pairs))


def degenerate_distribution(rate: float) -> DemandDistribution:
    return DemandDistribution((float(rate),), (1.0,))


def expected_demand(dist: DemandDistribution) -> float:
    return dist.expected()


def distribution_from_document(document: Any) -> DemandDistribution:
    """
    Build a distribution from its JSON form.

    Accepted kinds: uniform {min, max, step}, table {support, probs} and
    fixed {rate}.
    """
    if not isinstance(document, dict) or "kind" not in document:
        raise ParameterError("Distribution document needs a 'kind'", parameter="kind",
                             value=document, component="demand_scenarios",
                             operation="distribution_from_document")
    kind = document["kind"]
    try:
        if kind == "uniform":
            return uniform_distribution(float(document["min"]), float(document["max"]),
                                        float(document.get("step", 1)))
        if kind == "table":
            return table_distribution(document["support"], document["probs"])
        if kind == "fixed":
            return degenerate_distribution(float(document["rate"]))
    except KeyError as e:
        raise ParameterError(f"Distribution of kind '{kind}' is missing {e}", parameter=str(e),
                             component="demand_scenarios", operation="distribution_from_document",
                             cause=e)
    raise ParameterError(f"Unknown distribution kind '{kind}'", parameter="kind", value=kind,
                         component="demand_scenarios", operation="distribution_from_document")


class JointScenarioSpace:
    """Product space of independent per-request distributions."""

    def __init__(self, per_request: Dict[str, DemandDistribution]):
        self.per_request = dict(per_request)
        self.request_ids: List[str] = sorted(self.per_request)

    @property
    def cardinality(self) -> int:
        return math.prod(self.per_request[rid].size for rid in self.request_ids)

    def marginal(self, request_id: str) -> DemandDistribution:
        return self.per_request[request_id]

    def __len__(self) -> int:
        return self.cardinality


def enumerate_joint(space: JointScenarioSpace, cap: int = 10 ** 6) -> Iterator[Tuple[Scenario, float]]:
    """
    Stream every joint scenario with its probability.

    Raises:
        ScenarioCapExceededError: before yielding anything, when the space is larger than cap
    """
    size = space.cardinality
    if size > cap:
        raise ScenarioCapExceededError(
            f"Joint scenario space has {size} scenarios, above the cap of {cap}; "
            f"truncate per-request supports or sample scenarios instead",
            size=size, limit=cap)
    return _joint_stream(space)


def _joint_stream(space: JointScenarioSpace) -> Iterator[Tuple[Scenario, float]]:
    ids = space.request_ids
    outcome_lists = [space.per_request[rid].outcomes() for rid in ids]
    for combo in itertools.product(*outcome_lists):
        scenario = {rid: rate for rid, (rate, _) in zip(ids, combo)}
        yield scenario, math.prod(p for _, p in combo)


def sample_joint(space: JointScenarioSpace, n: int, rng: np.random.Generator) -> List[Scenario]:
    """Draw n joint scenarios from the product distribution."""
    draws = {
        rid: rng.choice(len(space.per_request[rid].support), size=n,
                        p=np.asarray(space.per_request[rid].probabilities))
        for rid in space.request_ids
    }
    return [
        {rid: space.per_request[rid].support[int(draws[rid][i])] for rid in space.request_ids}
        for i in range(n)
    ]
