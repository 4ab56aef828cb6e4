# coalitions/economics.py
"""
Coalition economics: pooled capacities, the characteristic cost of each
coalition, Shapley cost shares and the total cost each provider bears
under a coalition structure.
"""

import logging
import math
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from fractions import Fraction
from itertools import combinations
from typing import Callable, Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

from planning.exceptions import CombinatorialLimitError, ParameterError, UnknownProviderError
from planning.instance import PlanningInstance, PoolCapacities
from planning.network_model import Provider, Topology, node_sort_key
from planning.settings import SolverSettings
from planning.sp_planner import StochasticPlanner

logger = logging.getLogger(__name__)

Coalition = Tuple[str, ...]

_REL_TOL = 1e-12


def canonical(members: Iterable[str]) -> Coalition:
    """Sorted, duplicate-free provider tuple used as the coalition key everywhere."""
    return tuple(sorted(set(members), key=node_sort_key))


@dataclass(frozen=True)
class CoalitionStructure:
    """A partition of the provider set into disjoint coalitions."""

    blocks: Tuple[Coalition, ...]

    @classmethod
    def of(cls, blocks: Iterable[Iterable[str]], providers: Optional[Sequence[str]] = None) -> "CoalitionStructure":
        """
        Canonical structure from any iterable of blocks.

        Raises:
            ParameterError: empty or overlapping blocks, or blocks not covering providers
        """
        normalized = [canonical(block) for block in blocks]
        if any(not block for block in normalized):
            raise ParameterError("Coalition blocks must be nonempty", parameter="blocks",
                                 value=[list(b) for b in normalized], component="coalition_economics")
        members = [p for block in normalized for p in block]
        if len(members) != len(set(members)):
            raise ParameterError("Coalition blocks must be disjoint", parameter="blocks",
                                 value=[list(b) for b in normalized], component="coalition_economics")
        if providers is not None and set(members) != set(providers):
            raise ParameterError("Coalition blocks must cover every provider", parameter="blocks",
                                 value=[list(b) for b in normalized], component="coalition_economics")
        ordered = sorted(normalized, key=lambda b: [node_sort_key(p) for p in b])
        return cls(tuple(ordered))

    @property
    def providers(self) -> Coalition:
        return canonical(p for block in self.blocks for p in block)

    def block_of(self, provider_id: str) -> Coalition:
        for block in self.blocks:
            if provider_id in block:
                return block
        raise UnknownProviderError(f"Provider {provider_id} is not in the structure", provider_id=provider_id)

    def label(self) -> str:
        return " ".join("{" + ",".join(block) + "}" for block in self.blocks)


@dataclass(frozen=True)
class CostShare:
    """What one provider pays under a structure."""

    provider: str
    block: Coalition
    shapley: float
    sharing_qkd: float = 0.0
    sharing_km: float = 0.0
    cooperation: float = 0.0

    @property
    def total(self) -> float:
        return self.shapley + self.sharing_qkd + self.sharing_km + self.cooperation

    def to_dict(self) -> Dict[str, object]:
        return {
            'provider': self.provider,
            'block': ",".join(self.block),
            'shapley': self.shapley,
            'sharing_qkd': self.sharing_qkd,
            'sharing_km': self.sharing_km,
            'cooperation': self.cooperation,
            'total': self.total,
        }


def _provider_map(providers: Sequence[Provider]) -> Dict[str, Provider]:
    return {p.id: p for p in providers}


def pool_capacities(coalition: Iterable[str], topology: Topology, providers: Sequence[Provider],
                    qkd_max: int = 1000, km_max: int = 300) -> PoolCapacities:
    """
    Per-link pool of a coalition: members' contributions summed, clamped at the pool maxima.

    Raises:
        UnknownProviderError: a member is not a known provider
    """
    by_id = _provider_map(providers)
    members = canonical(coalition)
    for pid in members:
        if pid not in by_id:
            raise UnknownProviderError(f"Unknown provider '{pid}' in coalition {list(members)}",
                                       provider_id=pid, operation="pool_capacities")

    qkd, km = {}, {}
    for link in topology.links:
        qkd[link] = min(sum(by_id[pid].contribution(link, "qkd") for pid in members), qkd_max)
        km[link] = min(sum(by_id[pid].contribution(link, "km") for pid in members), km_max)
    return PoolCapacities(qkd_per_link=qkd, km_per_link=km, qkd_cap=qkd_max, km_cap=km_max)


class CharacteristicCache:
    """
    Coalition → v(coalition), keyed canonically.

    Values are inserted once; a second insert for the same coalition keeps
    the first. When built with a compute function, missing coalitions are
    computed on first access.
    """

    def __init__(self, compute: Optional[Callable[[Coalition], float]] = None,
                 values: Optional[Mapping[Iterable[str], float]] = None):
        self._compute = compute
        self._values: Dict[Coalition, float] = {(): 0.0}
        self._lock = threading.Lock()
        for coalition, value in (values or {}).items():
            self.put(coalition, value)

    def __contains__(self, coalition: Iterable[str]) -> bool:
        return canonical(coalition) in self._values

    def __len__(self) -> int:
        return len(self._values) - 1

    def put(self, coalition: Iterable[str], value: float) -> float:
        key = canonical(coalition)
        with self._lock:
            return self._values.setdefault(key, float(value))

    def value(self, coalition: Iterable[str]) -> float:
        key = canonical(coalition)
        if key in self._values:
            return self._values[key]
        if self._compute is None:
            raise KeyError(f"No characteristic value cached for {list(key)}")
        return self.put(key, self._compute(key))

    def items(self) -> List[Tuple[Coalition, float]]:
        return sorted(((k, v) for k, v in self._values.items() if k),
                      key=lambda item: (len(item[0]), [node_sort_key(p) for p in item[0]]))


def coalition_instance(coalition: Iterable[str], instance: PlanningInstance, providers: Sequence[Provider],
                       settings: Optional[SolverSettings] = None) -> PlanningInstance:
    """The members' own requests planned over the members' pooled wavelengths."""
    settings = settings or SolverSettings()
    members = set(canonical(coalition))
    pools = pool_capacities(members, instance.topology, providers, settings.pool_qkd_max, settings.pool_km_max)
    requests = [r for r in instance.requests if r.provider in members]
    return instance.with_requests(requests).with_pools(pools)


def characteristic_cost(coalition: Iterable[str], instance: PlanningInstance, providers: Sequence[Provider],
                        settings: Optional[SolverSettings] = None,
                        cache: Optional[CharacteristicCache] = None) -> float:
    """v(coalition): minimum expected cost of serving the members' requests from their pool."""
    key = canonical(coalition)
    if not key:
        return 0.0
    if cache is not None and key in cache:
        return cache.value(key)

    settings = settings or SolverSettings()
    sub = coalition_instance(key, instance, providers, settings)
    result = StochasticPlanner(sub, settings).solve(with_breakdown=False)
    logger.info(f"v({','.join(key)}) = {result.total:.4f} over {len(sub.requests)} requests")
    if cache is not None:
        return cache.put(key, result.total)
    return result.total


def planner_cache(instance: PlanningInstance, providers: Sequence[Provider],
                  settings: Optional[SolverSettings] = None) -> CharacteristicCache:
    """Cache that solves each coalition's plan on first use."""
    unattributed = [r.id for r in instance.requests if r.provider not in {p.id for p in providers}]
    if unattributed:
        logger.warning(f"Requests {unattributed} belong to no known provider and are left out of "
                       f"every coalition")
    settings = settings or SolverSettings()
    return CharacteristicCache(compute=lambda c: characteristic_cost(c, instance, providers, settings))


def _check_block_size(block: Coalition, max_block: int) -> None:
    if len(block) > max_block:
        raise CombinatorialLimitError(f"Shapley shares over {len(block)} providers exceed the limit of "
                                      f"{max_block}", size=len(block), limit=max_block,
                                      operation="shapley_shares")


def shapley_shares_exact(block: Iterable[str], cache: CharacteristicCache,
                         max_block: int = 12) -> Dict[str, Fraction]:
    """
    Shapley cost shares with exact rational arithmetic.

    Each characteristic value is converted to its exact binary fraction, so
    the shares of a block sum to v(block) with no rounding.

    Raises:
        CombinatorialLimitError: block larger than max_block
    """
    members = canonical(block)
    _check_block_size(members, max_block)
    n = len(members)
    if n == 0:
        return {}

    weights = [Fraction(math.factorial(size) * math.factorial(n - size - 1), math.factorial(n))
               for size in range(n)]
    shares: Dict[str, Fraction] = {}
    for player in members:
        others = [p for p in members if p != player]
        total = Fraction(0)
        for size in range(n):
            for subset in combinations(others, size):
                marginal = Fraction(cache.value(subset + (player,))) - Fraction(cache.value(subset))
                total += weights[size] * marginal
        shares[player] = total
    return shares


def shapley_shares(block: Iterable[str], cache: CharacteristicCache, max_block: int = 12) -> Dict[str, float]:
    return {p: float(v) for p, v in shapley_shares_exact(block, cache, max_block).items()}


def provider_total_cost(structure: CoalitionStructure, cache: CharacteristicCache,
                        providers: Sequence[Provider], max_block: int = 12) -> Dict[str, CostShare]:
    """
    Cost share of every provider: Shapley share plus sharing and cooperation fees.

    Providers alone in their block pay their own characteristic cost and no fees.
    """
    by_id = _provider_map(providers)
    shares: Dict[str, CostShare] = {}
    for block in structure.blocks:
        if len(block) == 1:
            pid = block[0]
            shares[pid] = CostShare(pid, block, cache.value(block))
            continue
        for pid, value in shapley_shares(block, cache, max_block).items():
            if pid not in by_id:
                raise UnknownProviderError(f"Unknown provider '{pid}'", provider_id=pid,
                                           operation="provider_total_cost")
            provider = by_id[pid]
            shares[pid] = CostShare(
                provider=pid,
                block=block,
                shapley=value,
                sharing_qkd=provider.qkd_contribution_per_link * provider.qkd_share_price,
                sharing_km=provider.km_contribution_per_link * provider.km_share_price,
                cooperation=provider.cooperation_fee,
            )
    return shares


def is_subadditive(cache: CharacteristicCache, block: Iterable[str]) -> bool:
    """True when v(S ∪ T) ≤ v(S) + v(T) for every pair of disjoint nonempty S, T within block."""
    members = canonical(block)
    subsets = [c for size in range(1, len(members) + 1) for c in combinations(members, size)]
    for s in subsets:
        for t in subsets:
            if set(s) & set(t) or s > t:
                continue
            union = canonical(s + t)
            bound = cache.value(s) + cache.value(t)
            if cache.value(union) > bound + _REL_TOL * max(1.0, abs(bound)):
                return False
    return True


def with_fees(providers: Sequence[Provider], qkd_price: Optional[float] = None,
              km_price: Optional[float] = None, cooperation_fee: Optional[float] = None) -> List[Provider]:
    """Copies of providers with the given sharing prices and cooperation fee overriding their own."""
    updates = {}
    if qkd_price is not None:
        updates['qkd_share_price'] = float(qkd_price)
    if km_price is not None:
        updates['km_share_price'] = float(km_price)
    if cooperation_fee is not None:
        updates['cooperation_fee'] = float(cooperation_fee)
    return [replace(p, **updates) for p in providers]


def _set_partitions(items: Sequence[str]) -> Iterator[List[List[str]]]:
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for partition in _set_partitions(rest):
        yield [[first]] + partition
        for i in range(len(partition)):
            yield partition[:i] + [[first] + partition[i]] + partition[i + 1:]


def _structure_order(structure: CoalitionStructure):
    grouped = sorted([node_sort_key(p) for p in block] for block in structure.blocks if len(block) > 1)
    return (-len(structure.blocks), grouped)


def enumerate_structures(providers: Iterable[str]) -> List[Tuple[str, CoalitionStructure]]:
    """
    Every coalition structure over the providers, with ids C1, C2, ...

    Structures with more blocks come first; ties are ordered by their
    sorted non-singleton blocks. For three providers this gives
    {1}{2}{3}, {1,2}{3}, {1,3}{2}, {2,3}{1}, {1,2,3}.
    """
    ids = canonical(providers)
    structures = [CoalitionStructure.of(p, ids) for p in _set_partitions(list(ids))]
    structures.sort(key=_structure_order)
    return [(f"C{i + 1}", s) for i, s in enumerate(structures)]


class CoalitionEconomics(ABC):
    """
    Maps a coalition structure to the cost every provider bears under it.

    Provider records carry the sharing prices and cooperation fee charged
    to members of non-singleton coalitions; without them every fee is zero.
    """

    def __init__(self, provider_ids: Iterable[str], providers: Optional[Sequence[Provider]] = None):
        self.provider_ids = canonical(provider_ids)
        by_id = _provider_map(providers or [])
        self.providers = [by_id.get(pid, Provider(pid)) for pid in self.provider_ids]
        self._structures = enumerate_structures(self.provider_ids)
        self._ids = {structure: sid for sid, structure in self._structures}

    @property
    def structures(self) -> List[Tuple[str, CoalitionStructure]]:
        return list(self._structures)

    def structure_id(self, structure: CoalitionStructure) -> str:
        return self._ids[structure]

    def structure(self, structure_id: str) -> CoalitionStructure:
        for sid, structure in self._structures:
            if sid == structure_id:
                return structure
        raise ParameterError(f"Unknown structure id '{structure_id}'", parameter="structure_id",
                             value=structure_id, component="coalition_economics")

    @abstractmethod
    def provider_costs(self, structure: CoalitionStructure) -> Dict[str, float]:
        """Total cost δ_s of every provider under the structure."""
        pass

    @abstractmethod
    def with_providers(self, providers: Sequence[Provider]) -> "CoalitionEconomics":
        """Same underlying costs, fees taken from the given provider records."""
        pass

    def total_cost(self, structure: CoalitionStructure) -> float:
        return math.fsum(self.provider_costs(structure).values())


class ShapleyEconomics(CoalitionEconomics):
    """Provider costs from Shapley shares of a characteristic cache plus fees."""

    def __init__(self, cache: CharacteristicCache, providers: Sequence[Provider], max_block: int = 12):
        super().__init__((p.id for p in providers), providers)
        self.cache = cache
        self.max_block = max_block
        self._costs: Dict[CoalitionStructure, Dict[str, CostShare]] = {}

    def cost_shares(self, structure: CoalitionStructure) -> Dict[str, CostShare]:
        if structure not in self._costs:
            self._costs[structure] = provider_total_cost(structure, self.cache, self.providers, self.max_block)
        return self._costs[structure]

    def provider_costs(self, structure: CoalitionStructure) -> Dict[str, float]:
        return {pid: share.total for pid, share in self.cost_shares(structure).items()}

    def with_providers(self, providers: Sequence[Provider]) -> "ShapleyEconomics":
        return ShapleyEconomics(self.cache, providers, self.max_block)


class TabulatedEconomics(CoalitionEconomics):
    """
    Provider costs injected per structure, such as a published payoff matrix.

    Fees from the provider records are added on top of the tabulated cost of
    every member of a non-singleton coalition.
    """

    def __init__(self, provider_ids: Iterable[str], table: Mapping[CoalitionStructure, Mapping[str, float]],
                 providers: Optional[Sequence[Provider]] = None):
        super().__init__(provider_ids, providers)
        self.table = {structure: {pid: float(v) for pid, v in costs.items()} for structure, costs in table.items()}
        for structure, costs in self.table.items():
            if set(costs) != set(self.provider_ids):
                raise ParameterError(f"Payoff row for {structure.label()} must list every provider",
                                     parameter="table", value=sorted(costs), component="coalition_economics")

    @classmethod
    def from_rows(cls, provider_ids: Iterable[str], rows: Mapping[str, Sequence[float]],
                  providers: Optional[Sequence[Provider]] = None) -> "TabulatedEconomics":
        """
        Build from rows keyed by structure id, one cost per provider in id order.

        Raises:
            ParameterError: unknown structure id or wrong row length
        """
        ids = canonical(provider_ids)
        known = dict(enumerate_structures(ids))
        table = {}
        for sid, costs in rows.items():
            if sid not in known:
                raise ParameterError(f"Unknown structure id '{sid}'", parameter="rows", value=sid,
                                     component="coalition_economics")
            if len(costs) != len(ids):
                raise ParameterError(f"Row {sid} needs {len(ids)} costs", parameter="rows", value=list(costs),
                                     component="coalition_economics")
            table[known[sid]] = dict(zip(ids, costs))
        return cls(ids, table, providers)

    def provider_costs(self, structure: CoalitionStructure) -> Dict[str, float]:
        if structure not in self.table:
            raise ParameterError(f"No payoff row for {structure.label()}", parameter="structure",
                                 value=structure.label(), component="coalition_economics")
        costs = dict(self.table[structure])
        for provider in self.providers:
            if len(structure.block_of(provider.id)) > 1:
                costs[provider.id] += (provider.qkd_contribution_per_link * provider.qkd_share_price
                                       + provider.km_contribution_per_link * provider.km_share_price
                                       + provider.cooperation_fee)
        return costs

    def with_providers(self, providers: Sequence[Provider]) -> "TabulatedEconomics":
        return TabulatedEconomics(self.provider_ids, self.table, providers)
