# coalitions/dynamics.py
"""
Coalition formation as a game over pairwise cooperation flags.

A profile holds one flag per unordered provider pair; the coalitions it
induces are the connected components of the flagged pairs. Providers
revise their flags by best response with an irrationality probability,
which makes the strategy adaptation a discrete-time Markov chain over all
profiles.
"""

import logging
from dataclasses import dataclass, field
from itertools import combinations, product
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from coalitions.economics import CoalitionEconomics, CoalitionStructure, canonical, with_fees
from planning.exceptions import ParameterError, StateSpaceLimitError, StationaryConvergenceError
from planning.network_model import node_sort_key

logger = logging.getLogger(__name__)

DEVIATION_SCOPES = ("consistent", "closure")

Vector = Tuple[int, ...]

_REL_TOL = 1e-12
_ROW_TOL = 1e-10


def _strictly_lower(candidate: float, incumbent: float) -> bool:
    return candidate < incumbent - _REL_TOL * max(1.0, abs(incumbent))


@dataclass(frozen=True)
class StrategyProfile:
    """Cooperation flags over unordered provider pairs, packed into an integer state."""

    providers: Tuple[str, ...]
    bits: int = 0

    @property
    def pairs(self) -> List[Tuple[str, str]]:
        return list(combinations(self.providers, 2))

    @property
    def state_count(self) -> int:
        return 2 ** len(self.pairs)

    def _index(self, a: str, b: str) -> int:
        pair = (a, b) if node_sort_key(a) <= node_sort_key(b) else (b, a)
        return self.pairs.index(pair)

    def flag(self, a: str, b: str) -> int:
        return (self.bits >> self._index(a, b)) & 1

    def partners(self, provider: str) -> List[str]:
        return [p for p in self.providers if p != provider]

    def vector(self, provider: str) -> Vector:
        """The provider's own strategy: one flag per other provider, in id order."""
        return tuple(self.flag(provider, other) for other in self.partners(provider))

    def with_vector(self, provider: str, vector: Sequence[int]) -> "StrategyProfile":
        bits = self.bits
        for other, value in zip(self.partners(provider), vector):
            index = self._index(provider, other)
            bits = bits | (1 << index) if value else bits & ~(1 << index)
        return StrategyProfile(self.providers, bits)

    def cooperation_graph(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(self.providers)
        graph.add_edges_from(pair for i, pair in enumerate(self.pairs) if (self.bits >> i) & 1)
        return graph

    def is_consistent(self) -> bool:
        """True when every induced coalition is fully flagged, i.e. the flags describe a partition."""
        graph = self.cooperation_graph()
        for component in nx.connected_components(graph):
            size = len(component)
            if graph.subgraph(component).number_of_edges() != size * (size - 1) // 2:
                return False
        return True

    @classmethod
    def from_structure(cls, providers: Iterable[str], structure: CoalitionStructure) -> "StrategyProfile":
        profile = cls(canonical(providers))
        bits = 0
        for i, (a, b) in enumerate(profile.pairs):
            if structure.block_of(a) == structure.block_of(b):
                bits |= 1 << i
        return cls(profile.providers, bits)

    def describe(self) -> str:
        return ",".join(f"{a}{b}={self.flag(a, b)}" for a, b in self.pairs)


@dataclass(frozen=True)
class DynamicsConfig:
    """Update probability λ, irrationality ℵ, iteration count and seed of the adaptation process."""

    update_probability: float = 0.5
    irrationality: float = 0.1
    max_iterations: int = 1000
    seed: Optional[int] = None

    def __post_init__(self):
        if not 0.0 <= self.update_probability <= 1.0:
            raise ParameterError("update_probability must lie in [0, 1]", parameter="update_probability",
                                 value=self.update_probability, component="coalition_dynamics")
        if not 0.0 <= self.irrationality < 1.0:
            raise ParameterError("irrationality must lie in [0, 1)", parameter="irrationality",
                                 value=self.irrationality, component="coalition_dynamics")
        if not isinstance(self.max_iterations, int) or self.max_iterations < 0:
            raise ParameterError("max_iterations must be a nonnegative integer", parameter="max_iterations",
                                 value=self.max_iterations, component="coalition_dynamics")


@dataclass(frozen=True)
class Deviation:
    provider: str
    vector: Vector
    current_cost: float
    new_cost: float


@dataclass
class RecurrentClass:
    states: List[int]
    distribution: np.ndarray


@dataclass
class StationaryResult:
    """Stationary distribution, or one distribution per attracting class when the chain is reducible."""

    distribution: Optional[np.ndarray]
    reducible: bool = False
    classes: List[RecurrentClass] = field(default_factory=list)
    iterations: int = 0
    residual: float = 0.0


@dataclass
class SimulationResult:
    providers: Tuple[str, ...]
    trajectory: List[int]
    frequencies: np.ndarray

    @property
    def final(self) -> StrategyProfile:
        return StrategyProfile(self.providers, self.trajectory[-1])


def structure_from_profile(profile: StrategyProfile) -> Tuple[CoalitionStructure, bool]:
    """
    Coalitions induced by a profile and whether the flags were partition-consistent.

    Coalitions are the connected components of the flagged pairs, so a
    non-transitive profile such as 12=1, 23=1, 13=0 yields the grand coalition.
    """
    components = nx.connected_components(profile.cooperation_graph())
    structure = CoalitionStructure.of(components, profile.providers)
    return structure, profile.is_consistent()


class CoalitionDynamics:
    """Best responses, equilibria, transition matrix and simulation for one economics context."""

    def __init__(self, economics: CoalitionEconomics, scope: str = "consistent"):
        if scope not in DEVIATION_SCOPES:
            raise ParameterError(f"Unknown deviation scope '{scope}'", parameter="scope", value=scope,
                                 component="coalition_dynamics")
        self.economics = economics
        self.scope = scope
        self.providers = economics.provider_ids
        self._costs: Dict[int, Dict[str, float]] = {}

    def profile(self, bits: int = 0) -> StrategyProfile:
        return StrategyProfile(self.providers, bits)

    def costs(self, profile: StrategyProfile) -> Dict[str, float]:
        if profile.bits not in self._costs:
            structure, _ = structure_from_profile(profile)
            self._costs[profile.bits] = self.economics.provider_costs(structure)
        return self._costs[profile.bits]

    def strategies(self, provider: str, profile: StrategyProfile, scope: Optional[str] = None) -> List[Vector]:
        """Flag vectors the provider may move to, fewest flags first then by flagged partner ids."""
        scope = scope or self.scope
        partners = profile.partners(provider)
        current = profile.vector(provider)
        vectors = []
        for vector in product((0, 1), repeat=len(partners)):
            if scope == "consistent" and vector != current and \
                    not profile.with_vector(provider, vector).is_consistent():
                continue
            vectors.append(vector)
        return sorted(vectors, key=lambda v: (sum(v), [node_sort_key(p) for p, f in zip(partners, v) if f]))

    def best_response(self, provider: str, profile: StrategyProfile, scope: Optional[str] = None) -> Vector:
        best, best_cost = None, None
        for vector in self.strategies(provider, profile, scope):
            cost = self.costs(profile.with_vector(provider, vector))[provider]
            if best is None or _strictly_lower(cost, best_cost):
                best, best_cost = vector, cost
        return best

    def deviations(self, profile: StrategyProfile, scope: Optional[str] = None) -> List[Deviation]:
        """Every unilateral move that strictly lowers the mover's cost."""
        found = []
        current_costs = self.costs(profile)
        for provider in self.providers:
            current = profile.vector(provider)
            for vector in self.strategies(provider, profile, scope):
                if vector == current:
                    continue
                cost = self.costs(profile.with_vector(provider, vector))[provider]
                if _strictly_lower(cost, current_costs[provider]):
                    found.append(Deviation(provider, vector, current_costs[provider], cost))
        return found

    def is_equilibrium(self, profile: StrategyProfile, scope: Optional[str] = None) -> Tuple[bool, List[Deviation]]:
        found = self.deviations(profile, scope)
        return not found, found

    def stable_structures(self, scope: Optional[str] = None) -> List[str]:
        stable = []
        for sid, structure in self.economics.structures:
            ok, _ = self.is_equilibrium(StrategyProfile.from_structure(self.providers, structure), scope)
            if ok:
                stable.append(sid)
        return stable

    def _cost_matrix(self, states: int) -> np.ndarray:
        return np.array([[self.costs(self.profile(s))[p] for p in self.providers] for s in range(states)])

    def transition_matrix(self, config: DynamicsConfig, state_space_cap: int = 2 ** 15) -> np.ndarray:
        """
        Row-stochastic matrix over every profile.

        A move between two profiles involves the providers touched by a changed
        pair; each of them updates with probability λ and accepts the move with
        1 - ℵ if it strictly lowers its cost, ℵ otherwise. The leftover mass of
        every row is the self-transition.

        Raises:
            StateSpaceLimitError: more profiles than the cap
        """
        n = len(self.providers)
        states = self.profile().state_count
        if states > state_space_cap:
            raise StateSpaceLimitError(f"{states} profiles over {n} providers exceed the cap of {state_space_cap}",
                                       size=states, limit=state_space_cap, operation="transition_matrix")

        lam, irr = config.update_probability, config.irrationality
        costs = self._cost_matrix(states)
        indices = np.arange(states)
        masks = []
        pairs = self.profile().pairs
        for p in self.providers:
            masks.append(sum(1 << i for i, pair in enumerate(pairs) if p in pair))

        matrix = np.zeros((states, states))
        for tau in range(states):
            changed = indices ^ tau
            involved = np.stack([(changed & mask) != 0 for mask in masks])
            size = involved.sum(axis=0)
            current = costs[tau]
            improving = (costs < current - _REL_TOL * np.maximum(1.0, np.abs(current))).T
            accept = np.where(involved, np.where(improving, 1.0 - irr, irr), 1.0).prod(axis=0)
            row = lam ** size * (1.0 - lam) ** (n - size) * accept
            row[tau] = 0.0
            residual = 1.0 - row.sum()
            if residual < -_ROW_TOL:
                logger.warning(f"Transition row {tau} sums above one; normalizing the full row")
                row[tau] = (1.0 - lam) ** n
                row = row / row.sum()
            else:
                row[tau] = max(residual, 0.0)
            matrix[tau] = row

        logger.info(f"Built a {states}x{states} transition matrix (λ={lam}, ℵ={irr})")
        return matrix

    def simulate(self, config: DynamicsConfig, initial: Optional[StrategyProfile] = None,
                 rng: Optional[np.random.Generator] = None, scope: str = "closure") -> SimulationResult:
        """
        Seeded best-response simulation.

        Every iteration each provider updates with probability λ and proposes
        its best response against the previous profile, or with probability ℵ
        any other flag vector. A pair flag changes only when both of its
        providers update and propose the same new value.
        """
        rng = rng if rng is not None else np.random.default_rng(config.seed)
        profile = initial or self.profile()
        lam, irr = config.update_probability, config.irrationality
        responses: Dict[Tuple[str, int], Vector] = {}
        trajectory = [profile.bits]

        for _ in range(config.max_iterations):
            proposals: Dict[str, Vector] = {}
            for provider in self.providers:
                if rng.random() >= lam:
                    continue
                key = (provider, profile.bits)
                if key not in responses:
                    responses[key] = self.best_response(provider, profile, scope)
                best = responses[key]
                others = [v for v in product((0, 1), repeat=len(self.providers) - 1) if v != best]
                if rng.random() < 1.0 - irr or not others:
                    proposals[provider] = best
                else:
                    proposals[provider] = others[int(rng.integers(len(others)))]

            bits = profile.bits
            for i, (a, b) in enumerate(profile.pairs):
                if a in proposals and b in proposals:
                    wanted_a = proposals[a][profile.partners(a).index(b)]
                    wanted_b = proposals[b][profile.partners(b).index(a)]
                    if wanted_a == wanted_b:
                        bits = bits | (1 << i) if wanted_a else bits & ~(1 << i)
            profile = self.profile(bits)
            trajectory.append(bits)

        frequencies = np.bincount(trajectory, minlength=profile.state_count) / len(trajectory)
        return SimulationResult(self.providers, trajectory, frequencies)


def provider_cost(profile: StrategyProfile, economics: CoalitionEconomics) -> Dict[str, float]:
    structure, _ = structure_from_profile(profile)
    return economics.provider_costs(structure)


def best_response(provider: str, profile: StrategyProfile, economics: CoalitionEconomics,
                  scope: str = "consistent") -> Vector:
    return CoalitionDynamics(economics, scope).best_response(provider, profile)


def is_equilibrium(profile: StrategyProfile, economics: CoalitionEconomics,
                   scope: str = "consistent") -> Tuple[bool, List[Deviation]]:
    return CoalitionDynamics(economics, scope).is_equilibrium(profile)


def transition_matrix(economics: CoalitionEconomics, config: DynamicsConfig,
                      state_space_cap: int = 2 ** 15) -> np.ndarray:
    return CoalitionDynamics(economics, "closure").transition_matrix(config, state_space_cap)


def simulate_dynamics(economics: CoalitionEconomics, config: DynamicsConfig,
                      initial: Optional[StrategyProfile] = None,
                      rng: Optional[np.random.Generator] = None) -> SimulationResult:
    return CoalitionDynamics(economics, "closure").simulate(config, initial, rng)


def _power_polish(matrix: np.ndarray, pi: np.ndarray, max_iterations: int,
                  tolerance: float) -> Tuple[np.ndarray, int, float]:
    residual = float(np.max(np.abs(pi @ matrix - pi)))
    iterations = 0
    while residual > tolerance:
        if iterations >= max_iterations:
            raise StationaryConvergenceError(f"Stationary residual {residual:.3e} above {tolerance:.0e} "
                                             f"after {max_iterations} power steps",
                                             iterations=max_iterations, residual=residual)
        pi = pi @ matrix
        pi /= pi.sum()
        iterations += 1
        residual = float(np.max(np.abs(pi @ matrix - pi)))
    return pi, iterations, residual


def _solve_irreducible(matrix: np.ndarray, max_iterations: int, tolerance: float) -> Tuple[np.ndarray, int, float]:
    """π(I - T) = 0 with one balance equation replaced by Σπ = 1, then power steps until the residual holds."""
    n = matrix.shape[0]
    system = (np.eye(n) - matrix).T
    system[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    try:
        pi = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError:
        logger.warning(f"Singular balance system for {n} states; starting power steps from uniform")
        pi = np.full(n, 1.0 / n)
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    return _power_polish(matrix, pi, max_iterations, tolerance)



def stationary_distribution(matrix: np.ndarray, max_iterations: int = 10 ** 6,
                            tolerance: float = 1e-12) -> StationaryResult:
    """
    Stationary distribution of a row-stochastic matrix.

    The balance equations are solved directly and polished by power steps
    until max |πT - π| is within tolerance.

    A reducible chain has no unique answer; each attracting class then gets
    its own distribution and the result is flagged reducible.

    Raises:
        ParameterError: matrix not square and row-stochastic
        StationaryConvergenceError: residual still above tolerance after max_iterations power steps
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] == 0:
        raise ParameterError("Transition matrix must be square and nonempty", parameter="matrix",
                             value=list(matrix.shape), component="coalition_dynamics")
    if np.any(matrix < 0) or np.any(np.abs(matrix.sum(axis=1) - 1.0) > _ROW_TOL):
        raise ParameterError("Transition matrix must be row-stochastic", parameter="matrix",
                             component="coalition_dynamics")

    graph = nx.DiGraph()
    graph.add_nodes_from(range(matrix.shape[0]))
    graph.add_edges_from(zip(*np.nonzero(matrix)))

    if nx.is_strongly_connected(graph):
        pi, iterations, residual = _solve_irreducible(matrix, max_iterations, tolerance)
        states = list(range(matrix.shape[0]))
        return StationaryResult(pi, False, [RecurrentClass(states, pi)], iterations, residual)

    classes = []
    for component in sorted((sorted(c) for c in nx.attracting_components(graph)), key=lambda c: c[0]):
        sub = matrix[np.ix_(component, component)]
        pi, _, _ = _solve_irreducible(sub, max_iterations, tolerance)
        classes.append(RecurrentClass(component, pi))
    logger.warning(f"Chain is reducible: {len(classes)} attracting classes")
    return StationaryResult(None, True, classes)


def fee_sweep(economics: CoalitionEconomics, qkd_prices: Sequence[float], km_prices: Sequence[float],
              cooperation_fee: Optional[float] = None, scope: str = "consistent") -> List[Dict[str, object]]:
    """
    Stable structure for every (QKD sharing price, KM sharing price) pair.

    The reported structure is the stable one with the lowest total provider
    cost, ties broken by id, or 'none' when nothing is stable.
    """
    rows = []
    for qkd_price in qkd_prices:
        for km_price in km_prices:
            priced = economics.with_providers(with_fees(economics.providers, qkd_price, km_price, cooperation_fee))
            dynamics = CoalitionDynamics(priced, scope)
            stable = dynamics.stable_structures()
            chosen = min(stable, key=lambda sid: (priced.total_cost(priced.structure(sid)),
                                                  int(sid[1:]))) if stable else "none"
            rows.append({'qkd_share_price': float(qkd_price), 'km_share_price': float(km_price),
                         'stable_structure': chosen, 'stable_count': len(stable)})
    logger.info(f"Fee sweep evaluated {len(rows)} price pairs")
    return rows


def equilibrium_states(dynamics: CoalitionDynamics, scope: Optional[str] = None) -> List[int]:
    """Every profile, consistent or not, with no improving unilateral move."""
    states = dynamics.profile().state_count
    return [s for s in range(states) if dynamics.is_equilibrium(dynamics.profile(s), scope)[0]]


def profile_for(providers: Iterable[str], flags: Mapping[Tuple[str, str], int]) -> StrategyProfile:
    """Profile from explicit pair flags; unspecified pairs are 0."""
    profile = StrategyProfile(canonical(providers))
    bits = 0
    for (a, b), value in flags.items():
        if value:
            bits |= 1 << profile._index(a, b)
    return StrategyProfile(profile.providers, bits)
