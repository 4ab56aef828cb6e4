# planning/cost_model.py
"""
Closed-form device counts and per-wavelength cost coefficients.

Coefficients are taken per link: the devices of link (i, j) are charged to
the wavelengths reserved or used on that link only.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Sequence

from planning.exceptions import ParameterError

logger = logging.getLogger(__name__)

DEVICE_CLASSES = ("tx", "rx", "km", "si", "md", "ch")
PHASES = ("r", "e", "o")

# Relative distance under which a quotient counts as the integer it rounds to:
# rounding noise just above an integer adds no link, 2.0000000005 still needs 3.
_SNAP_RTOL = 1e-12


def _ceil(value: float) -> int:
    nearest = round(value)
    if abs(value - nearest) <= _SNAP_RTOL * max(1.0, abs(value)):
        return int(nearest)
    return math.ceil(value)


@dataclass(frozen=True)
class PriceTable:
    """Prices per device class for the reservation, utilization and on-demand phases."""

    prices: Dict[str, Dict[str, float]]

    def __post_init__(self):
        for phase in PHASES:
            row = self.prices.get(phase)
            if row is None:
                raise ParameterError(f"Price table is missing phase '{phase}'", parameter=phase)
            for cls in DEVICE_CLASSES:
                value = row.get(cls)
                if value is None or value < 0 or not math.isfinite(value):
                    raise ParameterError(f"Price {phase}/{cls} must be a nonnegative number",
                                         parameter=f"{phase}.{cls}", value=value)
        for cls in DEVICE_CLASSES:
            if self.prices["o"][cls] < self.prices["e"][cls]:
                logger.warning(f"On-demand price for '{cls}' ({self.prices['o'][cls]}) is below "
                               f"its utilization price ({self.prices['e'][cls]})")

    def price(self, phase: str, device_class: str) -> float:
        return self.prices[phase][device_class]

    @classmethod
    def reference(cls) -> "PriceTable":
        """The reference reservation, utilization and on-demand prices."""
        base = {"tx": 1500.0, "rx": 2250.0, "km": 1200.0, "si": 150.0, "md": 300.0, "ch": 1.0}
        return cls({
            "r": dict(base),
            "e": dict(base),
            "o": {"tx": 6000.0, "rx": 9000.0, "km": 3000.0, "si": 500.0, "md": 900.0, "ch": 4.0},
        })

    @classmethod
    def from_document(cls, document: Dict[str, Any]) -> "PriceTable":
        try:
            prices = {phase: {c: float(document[phase][c]) for c in DEVICE_CLASSES} for phase in PHASES}
        except (KeyError, TypeError, ValueError) as e:
            raise ParameterError(f"Price table document is incomplete: {e}", parameter="prices",
                                 operation="from_document", cause=e)
        return cls(prices)

    def to_document(self) -> Dict[str, Dict[str, float]]:
        return {phase: dict(self.prices[phase]) for phase in PHASES}


@dataclass(frozen=True)
class PhysicalParams:
    """Physical-layer constants of the planning model."""

    tx_span_km: float = 160.0
    key_rate_per_link: float = 1.0
    qkd_wavelengths_per_link: int = 3
    km_wavelengths_per_link: int = 1
    energy_cost_per_node: Dict[str, float] = field(default_factory=dict)
    default_energy_cost: float = 0.0

    def __post_init__(self):
        if not self.tx_span_km > 0:
            raise ParameterError("Transmission span D must be positive", parameter="tx_span_km",
                                 value=self.tx_span_km)
        if not self.key_rate_per_link > 0:
            raise ParameterError("Key rate per link K_D must be positive",
                                 parameter="key_rate_per_link", value=self.key_rate_per_link)
        if self.qkd_wavelengths_per_link != 3 or self.km_wavelengths_per_link != 1:
            raise ParameterError("A QKD link takes 3 wavelengths and a KM link 1",
                                 parameter="wavelengths_per_link",
                                 value=[self.qkd_wavelengths_per_link, self.km_wavelengths_per_link])

    def energy_cost(self, node: str) -> float:
        return self.energy_cost_per_node.get(node, self.default_energy_cost)

    @classmethod
    def from_document(cls, document: Dict[str, Any]) -> "PhysicalParams":
        return cls(
            tx_span_km=float(document.get("tx_span_km", 160.0)),
            key_rate_per_link=float(document.get("key_rate_per_link", 1.0)),
            qkd_wavelengths_per_link=int(document.get("qkd_wavelengths_per_link", 3)),
            km_wavelengths_per_link=int(document.get("km_wavelengths_per_link", 1)),
            energy_cost_per_node={str(k): float(v) for k, v in document.get("energy_cost_per_node", {}).items()},
            default_energy_cost=float(document.get("default_energy_cost", 0.0)),
        )


@dataclass(frozen=True)
class DeviceCounts:
    tx: int
    rx: int
    km: int
    si: int
    md: int


@dataclass(frozen=True)
class WavelengthCoefficients:
    """Cost of one QKD wavelength and one KM wavelength on a link in a phase."""

    per_qkd_wavelength_cost: float
    per_km_wavelength_cost: float

    def for_resource(self, resource: str) -> float:
        return self.per_qkd_wavelength_cost if resource == "qkd" else self.per_km_wavelength_cost


def parallel_links(secret_key_rate: float, key_rate_per_link: float) -> int:
    """Number of parallel QKD links needed to carry a secret-key rate."""
    if key_rate_per_link <= 0:
        raise ParameterError("Key rate per link must be positive", parameter="key_rate_per_link",
                             value=key_rate_per_link, operation="parallel_links")
    if secret_key_rate < 0:
        raise ParameterError("Secret-key rate must be nonnegative", parameter="secret_key_rate",
                             value=secret_key_rate, operation="parallel_links")
    if secret_key_rate == 0:
        return 0
    return max(_ceil(secret_key_rate / key_rate_per_link), 1)


def per_link_device_counts(link_km: float, parallel: int, span_km: float) -> DeviceCounts:
    """Transmitters, receivers, key managers, security infrastructure and MUX/DEMUX pairs of one link."""
    if link_km <= 0:
        raise ParameterError("Link length must be positive", parameter="link_km", value=link_km,
                             operation="per_link_device_counts")
    if span_km <= 0:
        raise ParameterError("Span must be positive", parameter="span_km", value=span_km,
                             operation="per_link_device_counts")
    if parallel < 0:
        raise ParameterError("Parallel link count must be nonnegative", parameter="parallel",
                             value=parallel, operation="per_link_device_counts")

    ratio = link_km / span_km
    segments = _ceil(ratio)
    si = max(_ceil(ratio - 1), 0)
    return DeviceCounts(
        tx=2 * parallel * segments,
        rx=parallel * segments,
        km=_ceil(ratio + 1),
        si=si,
        md=segments + si,
    )


def link_channel_cost(link_km: float, parallel: int) -> float:
    """Wavelength-km used on a link: three per parallel QKD link plus one KM channel."""
    if link_km <= 0 or parallel < 0:
        raise ParameterError("Need link_km > 0 and parallel >= 0", parameter="link_km",
                             value=[link_km, parallel], operation="link_channel_cost")
    return 3 * parallel * link_km + link_km


def objective_coefficients(link_km: float, parallel: int, prices: PriceTable,
                           params: PhysicalParams, phase: str) -> WavelengthCoefficients:
    """
    Per-wavelength cost coefficients of a link for one phase.

    Args:
        link_km: Link length e
        parallel: Parallel QKD links P
        prices: Price table
        params: Physical parameters (span D)
        phase: 'r', 'e' or 'o'

    Returns:
        WavelengthCoefficients with the QKD and KM wavelength costs
    """
    if phase not in PHASES:
        raise ParameterError(f"Unknown phase '{phase}'", parameter="phase", value=phase,
                             operation="objective_coefficients")
    counts = per_link_device_counts(link_km, parallel, params.tx_span_km)
    beta = prices.prices[phase]
    channel = link_km * beta["ch"]
    per_qkd = (counts.tx * beta["tx"] + counts.rx * beta["rx"]) / 3.0 + channel
    per_km = counts.km * beta["km"] + counts.si * beta["si"] + counts.md * beta["md"] + channel
    return WavelengthCoefficients(per_qkd, per_km)


def route_first_stage_energy(route: Sequence[str], params: PhysicalParams) -> float:
    """Energy cost of every node a route enters (all nodes but the source)."""
    return math.fsum(params.energy_cost(node) for node in route[1:])


def scale_channel_prices(prices: PriceTable, factor: float) -> PriceTable:
    """Price table with every channel price multiplied by factor."""
    if factor < 0:
        raise ParameterError("Channel price factor must be nonnegative", parameter="factor",
                             value=factor, operation="scale_channel_prices")
    scaled = {phase: dict(prices.prices[phase]) for phase in PHASES}
    for phase in PHASES:
        scaled[phase]["ch"] = scaled[phase]["ch"] * factor
    return replace(prices, prices=scaled)
