"""Per-query resource constants, cumulative accounting, and human-scale units.

All resource math runs on ``decimal.Decimal`` so formatted strings are
platform-independent and ledger totals reconstruct exactly from the query
count (no float drift).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from datetime import datetime, timezone
from decimal import Decimal, ROUND_FLOOR, ROUND_HALF_UP
from enum import Enum
from typing import Optional, Union

Number = Union[Decimal, int, float, str]

_THREE_PLACES = Decimal("0.001")


def _dec(value: Number) -> Decimal:
    """Coerce to Decimal through str so float literals keep their face value."""
    if isinstance(value, Decimal):
        return value
    return Decimal(str(value))


def format_metric(value: Number) -> str:
    """Render a non-negative quantity with exactly 3 decimals, half away from zero."""
    dec = _dec(value)
    if dec < 0:
        raise ValueError(f"metric value must be non-negative, got {dec}")
    return str(dec.quantize(_THREE_PLACES, rounding=ROUND_HALF_UP))


class Unit(str, Enum):
    LIGHTBULB_HOURS = "lightbulb-hours"
    VEHICLE_MILES = "vehicle-miles"
    CUPS = "cups"
    BATHTUBS = "bathtubs"
    HOT_TUBS = "hot-tubs"


@dataclass(frozen=True)
class ResourceModel:
    """Per-query constants and the anchors used for human-scale conversion.

    Energy in watt-hours, water volumes in milliliters unless the field name
    says otherwise. Tier thresholds decide when the display unit escalates
    (lightbulb-hours to vehicle-miles; cups to bathtubs to hot tubs).
    """

    energy_per_query: Decimal = Decimal("2.9")        # Wh
    water_per_query: Decimal = Decimal("16.9")        # mL
    bulb_power: Decimal = Decimal("10")               # W
    cup_volume: Decimal = Decimal("240")              # mL
    vehicle_efficiency: Decimal = Decimal("250")      # Wh per mile
    bathtub_volume: Decimal = Decimal("150")          # L
    hottub_volume: Decimal = Decimal("1000")          # L
    energy_tier_threshold: Decimal = Decimal("100")   # lightbulb-hours
    water_tier_thresholds: tuple[Decimal, Decimal] = (Decimal("150"), Decimal("1000"))  # L

    def __post_init__(self) -> None:
        for name in (
            "energy_per_query",
            "water_per_query",
            "bulb_power",
            "cup_volume",
            "vehicle_efficiency",
            "bathtub_volume",
            "hottub_volume",
            "energy_tier_threshold",
        ):
            object.__setattr__(self, name, _dec(getattr(self, name)))
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        low, high = self.water_tier_thresholds
        low, high = _dec(low), _dec(high)
        if low <= 0 or high <= 0:
            raise ValueError("water_tier_thresholds must be strictly positive")
        if not low < high:
            raise ValueError("water_tier_thresholds must be strictly increasing")
        object.__setattr__(self, "water_tier_thresholds", (low, high))


# Named configuration profiles. The prose constant for water is 16.9 mL/query;
# the display strings in the reference screenshots are only consistent with
# 17.0 mL, so both ship and the golden-string tests pin "paper-figures".
PROFILES: dict[str, ResourceModel] = {
    "paper-text": ResourceModel(energy_per_query=Decimal("2.9"), water_per_query=Decimal("16.9")),
    "paper-figures": ResourceModel(energy_per_query=Decimal("2.9"), water_per_query=Decimal("17.0")),
}

DEFAULT_PROFILE = "paper-text"


def profile(name: str) -> ResourceModel:
    try:
        return PROFILES[name]
    except KeyError:
        raise KeyError(f"unknown resource profile {name!r}; known: {sorted(PROFILES)}") from None


@dataclass(frozen=True)
class HumanScaleReading:
    """A resource total expressed in an everyday unit, ready to render."""

    quantity: Decimal
    unit: Unit
    pictogram_count: int
    formatted: str

    @classmethod
    def of(cls, quantity: Decimal, unit: Unit) -> "HumanScaleReading":
        if quantity < 0:
            raise ValueError("human-scale quantity must be non-negative")
        count = int(quantity.to_integral_value(rounding=ROUND_FLOOR))
        return cls(quantity=quantity, unit=unit, pictogram_count=count, formatted=format_metric(quantity))

    def as_dict(self) -> dict:
        return {
            "quantity": str(self.quantity),
            "unit": self.unit.value,
            "pictogram_count": self.pictogram_count,
            "formatted": self.formatted,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "HumanScaleReading":
        return cls(
            quantity=Decimal(raw["quantity"]),
            unit=Unit(raw["unit"]),
            pictogram_count=int(raw["pictogram_count"]),
            formatted=raw["formatted"],
        )


@dataclass(frozen=True)
class UsageLedger:
    """Per-user monotone totals. Totals are always count x per-query constants."""

    user_id: str
    query_count: int = 0
    energy_total: Decimal = Decimal("0")   # Wh
    water_total: Decimal = Decimal("0")    # mL
    first_query_at: Optional[datetime] = None
    last_query_at: Optional[datetime] = None


def record_query(ledger: UsageLedger, model: ResourceModel, at: datetime) -> UsageLedger:
    """Advance the ledger by one detected query."""
    if at.tzinfo is None:
        raise ValueError("query timestamp must be timezone-aware")
    at = at.astimezone(timezone.utc)
    return replace(
        ledger,
        query_count=ledger.query_count + 1,
        energy_total=ledger.energy_total + model.energy_per_query,
        water_total=ledger.water_total + model.water_per_query,
        first_query_at=ledger.first_query_at or at,
        last_query_at=at,
    )


def to_human_energy(energy_total: Number, model: ResourceModel) -> HumanScaleReading:
    """Bulb-hours until the configured threshold, then vehicle-miles."""
    energy = _dec(energy_total)
    if energy < 0:
        raise ValueError("energy total must be non-negative")
    bulb_hours = energy / model.bulb_power
    if bulb_hours < model.energy_tier_threshold:
        return HumanScaleReading.of(bulb_hours, Unit.LIGHTBULB_HOURS)
    return HumanScaleReading.of(energy / model.vehicle_efficiency, Unit.VEHICLE_MILES)


def to_human_water(water_total: Number, model: ResourceModel) -> HumanScaleReading:
    """Cups, then bathtubs, then hot tubs as the total crosses the thresholds."""
    water = _dec(water_total)
    if water < 0:
        raise ValueError("water total must be non-negative")
    liters = water / Decimal("1000")
    low, high = model.water_tier_thresholds
    if liters < low:
        return HumanScaleReading.of(water / model.cup_volume, Unit.CUPS)
    if liters < high:
        return HumanScaleReading.of(liters / model.bathtub_volume, Unit.BATHTUBS)
    return HumanScaleReading.of(liters / model.hottub_volume, Unit.HOT_TUBS)


def energy_kwh_text(energy_total: Number) -> str:
    """Watt-hours rendered as a 3-decimal kWh string (popup standard metric)."""
    return format_metric(_dec(energy_total) / Decimal("1000"))


def water_liters_text(water_total: Number) -> str:
    """Milliliters rendered as a 3-decimal liters string (popup standard metric)."""
    return format_metric(_dec(water_total) / Decimal("1000"))
