"""Limit Reached popup policy: when it fires and its lifecycle."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from decimal import Decimal
from typing import Optional

from .footprint import (
    HumanScaleReading,
    ResourceModel,
    UsageLedger,
    energy_kwh_text,
    to_human_energy,
    to_human_water,
    water_liters_text,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PopupConfig:
    limit: int = 7
    mode: str = "count"  # "count" or "resource-threshold"
    energy_threshold_wh: Optional[Decimal] = None
    water_threshold_ml: Optional[Decimal] = None

    def __post_init__(self) -> None:
        if self.limit <= 0:
            raise ValueError("popup limit must be a positive integer")
        if self.mode not in ("count", "resource-threshold"):
            raise ValueError(f"unknown popup mode {self.mode!r}")
        if self.mode == "resource-threshold" and not (
            self.energy_threshold_wh or self.water_threshold_ml
        ):
            raise ValueError("resource-threshold mode needs at least one threshold")


@dataclass(frozen=True)
class PopupPolicyState:
    queries_since_last_popup: int = 0
    popup_open: bool = False
    popups_fired: int = 0
    last_popup_opened_at: Optional[datetime] = None
    last_popup_closed_at: Optional[datetime] = None


@dataclass(frozen=True)
class PopupPayload:
    """Everything the modal renders, frozen at fire time from the ledger."""

    energy_kwh: str
    water_liters: str
    human_energy: HumanScaleReading
    human_water: HumanScaleReading
    read_more_url: str

    def as_dict(self) -> dict:
        return {
            "energy_kwh": self.energy_kwh,
            "water_liters": self.water_liters,
            "human_energy": self.human_energy.as_dict(),
            "human_water": self.human_water.as_dict(),
            "read_more_url": self.read_more_url,
        }


def build_payload(ledger: UsageLedger, model: ResourceModel, read_more_url: str) -> PopupPayload:
    return PopupPayload(
        energy_kwh=energy_kwh_text(ledger.energy_total),
        water_liters=water_liters_text(ledger.water_total),
        human_energy=to_human_energy(ledger.energy_total, model),
        human_water=to_human_water(ledger.water_total, model),
        read_more_url=read_more_url,
    )


def _threshold_crossed(config: PopupConfig, ledger: UsageLedger, fired: int) -> bool:
    marks = fired + 1
    if config.energy_threshold_wh and ledger.energy_total >= config.energy_threshold_wh * marks:
        return True
    if config.water_threshold_ml and ledger.water_total >= config.water_threshold_ml * marks:
        return True
    return False


def on_query(
    state: PopupPolicyState,
    config: PopupConfig,
    ledger: UsageLedger,
    model: ResourceModel,
    read_more_url: str,
    at: datetime,
) -> tuple[PopupPolicyState, Optional[PopupPayload]]:
    """Advance the counter for one query; fire the popup when the limit is hit.

    Queries arriving while a popup is open still count toward the next one,
    and a fire while open simply refreshes the payload (one popup at a time).
    """
    at = at.astimezone(timezone.utc)
    counter = state.queries_since_last_popup + 1
    if config.mode == "count":
        fire = counter >= config.limit
    else:
        fire = _threshold_crossed(config, ledger, state.popups_fired)
    if not fire:
        return replace(state, queries_since_last_popup=counter), None
    fired_state = replace(
        state,
        queries_since_last_popup=0,
        popup_open=True,
        popups_fired=state.popups_fired + 1,
        last_popup_opened_at=at,
    )
    return fired_state, build_payload(ledger, model, read_more_url)


def on_dismiss(state: PopupPolicyState, at: datetime) -> PopupPolicyState:
    """Close the popup. Dismissing with nothing open is an ignored no-op."""
    if not state.popup_open:
        log.debug("popup dismiss ignored: no popup open")
        return state
    return replace(state, popup_open=False, last_popup_closed_at=at.astimezone(timezone.utc))
