"""Service configuration: one YAML file, validated at startup.

Unknown keys are rejected with the offending key named, so typos never
silently fall back to defaults. Listen address and storage dir may be
overridden by ECOGAUGE_LISTEN / ECOGAUGE_STORAGE_DIR.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from datetime import timedelta
from decimal import Decimal
from pathlib import Path
from typing import Any, Optional

import yaml

from .footprint import DEFAULT_PROFILE, ResourceModel, profile
from .ingest import DEFAULT_IGNORE_SUBSTRINGS, DEFAULT_URL_PATTERN, QueryFilter
from .popup import PopupConfig
from .score import PenaltySchedule


class ConfigError(ValueError):
    pass


_RESOURCE_OVERRIDES = {
    # config key -> ResourceModel field
    "energy_per_query_wh": "energy_per_query",
    "water_per_query_ml": "water_per_query",
    "bulb_power_w": "bulb_power",
    "cup_volume_ml": "cup_volume",
    "vehicle_efficiency_wh_per_mile": "vehicle_efficiency",
    "bathtub_volume_l": "bathtub_volume",
    "hottub_volume_l": "hottub_volume",
    "energy_tier_threshold_bulb_hours": "energy_tier_threshold",
}


@dataclass(frozen=True)
class ProxySettings:
    enabled: bool = False
    listen: str = "127.0.0.1:8081"
    upstream: str = "https://chatgpt.com"
    user_header: str = "X-User-Id"
    default_user: str = "anonymous"


@dataclass(frozen=True)
class ServiceConfig:
    resource_profile: str = DEFAULT_PROFILE
    resource_overrides: dict = field(default_factory=dict)
    tiers: Optional[list] = None
    regen_minutes: float = 20
    regen_points: int = 1
    initial_score: int = 100
    popup_limit: int = 7
    popup_mode: str = "count"
    popup_energy_threshold_wh: Optional[str] = None
    popup_water_threshold_ml: Optional[str] = None
    url_pattern: str = DEFAULT_URL_PATTERN
    ignore_substrings: tuple[str, ...] = DEFAULT_IGNORE_SUBSTRINGS
    idempotency_window_hours: float = 24
    proxy: ProxySettings = field(default_factory=ProxySettings)
    listen: str = "127.0.0.1:8080"
    auth_token: Optional[str] = None
    storage_dir: str = "./data"
    snapshot_interval: int = 100
    alias_external_ids: bool = False
    alias_keyfile: Optional[str] = None
    read_more_url: str = "https://example.org/llm-environmental-impact"
    stream_tick_seconds: float = 1200  # accrual push cadence on the update stream

    def resource_model(self) -> ResourceModel:
        model = profile(self.resource_profile)
        overrides: dict[str, Any] = {}
        for key, value in self.resource_overrides.items():
            if key == "water_tier_thresholds_l":
                overrides["water_tier_thresholds"] = tuple(Decimal(str(v)) for v in value)
            else:
                overrides[_RESOURCE_OVERRIDES[key]] = Decimal(str(value))
        return replace(model, **overrides) if overrides else model

    def penalty_schedule(self) -> PenaltySchedule:
        if self.tiers is None:
            return PenaltySchedule(
                regen_period=timedelta(minutes=self.regen_minutes),
                regen_points=self.regen_points,
            )
        return PenaltySchedule.from_tier_list(self.tiers, self.regen_minutes, self.regen_points)

    def popup_config(self) -> PopupConfig:
        return PopupConfig(
            limit=self.popup_limit,
            mode=self.popup_mode,
            energy_threshold_wh=(
                Decimal(str(self.popup_energy_threshold_wh))
                if self.popup_energy_threshold_wh is not None else None
            ),
            water_threshold_ml=(
                Decimal(str(self.popup_water_threshold_ml))
                if self.popup_water_threshold_ml is not None else None
            ),
        )

    def query_filter(self) -> QueryFilter:
        return QueryFilter(
            url_pattern=self.url_pattern,
            ignore_substrings=tuple(self.ignore_substrings),
        )

    def idempotency_window(self) -> timedelta:
        return timedelta(hours=self.idempotency_window_hours)

    def storage_path(self) -> Path:
        return Path(self.storage_dir)


def _reject_unknown(section: str, data: dict, allowed: set[str]) -> None:
    for key in data:
        if key not in allowed:
            where = f"{section}.{key}" if section else key
            raise ConfigError(f"unknown config key: {where}")


def config_from_dict(raw: dict) -> ServiceConfig:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    _reject_unknown("", raw, {"resources", "score", "popup", "ingest", "server", "storage",
                              "read_more_url"})

    kwargs: dict[str, Any] = {}

    resources = raw.get("resources", {}) or {}
    _reject_unknown("resources", resources,
                    {"profile", "water_tier_thresholds_l", *_RESOURCE_OVERRIDES})
    if "profile" in resources:
        name = resources["profile"]
        try:
            profile(name)
        except KeyError as exc:
            raise ConfigError(str(exc)) from exc
        kwargs["resource_profile"] = name
    kwargs["resource_overrides"] = {k: v for k, v in resources.items() if k != "profile"}

    score = raw.get("score", {}) or {}
    _reject_unknown("score", score, {"tiers", "regen_minutes", "regen_points", "initial_score"})
    if "tiers" in score:
        kwargs["tiers"] = score["tiers"]
    if "regen_minutes" in score:
        kwargs["regen_minutes"] = float(score["regen_minutes"])
    if "regen_points" in score:
        kwargs["regen_points"] = int(score["regen_points"])
    if "initial_score" in score:
        kwargs["initial_score"] = int(score["initial_score"])

    popup = raw.get("popup", {}) or {}
    _reject_unknown("popup", popup, {"limit", "mode", "energy_threshold_wh", "water_threshold_ml"})
    if "limit" in popup:
        kwargs["popup_limit"] = int(popup["limit"])
    if "mode" in popup:
        kwargs["popup_mode"] = popup["mode"]
    if popup.get("energy_threshold_wh") is not None:
        kwargs["popup_energy_threshold_wh"] = str(popup["energy_threshold_wh"])
    if popup.get("water_threshold_ml") is not None:
        kwargs["popup_water_threshold_ml"] = str(popup["water_threshold_ml"])

    ingest = raw.get("ingest", {}) or {}
    _reject_unknown("ingest", ingest,
                    {"url_pattern", "ignore_substrings", "idempotency_window_hours", "proxy"})
    if "url_pattern" in ingest:
        kwargs["url_pattern"] = ingest["url_pattern"]
    if "ignore_substrings" in ingest:
        kwargs["ignore_substrings"] = tuple(ingest["ignore_substrings"])
    if "idempotency_window_hours" in ingest:
        kwargs["idempotency_window_hours"] = float(ingest["idempotency_window_hours"])
    proxy_raw = ingest.get("proxy", {}) or {}
    _reject_unknown("ingest.proxy", proxy_raw,
                    {"enabled", "listen", "upstream", "user_header", "default_user"})
    if proxy_raw:
        kwargs["proxy"] = ProxySettings(**proxy_raw)

    server = raw.get("server", {}) or {}
    _reject_unknown("server", server, {"listen", "auth_token", "stream_tick_seconds"})
    if "listen" in server:
        kwargs["listen"] = server["listen"]
    if "auth_token" in server:
        kwargs["auth_token"] = server["auth_token"]
    if "stream_tick_seconds" in server:
        kwargs["stream_tick_seconds"] = float(server["stream_tick_seconds"])

    storage = raw.get("storage", {}) or {}
    _reject_unknown("storage", storage,
                    {"dir", "snapshot_interval", "alias_external_ids", "alias_keyfile"})
    if "dir" in storage:
        kwargs["storage_dir"] = storage["dir"]
    if "snapshot_interval" in storage:
        kwargs["snapshot_interval"] = int(storage["snapshot_interval"])
    if "alias_external_ids" in storage:
        kwargs["alias_external_ids"] = bool(storage["alias_external_ids"])
    if "alias_keyfile" in storage:
        kwargs["alias_keyfile"] = storage["alias_keyfile"]

    if "read_more_url" in raw:
        kwargs["read_more_url"] = raw["read_more_url"]

    config = ServiceConfig(**kwargs)

    # Env overrides, then validation by constructing the derived objects.
    if os.environ.get("ECOGAUGE_LISTEN"):
        config = replace(config, listen=os.environ["ECOGAUGE_LISTEN"])
    if os.environ.get("ECOGAUGE_STORAGE_DIR"):
        config = replace(config, storage_dir=os.environ["ECOGAUGE_STORAGE_DIR"])
    try:
        config.resource_model()
        config.penalty_schedule()
        config.popup_config()
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    return config


def load_config(path: Optional[str] = None) -> ServiceConfig:
    if path is None:
        return config_from_dict({})
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    return config_from_dict(raw)
