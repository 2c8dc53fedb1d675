"""Conversation-export audit: count user-authored messages around a trial date.

Parses the downloadable chat archive (``conversations.json``), tolerantly
skipping malformed nodes, and counts user messages in two windows around the
extension-install date: the 7 days before it (left-closed, right-open) and
the 7 days from it (closed on both ends).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from typing import Iterator

from .footprint import (
    ResourceModel,
    energy_kwh_text,
    to_human_energy,
    to_human_water,
    water_liters_text,
)


class ExportParseError(ValueError):
    """The document is not valid JSON; carries the byte offset of the failure."""

    def __init__(self, message: str, offset: int) -> None:
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class ExportSchemaError(ValueError):
    """The document parsed but is not a top-level array of conversations."""


@dataclass(frozen=True)
class ConversationExport:
    conversations: tuple[dict, ...]


@dataclass(frozen=True)
class AnalysisWindow:
    """Pre-trial is [download - 7d, download); trial is [download, download + 7d]."""

    download_date: datetime

    def __post_init__(self) -> None:
        if self.download_date.tzinfo is None:
            raise ValueError("download_date must be timezone-aware")
        object.__setattr__(self, "download_date", self.download_date.astimezone(timezone.utc))

    @classmethod
    def from_date_string(cls, text: str) -> "AnalysisWindow":
        """Anchor a calendar date at 00:00:00 UTC."""
        year, month, day = (int(part) for part in text.split("-"))
        return cls(datetime(year, month, day, tzinfo=timezone.utc))

    @property
    def pre_start(self) -> datetime:
        return self.download_date - timedelta(days=7)

    @property
    def trial_end(self) -> datetime:
        return self.download_date + timedelta(days=7)

    def in_pre_window(self, instant: datetime) -> bool:
        return self.pre_start <= instant < self.download_date

    def in_trial_window(self, instant: datetime) -> bool:
        return self.download_date <= instant <= self.trial_end


@dataclass(frozen=True)
class UsageReport:
    queries_in_trial: int
    queries_before_trial: int


def parse_export(document: str) -> ConversationExport:
    """Parse the raw conversations.json text. Only the top-level shape is enforced."""
    try:
        data = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ExportParseError(exc.msg, exc.pos) from exc
    if not isinstance(data, list):
        raise ExportSchemaError(
            f"conversation export must be a top-level array, got {type(data).__name__}"
        )
    return ConversationExport(conversations=tuple(c for c in data if isinstance(c, dict)))


def iter_user_message_times(export: ConversationExport) -> Iterator[datetime]:
    """Yield the UTC send time of every user-authored message.

    Nodes without a message, an author, or a create_time are skipped, matching
    the tolerant shape of real exports. Duplicate message ids across
    conversations are yielded independently.
    """
    for conversation in export.conversations:
        mapping = conversation.get("mapping", {})
        if not isinstance(mapping, dict):
            continue
        for details in mapping.values():
            if not isinstance(details, dict):
                continue
            message = details.get("message")
            if not message or not isinstance(message, dict):
                continue
            author = message.get("author", {})
            if not isinstance(author, dict) or author.get("role") != "user":
                continue
            create_time = message.get("create_time")
            if not isinstance(create_time, (int, float)):
                continue
            yield datetime.fromtimestamp(create_time, tz=timezone.utc)


def count_windows(export: ConversationExport, window: AnalysisWindow) -> UsageReport:
    in_trial = 0
    before = 0
    for instant in iter_user_message_times(export):
        if window.in_pre_window(instant):
            before += 1
        elif window.in_trial_window(instant):
            in_trial += 1
    return UsageReport(queries_in_trial=in_trial, queries_before_trial=before)


def footprint_report(report: UsageReport, model: ResourceModel) -> dict:
    """Join the window counts with per-query constants and human-scale strings."""

    def window_summary(count: int) -> dict:
        energy = model.energy_per_query * count
        water = model.water_per_query * count
        return {
            "queries": count,
            "energy_wh": str(energy),
            "energy_kwh": energy_kwh_text(energy),
            "water_ml": str(water),
            "water_liters": water_liters_text(water),
            "human_energy": to_human_energy(energy, model).as_dict(),
            "human_water": to_human_water(water, model).as_dict(),
        }

    return {
        "trial": window_summary(report.queries_in_trial),
        "pre_trial": window_summary(report.queries_before_trial),
    }


def report_lines(report: UsageReport) -> list[str]:
    """The two human-readable summary lines, verbatim."""
    return [
        f"Number of queries within study period: {report.queries_in_trial}",
        f"Number of queries before study period: {report.queries_before_trial}",
    ]
