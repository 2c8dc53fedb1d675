"""Append-only de-identified event log with CSV/JSONL export and dwell report.

Canonical storage is JSONL, one record per line, flushed and fsynced on
every append so a crashed process never loses acknowledged events. Records
carry exactly three fields: user_id, timestamp, event_type.
"""

from __future__ import annotations

import csv
import io
import json
import os
import secrets
import threading
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Optional

EVENT_TYPES = ("query", "popup_opening", "popup_closed", "readmore_clicked")

CSV_HEADER = ["user_id", "timestamp", "event_type"]

DWELL_BOUNDARY = timedelta(minutes=10)


def iso_ms(instant: datetime) -> str:
    """ISO-8601 UTC with milliseconds, the wire/log timestamp format."""
    if instant.tzinfo is None:
        raise ValueError("timestamps must be timezone-aware")
    return instant.astimezone(timezone.utc).isoformat(timespec="milliseconds")


def parse_iso(text: str) -> datetime:
    return datetime.fromisoformat(text).astimezone(timezone.utc)


@dataclass(frozen=True)
class LogRecord:
    user_id: str
    timestamp: datetime
    event_type: str

    def __post_init__(self) -> None:
        if self.event_type not in EVENT_TYPES:
            raise ValueError(f"event_type must be one of {EVENT_TYPES}, got {self.event_type!r}")
        if self.timestamp.tzinfo is None:
            raise ValueError("log timestamps must be timezone-aware")
        object.__setattr__(self, "timestamp", self.timestamp.astimezone(timezone.utc))

    def as_dict(self) -> dict:
        return {
            "user_id": self.user_id,
            "timestamp": iso_ms(self.timestamp),
            "event_type": self.event_type,
        }

    @classmethod
    def from_dict(cls, row: dict) -> "LogRecord":
        return cls(
            user_id=row["user_id"],
            timestamp=parse_iso(row["timestamp"]),
            event_type=row["event_type"],
        )


class EventLog:
    """Single-writer append-only sink. ``path=None`` keeps records in memory."""

    def __init__(self, path: Optional[Path] = None) -> None:
        self.path = Path(path) if path is not None else None
        self._lock = threading.Lock()
        self._memory: list[LogRecord] = []
        self.last_error: Optional[str] = None
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)

    def append(self, record: LogRecord) -> None:
        """Durably append one record; raises if the sink is unwritable."""
        line = json.dumps(record.as_dict(), separators=(",", ":"))
        with self._lock:
            if self.path is None:
                self._memory.append(record)
                return
            try:
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(line + "\n")
                    fh.flush()
                    os.fsync(fh.fileno())
                self.last_error = None
            except OSError as exc:
                self.last_error = str(exc)
                raise

    def records(self) -> list[LogRecord]:
        with self._lock:
            if self.path is None:
                return list(self._memory)
            if not self.path.exists():
                return []
            out = []
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        out.append(LogRecord.from_dict(json.loads(line)))
            return out

    def record_count(self) -> int:
        return len(self.records())

    def export(self, start: Optional[datetime] = None, end: Optional[datetime] = None,
               fmt: str = "csv") -> str:
        """Rows filtered to [start, end], stable (file) order. CSV keeps its header
        even when the window is empty."""
        rows = [
            r for r in self.records()
            if (start is None or r.timestamp >= start) and (end is None or r.timestamp <= end)
        ]
        if fmt == "csv":
            buf = io.StringIO()
            writer = csv.writer(buf, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for r in rows:
                writer.writerow([r.user_id, iso_ms(r.timestamp), r.event_type])
            return buf.getvalue()
        if fmt == "jsonl":
            return "".join(json.dumps(r.as_dict(), separators=(",", ":")) + "\n" for r in rows)
        raise ValueError(f"unknown export format {fmt!r}")


def import_records(document: str, fmt: str = "jsonl") -> list[LogRecord]:
    """Inverse of export, for round-trip verification."""
    if fmt == "jsonl":
        return [LogRecord.from_dict(json.loads(line)) for line in document.splitlines() if line.strip()]
    if fmt == "csv":
        reader = csv.DictReader(io.StringIO(document))
        return [LogRecord.from_dict(row) for row in reader]
    raise ValueError(f"unknown import format {fmt!r}")


@dataclass(frozen=True)
class PopupEpisode:
    """Lifecycle of one popup: how long it stayed open and when the user queried next."""

    user_id: str
    opened_at: datetime
    dwell: Optional[timedelta]            # None: never closed
    next_query_delay: Optional[timedelta]  # None: no later query

    @property
    def complete(self) -> bool:
        return self.dwell is not None

    @property
    def delay_bucket(self) -> str:
        if self.next_query_delay is None:
            return "no_followup"
        return "under_10_min" if self.next_query_delay < DWELL_BOUNDARY else "over_10_min"


def popup_dwell_report(records: Iterable[LogRecord]) -> list[PopupEpisode]:
    """Pair popup openings with their close and next query, per user, in order."""
    by_user: dict[str, list[LogRecord]] = {}
    for record in records:
        by_user.setdefault(record.user_id, []).append(record)
    episodes: list[PopupEpisode] = []
    for user_id, rows in by_user.items():
        for i, row in enumerate(rows):
            if row.event_type != "popup_opening":
                continue
            dwell = None
            delay = None
            superseded = False  # a newer opening claims subsequent closes
            for later in rows[i + 1:]:
                if later.event_type == "popup_opening":
                    superseded = True
                elif later.event_type == "popup_closed" and dwell is None and not superseded:
                    dwell = later.timestamp - row.timestamp
                elif later.event_type == "query" and delay is None:
                    delay = later.timestamp - row.timestamp
                if (dwell is not None or superseded) and delay is not None:
                    break
            episodes.append(PopupEpisode(user_id, row.timestamp, dwell, delay))
    episodes.sort(key=lambda e: e.opened_at)
    return episodes


class AliasRegistry:
    """Maps external identities to random pseudonymous aliases.

    The mapping lives only in the optional keyfile; log files see aliases
    exclusively. Without a keyfile the mapping is in-memory only.
    """

    def __init__(self, keyfile: Optional[Path] = None) -> None:
        self.keyfile = Path(keyfile) if keyfile is not None else None
        self._mapping: dict[str, str] = {}
        self._lock = threading.Lock()
        if self.keyfile is not None and self.keyfile.exists():
            self._mapping = json.loads(self.keyfile.read_text(encoding="utf-8"))

    def alias_for(self, external_id: str) -> str:
        with self._lock:
            alias = self._mapping.get(external_id)
            if alias is None:
                taken = set(self._mapping.values())
                while True:
                    alias = f"user_{secrets.token_hex(4)}"
                    if alias not in taken:
                        break
                self._mapping[external_id] = alias
                if self.keyfile is not None:
                    self.keyfile.parent.mkdir(parents=True, exist_ok=True)
                    self.keyfile.write_text(json.dumps(self._mapping, indent=2), encoding="utf-8")
            return alias
