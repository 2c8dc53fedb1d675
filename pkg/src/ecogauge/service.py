"""Composition root: per-user event pipeline, persistence, and state reads.

State is event-sourced: every accepted event is durably appended to the
JSONL log before anything else observes it, and a restart rebuilds ledgers,
scores, and popup counters by replaying that log (optionally fast-forwarded
from a periodic snapshot). Replaying the same log always yields the same
state, bit for bit.
"""

from __future__ import annotations

import json
import logging
import queue
import threading
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from decimal import Decimal
from pathlib import Path
from typing import Iterable, Optional

from . import eventlog, footprint, ingest, popup, score
from .config import ServiceConfig
from .eventlog import EventLog, LogRecord, iso_ms, parse_iso

log = logging.getLogger(__name__)

UI_EVENT_KINDS = ("popup_closed", "readmore_clicked")


@dataclass
class UserState:
    ledger: footprint.UsageLedger
    score_state: score.EcoScoreState
    popup_state: popup.PopupPolicyState = field(default_factory=popup.PopupPolicyState)
    popup_payload: Optional[popup.PopupPayload] = None


class Service:
    """Single-process gateway. All mutation for one user is serialized."""

    def __init__(self, config: ServiceConfig, persist: bool = True) -> None:
        self.config = config
        self.model = config.resource_model()
        self.schedule = config.penalty_schedule()
        self.popup_config = config.popup_config()
        self.query_filter = config.query_filter()
        self.persist = persist

        self._users: dict[str, UserState] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()
        self._subscribers: dict[str, list[queue.Queue]] = {}
        self._idempotency = ingest.IdempotencyCache(config.idempotency_window())
        self._log_lines = 0
        self._snapshot_line = 0

        if persist:
            storage = config.storage_path()
            storage.mkdir(parents=True, exist_ok=True)
            self.event_log = EventLog(storage / "events.jsonl")
            self._snapshot_path: Optional[Path] = storage / "snapshot.json"
            keyfile = Path(config.alias_keyfile) if config.alias_keyfile else storage / "aliases.json"
            self._aliases = eventlog.AliasRegistry(keyfile) if config.alias_external_ids else None
            self._rebuild()
        else:
            self.event_log = EventLog(None)
            self._snapshot_path = None
            self._aliases = None

    # -- identity / locking -------------------------------------------------

    def _resolve_user(self, user_id: str) -> str:
        if self._aliases is not None:
            return self._aliases.alias_for(user_id)
        return user_id

    def _lock_for(self, user_id: str) -> threading.Lock:
        with self._registry_lock:
            if user_id not in self._locks:
                self._locks[user_id] = threading.Lock()
            return self._locks[user_id]

    def _state_for(self, user_id: str) -> UserState:
        with self._registry_lock:
            state = self._users.get(user_id)
            if state is None:
                state = UserState(
                    ledger=footprint.UsageLedger(user_id=user_id),
                    score_state=score.EcoScoreState(score=self.config.initial_score),
                )
                self._users[user_id] = state
            return state

    def register_user(self, user_id: str, at: datetime) -> None:
        """Anchor a (new) user's regeneration clock at ``at``.

        Mirrors the moment the side panel first appears: the score exists and
        starts earning idle credit before the first query. In-memory only; a
        user first seen through a query is anchored at that query instead.
        """
        with self._lock_for(user_id):
            state = self._state_for(user_id)
            if state.score_state.last_accrual_at is None:
                state.score_state = score.accrue(state.score_state, at, self.schedule)

    # -- ingestion ----------------------------------------------------------

    def handle_transaction(self, tx: ingest.HttpTransactionRecord,
                           source: ingest.EventSource = ingest.EventSource.WEBHOOK) -> dict:
        """Classify a transaction report and, on match, run the query pipeline once."""
        user_id = self._resolve_user(tx.user_id)
        if self._idempotency.seen_before(user_id, tx.idempotency_key, tx.observed_at):
            return {"accepted": True, "query": False, "duplicate": True}
        event = ingest.classify(tx, self.query_filter, source=source)
        if event is None:
            return {"accepted": True, "query": False, "duplicate": False}
        try:
            self._dispatch_query(user_id, event.occurred_at)
        except score.ClockSkewError as exc:
            log.warning("dropped query event for %s: %s", user_id, exc)
            return {"accepted": False, "query": False, "duplicate": False,
                    "error": "clock_skew"}
        return {"accepted": True, "query": True, "duplicate": False}

    def _dispatch_query(self, user_id: str, at: datetime, replaying: bool = False) -> bool:
        """Apply one query event: score, ledger, popup, log. Returns popup-fired."""
        with self._lock_for(user_id):
            state = self._state_for(user_id)
            new_score = score.on_query(state.score_state, self.schedule, at)
            new_ledger = footprint.record_query(state.ledger, self.model, at)
            new_popup, payload = popup.on_query(
                state.popup_state, self.popup_config, new_ledger, self.model,
                self.config.read_more_url, at,
            )
            if not replaying:
                self._append(LogRecord(user_id, at, "query"))
                if payload is not None:
                    self._append(LogRecord(user_id, at, "popup_opening"))
            state.score_state = new_score
            state.ledger = new_ledger
            state.popup_state = new_popup
            if payload is not None:
                state.popup_payload = payload
            if not replaying:
                self._maybe_snapshot()
            self._publish(user_id, at)
            return payload is not None

    def post_ui_event(self, user_id: str, kind: str, at: datetime,
                      replaying: bool = False) -> dict:
        """Route a UI event: popup_closed dismisses (if open) and logs; readmore logs."""
        if kind not in UI_EVENT_KINDS:
            raise ValueError(f"unknown ui event kind {kind!r}; expected one of {UI_EVENT_KINDS}")
        user_id = user_id if replaying else self._resolve_user(user_id)
        with self._lock_for(user_id):
            state = self._state_for(user_id)
            if kind == "popup_closed":
                if not state.popup_state.popup_open:
                    log.debug("popup_closed for %s ignored: no popup open", user_id)
                    return {"accepted": True, "applied": False}
                state.popup_state = popup.on_dismiss(state.popup_state, at)
                state.popup_payload = None
            if not replaying:
                self._append(LogRecord(user_id, at, kind))
                self._maybe_snapshot()
            self._publish(user_id, at)
            return {"accepted": True, "applied": True}

    # -- persistence --------------------------------------------------------

    def _append(self, record: LogRecord) -> None:
        self.event_log.append(record)
        self._log_lines += 1

    def _maybe_snapshot(self) -> None:
        """Snapshot after the triggering event's state is fully applied."""
        if (
            self._snapshot_path is not None
            and self.config.snapshot_interval > 0
            and self._log_lines - self._snapshot_line >= self.config.snapshot_interval
        ):
            self.write_snapshot()

    def _apply_record(self, record: LogRecord) -> None:
        if record.event_type == "query":
            self._dispatch_query(record.user_id, record.timestamp, replaying=True)
        elif record.event_type == "popup_closed":
            self.post_ui_event(record.user_id, "popup_closed", record.timestamp, replaying=True)
        # popup_opening rows are derived from queries; readmore rows carry no state

    def _rebuild(self) -> None:
        position = 0
        if self._snapshot_path is not None and self._snapshot_path.exists():
            position = self._load_snapshot(self._snapshot_path)
        records = self.event_log.records()
        self._log_lines = len(records)
        for record in records[position:]:
            self._apply_record(record)

    def write_snapshot(self) -> None:
        if self._snapshot_path is None:
            return
        doc = {
            "log_position": self._log_lines,
            "users": {uid: _serialize_user(state) for uid, state in self._users.items()},
        }
        tmp = self._snapshot_path.with_suffix(".tmp")
        tmp.write_text(json.dumps(doc, indent=2), encoding="utf-8")
        tmp.replace(self._snapshot_path)
        self._snapshot_line = self._log_lines

    def _load_snapshot(self, path: Path) -> int:
        doc = json.loads(path.read_text(encoding="utf-8"))
        for uid, raw in doc["users"].items():
            self._users[uid] = _deserialize_user(uid, raw)
        self._snapshot_line = int(doc["log_position"])
        return self._snapshot_line

    # -- reads --------------------------------------------------------------

    def get_state(self, user_id: str, now: Optional[datetime] = None) -> dict:
        """Atomic display snapshot with regeneration accrued up to ``now``.

        Read-only: unknown users get a pristine bundle without being created.
        """
        now = now or datetime.now(timezone.utc)
        user_id = self._resolve_user(user_id)
        with self._lock_for(user_id):
            state = self._users.get(user_id)
            if state is None:
                state = UserState(
                    ledger=footprint.UsageLedger(user_id=user_id),
                    score_state=score.EcoScoreState(score=self.config.initial_score),
                )
            return self._bundle(user_id, state, now)

    def _bundle(self, user_id: str, state: UserState, now: datetime) -> dict:
        score_view = score.accrue(state.score_state, now, self.schedule)
        payload = state.popup_payload if state.popup_state.popup_open else None
        return {
            "user_id": user_id,
            "eco_score": score_view.score,
            "image_bracket": score.image_bracket(score_view.score),
            "energy": footprint.to_human_energy(state.ledger.energy_total, self.model).as_dict(),
            "water": footprint.to_human_water(state.ledger.water_total, self.model).as_dict(),
            "energy_kwh_text": footprint.energy_kwh_text(state.ledger.energy_total),
            "water_liters_text": footprint.water_liters_text(state.ledger.water_total),
            "query_count": state.ledger.query_count,
            "popup": payload.as_dict() if payload else None,
            "read_more_url": self.config.read_more_url,
            "generated_at": iso_ms(now),
        }

    def health(self) -> dict:
        return {
            "status": "degraded" if self.event_log.last_error else "ok",
            "log_writable": self.event_log.last_error is None,
            "log_error": self.event_log.last_error,
            "events_logged": self._log_lines,
        }

    def public_config(self) -> dict:
        return {
            "resource_profile": self.config.resource_profile,
            "popup_limit": self.popup_config.limit,
            "popup_mode": self.popup_config.mode,
            "url_pattern": self.query_filter.url_pattern,
            "ignore_substrings": list(self.query_filter.ignore_substrings),
            "read_more_url": self.config.read_more_url,
        }

    # -- update stream ------------------------------------------------------

    def subscribe(self, user_id: str) -> queue.Queue:
        user_id = self._resolve_user(user_id)
        q: queue.Queue = queue.Queue()
        with self._registry_lock:
            self._subscribers.setdefault(user_id, []).append(q)
        return q

    def unsubscribe(self, user_id: str, q: queue.Queue) -> None:
        user_id = self._resolve_user(user_id)
        with self._registry_lock:
            subs = self._subscribers.get(user_id, [])
            if q in subs:
                subs.remove(q)

    def _publish(self, user_id: str, now: datetime) -> None:
        with self._registry_lock:
            subs = list(self._subscribers.get(user_id, ()))
        if not subs:
            return
        bundle = self._bundle(user_id, self._users[user_id], now)
        for q in subs:
            q.put(bundle)


# -- snapshot (de)serialization ----------------------------------------------


def _iso_or_none(instant: Optional[datetime]) -> Optional[str]:
    return iso_ms(instant) if instant is not None else None


def _parse_or_none(text: Optional[str]) -> Optional[datetime]:
    return parse_iso(text) if text is not None else None


def _serialize_user(state: UserState) -> dict:
    return {
        "ledger": {
            "query_count": state.ledger.query_count,
            "energy_total": str(state.ledger.energy_total),
            "water_total": str(state.ledger.water_total),
            "first_query_at": _iso_or_none(state.ledger.first_query_at),
            "last_query_at": _iso_or_none(state.ledger.last_query_at),
        },
        "score": {
            "score": state.score_state.score,
            "last_query_at": _iso_or_none(state.score_state.last_query_at),
            "last_accrual_at": _iso_or_none(state.score_state.last_accrual_at),
            "regen_remainder_us": int(state.score_state.regen_remainder / timedelta(microseconds=1)),
        },
        "popup": {
            "queries_since_last_popup": state.popup_state.queries_since_last_popup,
            "popup_open": state.popup_state.popup_open,
            "popups_fired": state.popup_state.popups_fired,
            "last_popup_opened_at": _iso_or_none(state.popup_state.last_popup_opened_at),
            "last_popup_closed_at": _iso_or_none(state.popup_state.last_popup_closed_at),
        },
        "popup_payload": state.popup_payload.as_dict() if state.popup_payload else None,
    }


def _deserialize_user(user_id: str, raw: dict) -> UserState:
    ledger_raw = raw["ledger"]
    ledger = footprint.UsageLedger(
        user_id=user_id,
        query_count=int(ledger_raw["query_count"]),
        energy_total=Decimal(ledger_raw["energy_total"]),
        water_total=Decimal(ledger_raw["water_total"]),
        first_query_at=_parse_or_none(ledger_raw["first_query_at"]),
        last_query_at=_parse_or_none(ledger_raw["last_query_at"]),
    )
    score_raw = raw["score"]
    score_state = score.EcoScoreState(
        score=int(score_raw["score"]),
        last_query_at=_parse_or_none(score_raw["last_query_at"]),
        last_accrual_at=_parse_or_none(score_raw["last_accrual_at"]),
        regen_remainder=timedelta(microseconds=score_raw["regen_remainder_us"]),
    )
    popup_raw = raw["popup"]
    popup_state = popup.PopupPolicyState(
        queries_since_last_popup=int(popup_raw["queries_since_last_popup"]),
        popup_open=bool(popup_raw["popup_open"]),
        popups_fired=int(popup_raw["popups_fired"]),
        last_popup_opened_at=_parse_or_none(popup_raw["last_popup_opened_at"]),
        last_popup_closed_at=_parse_or_none(popup_raw["last_popup_closed_at"]),
    )
    state = UserState(ledger=ledger, score_state=score_state, popup_state=popup_state)
    payload_raw = raw.get("popup_payload")
    if payload_raw is not None:
        state.popup_payload = popup.PopupPayload(
            energy_kwh=payload_raw["energy_kwh"],
            water_liters=payload_raw["water_liters"],
            human_energy=footprint.HumanScaleReading.from_dict(payload_raw["human_energy"]),
            human_water=footprint.HumanScaleReading.from_dict(payload_raw["human_water"]),
            read_more_url=payload_raw["read_more_url"],
        )
    return state


# -- trace replay -------------------------------------------------------------


class TraceError(ValueError):
    pass


def load_trace(path: Path) -> list[dict]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [json.loads(line) for line in lines if line.strip()]


def replay_trace(entries: Iterable[dict], config: ServiceConfig) -> dict:
    """Deterministically replay a per-user-sorted trace of timestamped events.

    Each entry is ``{"user_id", "occurred_at", "kind"?}`` with kind defaulting
    to "query". Returns the full trajectory plus final display bundles.
    """
    service = Service(config, persist=False)
    parsed: list[tuple[str, datetime, str]] = []
    last_seen: dict[str, datetime] = {}
    for index, entry in enumerate(entries):
        try:
            user_id = entry["user_id"]
            occurred_at = parse_iso(entry["occurred_at"])
        except (KeyError, ValueError) as exc:
            raise TraceError(f"trace entry {index} invalid: {exc}") from exc
        kind = entry.get("kind", "query")
        if kind not in ("query", "install") and kind not in UI_EVENT_KINDS:
            raise TraceError(f"trace entry {index} has unknown kind {kind!r}")
        previous = last_seen.get(user_id)
        if previous is not None and occurred_at < previous:
            raise TraceError(
                f"trace not sorted for user {user_id!r} at entry {index}"
            )
        last_seen[user_id] = occurred_at
        parsed.append((user_id, occurred_at, kind))

    events = []
    for index, (user_id, occurred_at, kind) in enumerate(parsed):
        fired = False
        if kind == "query":
            fired = service._dispatch_query(user_id, occurred_at, replaying=True)
        elif kind == "install":
            service.register_user(user_id, occurred_at)
        else:
            service.post_ui_event(user_id, kind, occurred_at, replaying=True)
        state = service._users[user_id]
        events.append({
            "index": index,
            "user_id": user_id,
            "occurred_at": iso_ms(occurred_at),
            "kind": kind,
            "eco_score": state.score_state.score,
            "query_count": state.ledger.query_count,
            "popup_fired": fired,
        })

    final = {
        user_id: service._bundle(user_id, state, last_seen[user_id])
        for user_id, state in service._users.items()
    }
    return {"events": events, "final": final}
