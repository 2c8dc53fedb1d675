"""Query detection: classify HTTP transactions into billable query events.

A transaction counts as a query iff it is a POST, returned 200, its URL path
sits under the configured API pattern, and the URL text contains neither of
the configured ignore substrings (case-sensitive). Bodies are never part of
the record, so classification is structurally incapable of reading content.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from enum import Enum
from typing import Optional
from urllib.parse import urlsplit

log = logging.getLogger(__name__)

DEFAULT_URL_PATTERN = "/backend-api/conversation"
DEFAULT_IGNORE_SUBSTRINGS = ("init", "implicit")


class EventSource(str, Enum):
    PROXY = "proxy"
    WEBHOOK = "webhook"
    REPLAY = "replay"


@dataclass(frozen=True)
class HttpTransactionRecord:
    user_id: str
    method: str
    url: str
    status: int
    observed_at: datetime
    idempotency_key: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.user_id:
            raise ValueError("transaction record requires a user_id")
        if self.observed_at.tzinfo is None:
            raise ValueError("observed_at must be timezone-qualified")
        object.__setattr__(self, "observed_at", self.observed_at.astimezone(timezone.utc))


@dataclass(frozen=True)
class QueryEvent:
    user_id: str
    occurred_at: datetime
    source: EventSource


@dataclass(frozen=True)
class QueryFilter:
    """The detection predicate, configurable per LLM frontend."""

    url_pattern: str = DEFAULT_URL_PATTERN
    ignore_substrings: tuple[str, ...] = DEFAULT_IGNORE_SUBSTRINGS
    method: str = "POST"
    status: int = 200


def classify(tx: HttpTransactionRecord, query_filter: QueryFilter = QueryFilter(),
             source: EventSource = EventSource.WEBHOOK) -> Optional[QueryEvent]:
    """Return a QueryEvent iff the transaction passes the detection predicate."""
    if tx.method.upper() != query_filter.method:
        return None
    if tx.status != query_filter.status:
        return None
    try:
        path = urlsplit(tx.url).path
    except ValueError:
        log.debug("unparseable URL treated as non-query: %r", tx.url)
        return None
    if not path.startswith(query_filter.url_pattern):
        return None
    for needle in query_filter.ignore_substrings:
        if needle in tx.url:
            return None
    return QueryEvent(user_id=tx.user_id, occurred_at=tx.observed_at, source=source)


class IdempotencyCache:
    """Remembers webhook idempotency keys so replays within the window dedupe.

    Keys are scoped per user. Thread-safe; expired keys are pruned lazily.
    """

    def __init__(self, window: timedelta = timedelta(hours=24)) -> None:
        if window <= timedelta(0):
            raise ValueError("idempotency window must be positive")
        self._window = window
        self._seen: dict[tuple[str, str], datetime] = {}
        self._lock = threading.Lock()

    def seen_before(self, user_id: str, key: Optional[str], now: datetime) -> bool:
        """Record the key and report whether it was already seen inside the window."""
        if key is None:
            return False
        slot = (user_id, key)
        with self._lock:
            cutoff = now - self._window
            stale = [k for k, t in self._seen.items() if t < cutoff]
            for k in stale:
                del self._seen[k]
            if slot in self._seen:
                return True
            self._seen[slot] = now
            return False

    def snapshot(self) -> dict[tuple[str, str], datetime]:
        with self._lock:
            return dict(self._seen)

    def restore(self, entries: dict[tuple[str, str], datetime]) -> None:
        with self._lock:
            self._seen.update(entries)
