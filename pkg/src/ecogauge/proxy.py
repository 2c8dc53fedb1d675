"""Embedded reverse proxy: forwards traffic unmodified and reports transactions.

One HttpTransactionRecord is emitted per completed request/response pair.
Bodies are relayed chunk-by-chunk and never parsed or retained; if the
upstream connection fails mid-response no record is emitted (final status
unknown).
"""

from __future__ import annotations

import http.client
import logging
import threading
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, Optional
from urllib.parse import urlsplit

from .ingest import HttpTransactionRecord

log = logging.getLogger(__name__)

_HOP_BY_HOP = {
    "connection", "keep-alive", "proxy-authenticate", "proxy-authorization",
    "te", "trailers", "transfer-encoding", "upgrade",
}

_CHUNK = 8192


class _LimitedReader:
    """File-like view over exactly n bytes of an underlying stream."""

    def __init__(self, raw, length: int) -> None:
        self._raw = raw
        self._remaining = length

    def read(self, size: int = -1) -> bytes:
        if self._remaining <= 0:
            return b""
        if size < 0 or size > self._remaining:
            size = self._remaining
        data = self._raw.read(size)
        self._remaining -= len(data)
        return data


class ObservingProxy:
    """Forwarding proxy in front of one upstream origin."""

    def __init__(
        self,
        listen_host: str,
        listen_port: int,
        upstream: str,
        on_record: Callable[[HttpTransactionRecord], None],
        user_header: str = "X-User-Id",
        default_user: str = "anonymous",
    ) -> None:
        parts = urlsplit(upstream)
        if parts.scheme not in ("http", "https") or not parts.hostname:
            raise ValueError(f"upstream must be an http(s) URL, got {upstream!r}")
        self.upstream = upstream.rstrip("/")
        self._scheme = parts.scheme
        self._host = parts.hostname
        self._port = parts.port or (443 if parts.scheme == "https" else 80)
        self.on_record = on_record
        self.user_header = user_header
        self.default_user = default_user

        proxy = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, fmt, *args):  # noqa: N802
                log.debug("proxy: " + fmt, *args)

            def _do_any(self):  # noqa: N802
                proxy._relay(self)

            do_GET = do_POST = do_PUT = do_DELETE = do_PATCH = do_HEAD = do_OPTIONS = _do_any

        self._server = ThreadingHTTPServer((listen_host, listen_port), Handler)
        self._thread: Optional[threading.Thread] = None

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    def start(self) -> None:
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    # -- forwarding ----------------------------------------------------------

    def _connect(self) -> http.client.HTTPConnection:
        if self._scheme == "https":
            return http.client.HTTPSConnection(self._host, self._port, timeout=60)
        return http.client.HTTPConnection(self._host, self._port, timeout=60)

    def _relay(self, handler: BaseHTTPRequestHandler) -> None:
        user_id = handler.headers.get(self.user_header) or self.default_user

        if handler.headers.get("Transfer-Encoding", "").lower() == "chunked":
            handler.send_error(411, "Length Required")
            return

        length = int(handler.headers.get("Content-Length", 0) or 0)
        body = _LimitedReader(handler.rfile, length) if length > 0 else None

        headers = {}
        for name, value in handler.headers.items():
            if name.lower() in _HOP_BY_HOP or name.lower() == self.user_header.lower():
                continue
            if name.lower() == "host":
                continue
            headers[name] = value
        headers["Host"] = f"{self._host}:{self._port}"
        headers["Connection"] = "close"

        conn = self._connect()
        try:
            conn.request(handler.command, handler.path, body=body, headers=headers)
            response = conn.getresponse()
        except OSError as exc:
            log.warning("upstream unreachable: %s", exc)
            conn.close()
            try:
                handler.send_error(502, "Bad Gateway")
            except OSError:
                pass
            return

        status = response.status
        try:
            handler.send_response(status)
            content_length = response.getheader("Content-Length")
            for name, value in response.getheaders():
                if name.lower() in _HOP_BY_HOP or name.lower() == "content-length":
                    continue
                handler.send_header(name, value)
            if content_length is not None:
                handler.send_header("Content-Length", content_length)
            else:
                handler.close_connection = True
            handler.end_headers()
            while True:
                chunk = response.read(_CHUNK)
                if not chunk:
                    break
                handler.wfile.write(chunk)
            handler.wfile.flush()
        except (OSError, http.client.HTTPException) as exc:
            # Mid-response failure: the response never completed, so no record.
            log.warning("relay aborted mid-response: %s", exc)
            handler.close_connection = True
            return
        finally:
            conn.close()

        self.on_record(HttpTransactionRecord(
            user_id=user_id,
            method=handler.command,
            url=self.upstream + handler.path,
            status=status,
            observed_at=datetime.now(timezone.utc),
        ))
