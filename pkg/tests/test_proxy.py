import http.client
import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from ecogauge.config import config_from_dict
from ecogauge.ingest import QueryFilter, classify
from ecogauge.proxy import ObservingProxy
from ecogauge.service import Service


class UpstreamHandler(BaseHTTPRequestHandler):
    """Scriptable origin: behavior keyed off the request path."""

    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):
        pass

    def _respond(self):
        if self.path.startswith("/fail500"):
            body = b"boom"
            self.send_response(500)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)
            return
        if self.path.startswith("/streamed"):
            self.send_response(200)
            self.send_header("Transfer-Encoding", "chunked")
            self.end_headers()
            for piece in (b"alpha", b"beta", b"gamma"):
                self.wfile.write(b"%x\r\n%s\r\n" % (len(piece), piece))
            self.wfile.write(b"0\r\n\r\n")
            return
        length = int(self.headers.get("Content-Length", 0) or 0)
        request_body = self.rfile.read(length) if length else b""
        body = json.dumps({
            "path": self.path,
            "method": self.command,
            "body": request_body.decode(),
            "saw_user_header": "X-User-Id" in self.headers,
        }).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    do_GET = do_POST = do_PUT = do_DELETE = _respond


@pytest.fixture
def upstream():
    server = ThreadingHTTPServer(("127.0.0.1", 0), UpstreamHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server
    server.shutdown()
    server.server_close()


@pytest.fixture
def proxy_pair(upstream):
    records = []
    proxy = ObservingProxy(
        "127.0.0.1", 0, f"http://127.0.0.1:{upstream.server_address[1]}",
        on_record=records.append,
    )
    proxy.start()
    yield proxy, records
    proxy.stop()


def wait_for(records, count, timeout=5.0):
    """The record is emitted on the proxy's handler thread just after the
    client finishes reading, so give it a moment to land."""
    deadline = time.monotonic() + timeout
    while len(records) < count and time.monotonic() < deadline:
        time.sleep(0.01)
    return records


def call(proxy, method="POST", path="/backend-api/conversation", body=b"hi",
         headers=None):
    conn = http.client.HTTPConnection("127.0.0.1", proxy.port, timeout=10)
    try:
        conn.request(method, path, body=body, headers=headers or {"X-User-Id": "u1"})
        response = conn.getresponse()
        return response.status, response.read()
    finally:
        conn.close()


class TestForwarding:
    def test_round_trip_unmodified(self, proxy_pair):
        proxy, _ = proxy_pair
        status, body = call(proxy, body=b'{"prompt":"hello"}')
        assert status == 200
        echoed = json.loads(body)
        assert echoed["path"] == "/backend-api/conversation"
        assert echoed["method"] == "POST"
        assert echoed["body"] == '{"prompt":"hello"}'

    def test_user_header_stripped_before_upstream(self, proxy_pair):
        proxy, _ = proxy_pair
        _, body = call(proxy)
        assert json.loads(body)["saw_user_header"] is False

    def test_streamed_response_relayed(self, proxy_pair):
        proxy, _ = proxy_pair
        status, body = call(proxy, method="GET", path="/streamed", body=None)
        assert status == 200
        assert body == b"alphabetagamma"

    def test_upstream_error_status_passed_through(self, proxy_pair):
        proxy, _ = proxy_pair
        status, body = call(proxy, path="/fail500")
        assert status == 500
        assert body == b"boom"


class TestObservation:
    def test_one_record_per_round_trip(self, proxy_pair):
        proxy, records = proxy_pair
        for i in range(5):
            call(proxy, body=b"x")
        assert len(wait_for(records, 5)) == 5
        record = records[0]
        assert record.user_id == "u1"
        assert record.method == "POST"
        assert record.status == 200
        assert record.url.endswith("/backend-api/conversation")

    def test_scripted_mix_count_oracle(self, proxy_pair):
        proxy, records = proxy_pair
        script = [
            ("POST", "/backend-api/conversation"),      # query
            ("GET", "/backend-api/conversation"),       # wrong method
            ("POST", "/backend-api/conversation/init"), # excluded substring
            ("POST", "/fail500"),                       # wrong status
            ("POST", "/backend-api/conversation"),      # query
            ("POST", "/other/endpoint"),                # wrong path
            ("POST", "/backend-api/conversation"),      # query
        ]
        for method, path in script:
            call(proxy, method=method, path=path)
        wait_for(records, len(script))
        assert len(records) == len(script)  # every completed exchange observed
        fil = QueryFilter()
        queries = [r for r in records if classify(r, fil) is not None]
        assert len(queries) == 3

    def test_records_feed_the_service(self, proxy_pair, tmp_path):
        proxy, records = proxy_pair
        service = Service(config_from_dict({
            "storage": {"dir": str(tmp_path / "data"), "snapshot_interval": 0},
        }))
        for _ in range(3):
            call(proxy)
        call(proxy, path="/backend-api/conversation/init")
        wait_for(records, 4)
        for record in records:
            service.handle_transaction(record)
        assert service.get_state("u1")["query_count"] == 3

    def test_default_user_when_header_missing(self, proxy_pair):
        proxy, records = proxy_pair
        call(proxy, headers={"Content-Type": "text/plain"})
        assert wait_for(records, 1)[0].user_id == "anonymous"

    def test_timestamps_monotone(self, proxy_pair):
        proxy, records = proxy_pair
        call(proxy)
        call(proxy)
        wait_for(records, 2)
        assert records[0].observed_at <= records[1].observed_at


class TestFailureModes:
    def test_unreachable_upstream_502_no_record(self):
        records = []
        # Port 1 on localhost: connection refused immediately.
        proxy = ObservingProxy("127.0.0.1", 0, "http://127.0.0.1:1",
                               on_record=records.append)
        proxy.start()
        try:
            status, _ = call(proxy)
            assert status == 502
            assert records == []
        finally:
            proxy.stop()

    def test_chunked_request_rejected(self, proxy_pair):
        proxy, records = proxy_pair
        conn = http.client.HTTPConnection("127.0.0.1", proxy.port, timeout=10)
        try:
            conn.putrequest("POST", "/backend-api/conversation")
            conn.putheader("Transfer-Encoding", "chunked")
            conn.endheaders()
            conn.send(b"0\r\n\r\n")
            assert conn.getresponse().status == 411
        finally:
            conn.close()
        assert records == []
