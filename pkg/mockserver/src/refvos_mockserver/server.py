"""HTTP server answering the four backend endpoints from fixture files.

Speaks the wire protocol documented in the primary package (POST /asr,
/judge, /segment, /refine) and answers from the same fixture documents
the scripted transport consumes, with the same matching rules, so a
pipeline config can switch between in-process and loopback transports
without any behavioral change.

The server is stateless: the fixture store is read-only after startup
and every request is matched independently, so identical requests get
identical responses and concurrent requests need no locking.  Unknown
fixture keys get a 404, malformed bodies a 400, both with the
structured error body from docs/protocol.md.  An optional fixed
per-request delay simulates backend latency; nothing else about timing
is modeled.
"""

import argparse
import json
import logging
import sys
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import jsonschema

from refvos import protocol
from refvos.errors import ProtocolError

__all__ = ["FixtureError", "FixtureStore", "MockBackendServer", "serve", "main"]

log = logging.getLogger("refvos_mockserver")


class FixtureError(ValueError):
    """The fixture document cannot back a protocol-conformant server."""


class FixtureStore:
    """Read-only request-to-response map validated at load time.

    Every response is checked against the protocol response schema up
    front, so a running server can never emit a document the primary
    clients would reject.  Entry request keys are partial by design
    (optional fields constrain only when present) and are validated
    structurally, not against the full request schema.
    """

    def __init__(self, doc: dict):
        if not isinstance(doc, dict):
            raise FixtureError("fixture root: expected object")
        unknown = sorted(set(doc) - set(protocol.ENDPOINT_KINDS))
        if unknown:
            raise FixtureError(f"fixture document has unknown endpoint keys: {unknown}")
        for kind in protocol.ENDPOINT_KINDS:
            entries = doc.get(kind, [])
            if not isinstance(entries, list):
                raise FixtureError(f"fixtures/{kind}: expected a list of entries")
            for i, entry in enumerate(entries):
                where = f"fixtures/{kind}/{i}"
                if not isinstance(entry, dict) or not isinstance(entry.get("request"), dict):
                    raise FixtureError(f"{where}: entry needs a request object")
                if "response" not in entry:
                    raise FixtureError(f"{where}: entry needs a response")
                try:
                    jsonschema.validate(entry["response"], protocol.RESPONSE_SCHEMAS[kind])
                except jsonschema.ValidationError as exc:
                    raise FixtureError(f"{where}: response violates schema: {exc.message}")
        self._doc = doc

    @classmethod
    def from_path(cls, path) -> "FixtureStore":
        path = Path(path)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise FixtureError(f"cannot read fixtures {path}: {exc}")
        except json.JSONDecodeError as exc:
            raise FixtureError(f"fixtures {path} are not valid JSON: {exc}")
        return cls(doc)

    def lookup(self, kind: str, payload: dict):
        return protocol.find_fixture_response(self._doc, kind, payload)


def _json_bytes(doc: dict) -> bytes:
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    # the ThreadingHTTPServer instance carries store and delay
    def _reply(self, status: int, doc: dict):
        body = _json_bytes(doc)
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _error(self, status: int, code: str, message: str):
        self._reply(status, {"error": {"code": code, "message": message}})

    def do_POST(self):
        if self.server.delay > 0:
            time.sleep(self.server.delay)
        try:
            kind = protocol.kind_for_path(self.path)
        except ProtocolError:
            self._error(404, "unknown_endpoint", f"no endpoint at {self.path}")
            return

        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length)
        try:
            payload = json.loads(raw)
        except json.JSONDecodeError as exc:
            self._error(400, "malformed_json", f"request body is not JSON: {exc}")
            return
        try:
            jsonschema.validate(payload, protocol.REQUEST_SCHEMAS[kind])
        except jsonschema.ValidationError as exc:
            self._error(400, "invalid_request", f"{kind} request: {exc.message}")
            return

        response = self.server.store.lookup(kind, payload)
        if response is None:
            key = protocol.canonical_request(kind, payload)
            self._error(404, "unknown_request", f"no fixture entry for {kind} request {key}")
            return
        self._reply(200, response)

    def do_GET(self):
        self._error(405, "method_not_allowed", "endpoints accept POST only")

    def log_message(self, fmt, *args):  # route http.server chatter to logging
        log.debug("%s %s", self.address_string(), fmt % args)


class MockBackendServer:
    """Running server handle: address, lifecycle, context management."""

    def __init__(self, store: FixtureStore, host: str = "127.0.0.1", port: int = 0,
                 delay: float = 0.0):
        self._httpd = ThreadingHTTPServer((host, port), _Handler)
        self._httpd.daemon_threads = True
        self._httpd.store = store
        self._httpd.delay = delay
        self._thread = None

    @property
    def host(self) -> str:
        return self._httpd.server_address[0]

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    @property
    def base_url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def start(self) -> "MockBackendServer":
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        log.info("serving on %s", self.base_url)
        return self

    def serve_forever(self):
        self._httpd.serve_forever()

    def stop(self):
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None

    def __enter__(self) -> "MockBackendServer":
        return self.start()

    def __exit__(self, *exc_info):
        self.stop()


def serve(fixtures, port: int = 0, *, host: str = "127.0.0.1",
          delay: float = 0.0) -> MockBackendServer:
    """Start a background server for the given fixtures.

    ``fixtures`` may be a path, a parsed document, or a FixtureStore.
    ``port=0`` picks a free ephemeral port (read it back from
    ``.port``).  A port already in use surfaces as the underlying
    ``OSError``.
    """
    if isinstance(fixtures, FixtureStore):
        store = fixtures
    elif isinstance(fixtures, dict):
        store = FixtureStore(fixtures)
    else:
        store = FixtureStore.from_path(fixtures)
    return MockBackendServer(store, host=host, port=port, delay=delay).start()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="refvos-mockserver",
        description="serve backend fixtures over HTTP for protocol testing",
    )
    parser.add_argument("--fixtures", required=True, help="fixture document JSON")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8771)
    parser.add_argument("--delay", type=float, default=0.0,
                        help="fixed per-request delay in seconds")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        stream=sys.stderr,
        format="%(name)s %(message)s",
    )
    try:
        store = FixtureStore.from_path(args.fixtures)
        server = MockBackendServer(store, host=args.host, port=args.port,
                                   delay=args.delay)
    except (FixtureError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"serving {args.fixtures} on {server.base_url}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    return 0


if __name__ == "__main__":
    sys.exit(main())
