"""Node-server scaffolding: wire handling, schema validation at both
boundaries, and health checks, so a node only implements its business logic.

Wire protocol (shared with the orchestrator client):
  POST /invoke   body = encoded input message JSON -> 200 encoded output
                 node-signaled failure: 400/500 {"error":{"code","message"}}
  GET  /healthz  -> 200 {"status":"ok"}
"""

from __future__ import annotations

import json
import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from . import idl
from .errors import ValidationError
from .idl import SchemaSet, ServiceSchema


class HandlerError(Exception):
    """Domain error raised by a node handler; surfaces as a 500 envelope."""

    def __init__(self, message: str, code: str = "HANDLER_ERROR"):
        self.code = code
        super().__init__(message)


def _error_body(code: str, message: str) -> bytes:
    return json.dumps(
        {"error": {"code": code, "message": message}},
        ensure_ascii=False, separators=(",", ":"),
    ).encode("utf-8")


class NodeServer:
    """A running node service. Use as a context manager or call shutdown()."""

    def __init__(self, schemas: SchemaSet, service: ServiceSchema, handler,
                 port: int = 0, *, single_flight: bool = False,
                 max_workers: int = 8):
        self.schemas = schemas
        self.service = service
        self.handler = handler
        self.calls = 0  # completed handler invocations, for tests
        self._gate = (threading.Lock() if single_flight
                      else threading.Semaphore(max_workers))
        outer = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, *args):  # quiet by default
                pass

            def _reply(self, status: int, body: bytes) -> None:
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def do_GET(self):
                if self.path == "/healthz":
                    self._reply(200, b'{"status":"ok"}')
                else:
                    self._reply(404, _error_body("NOT_FOUND", "unknown path"))

            def do_POST(self):
                if self.path != "/invoke":
                    self._reply(404, _error_body("NOT_FOUND", "unknown path"))
                    return
                length = int(self.headers.get("Content-Length", 0))
                body = self.rfile.read(length)
                outer._invoke(self, body)

        class QuietServer(ThreadingHTTPServer):
            request_queue_size = 128  # survive fan-out connection bursts

            def handle_error(self, request, client_address):
                # clients abandon in-flight calls on timeout; not our error
                exc = sys.exc_info()[1]
                if isinstance(exc, (BrokenPipeError, ConnectionResetError)):
                    return
                super().handle_error(request, client_address)

        self._httpd = QuietServer(("127.0.0.1", port), Handler)
        self._httpd.daemon_threads = True
        self.port = self._httpd.server_address[1]
        self._thread = threading.Thread(target=self._httpd.serve_forever,
                                        daemon=True)
        self._thread.start()

    def _invoke(self, http, body: bytes) -> None:
        try:
            value = idl.decode(self.schemas, self.service.input,
                               body.decode("utf-8"))
        except (ValidationError, UnicodeDecodeError) as exc:
            http._reply(400, _error_body("BAD_REQUEST", str(exc)))
            return
        with self._gate:
            try:
                result = self.handler(value)
            except HandlerError as exc:
                http._reply(500, _error_body(exc.code, str(exc)))
                return
            except Exception as exc:  # unexpected handler crash
                http._reply(500, _error_body("HANDLER_ERROR", str(exc)))
                return
        try:
            wire = idl.encode(self.schemas, self.service.output, result)
        except ValidationError as exc:
            http._reply(500, _error_body(
                "OUTPUT_INVALID", f"output validation failed: {exc}"))
            return
        self.calls += 1
        http._reply(200, wire.encode("utf-8"))

    @property
    def address(self) -> str:
        return f"127.0.0.1:{self.port}"

    def shutdown(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.shutdown()

    def serve_forever(self) -> None:
        """Block until interrupted (used by node CLIs)."""
        self._thread.join()


def serve_node(schemas: SchemaSet, service: ServiceSchema, handler,
               port: int = 0, **kwargs) -> NodeServer:
    """Start a node server; returns immediately with the running server."""
    return NodeServer(schemas, service, handler, port, **kwargs)


def node_manifest(service: ServiceSchema, port: int) -> str:
    """Deterministic manifest fragment for deploy composition."""
    return json.dumps(
        {
            "service": service.name,
            "input": service.input,
            "output": service.output,
            "port": port,
            "invoke_path": "/invoke",
            "health_path": "/healthz",
        },
        ensure_ascii=False, separators=(",", ":"),
    )
