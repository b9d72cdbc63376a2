"""REST gateway: expose compiled entry points with debug traces, latency
metrics, a graph description endpoint, and optional static UI hosting.

  POST /entry/{name}[?debug=true]  body {"input": ...}
  GET  /metrics    per-node count/p50/p95 report
  GET  /graph      graph description (plus server-supplied metadata)
  GET  /healthz
  GET  /ui/...     static files when a UI directory is configured

All responses carry permissive CORS headers so a separately-served console
can call the gateway directly.
"""

from __future__ import annotations

import errno
import json
import mimetypes
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from . import idl, runtime
from .errors import PortInUse
from .graph import FlowGraph, describe
from .metrics import MetricsRegistry, metrics_report

_HTTP_STATUS = {
    "BAD_REQUEST": 400,
    "TIMEOUT": 504,
    "NODE_ERROR": 502,
    "TRANSPORT": 502,
}


def _json_bytes(obj) -> bytes:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":")).encode("utf-8")


class GatewayServer:
    """A running gateway. Use as a context manager or call shutdown()."""

    def __init__(self, graph: FlowGraph, port: int = 0, *,
                 registry: MetricsRegistry | None = None,
                 metadata: dict | None = None,
                 ui_dir: str | Path | None = None):
        self.graph = graph
        self.registry = registry or MetricsRegistry(
            [n.name for n in graph.spec.nodes])
        self.metadata = metadata or {}
        self.ui_dir = Path(ui_dir) if ui_dir else None
        outer = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, *args):
                pass

            def _reply(self, status: int, body: bytes,
                       content_type: str = "application/json") -> None:
                self.send_response(status)
                self.send_header("Content-Type", content_type)
                self.send_header("Content-Length", str(len(body)))
                self.send_header("Access-Control-Allow-Origin", "*")
                self.send_header("Access-Control-Allow-Methods",
                                 "GET, POST, OPTIONS")
                self.send_header("Access-Control-Allow-Headers", "Content-Type")
                self.end_headers()
                self.wfile.write(body)

            def _error(self, status: int, payload: dict) -> None:
                self._reply(status, _json_bytes({"error": payload}))

            def do_OPTIONS(self):
                self._reply(204, b"")

            def do_GET(self):
                path = urlparse(self.path).path
                if path == "/healthz":
                    self._reply(200, b'{"status":"ok"}')
                elif path == "/metrics":
                    self._reply(200, _json_bytes(metrics_report(outer.registry)))
                elif path == "/graph":
                    doc = describe(outer.graph)
                    if outer.metadata:
                        doc["metadata"] = outer.metadata
                    self._reply(200, _json_bytes(doc))
                elif path == "/" or path.startswith("/ui"):
                    self._static(path)
                else:
                    self._error(404, {"code": "BAD_REQUEST",
                                      "message": "unknown path"})

            def _static(self, path: str) -> None:
                if outer.ui_dir is None:
                    self._error(404, {"code": "BAD_REQUEST",
                                      "message": "no UI configured"})
                    return
                rel = path.removeprefix("/ui").lstrip("/") or "index.html"
                if path == "/":
                    rel = "index.html"
                target = (outer.ui_dir / rel).resolve()
                if not str(target).startswith(str(outer.ui_dir.resolve())) \
                        or not target.is_file():
                    self._error(404, {"code": "BAD_REQUEST",
                                      "message": "file not found"})
                    return
                ctype = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
                self._reply(200, target.read_bytes(), content_type=ctype)

            def do_POST(self):
                parsed = urlparse(self.path)
                if not parsed.path.startswith("/entry/"):
                    self._error(404, {"code": "BAD_REQUEST",
                                      "message": "unknown path"})
                    return
                entry = parsed.path[len("/entry/"):]
                if outer.graph.spec.entry(entry) is None:
                    self._error(404, {"code": "BAD_REQUEST",
                                      "message": "unknown entry"})
                    return
                debug = parse_qs(parsed.query).get("debug", ["false"])[0] == "true"
                length = int(self.headers.get("Content-Length", 0))
                try:
                    body = json.loads(self.rfile.read(length).decode("utf-8"))
                except (json.JSONDecodeError, UnicodeDecodeError) as exc:
                    self._error(400, {"code": "BAD_REQUEST",
                                      "message": f"invalid JSON body: {exc}"})
                    return
                if not isinstance(body, dict) or "input" not in body:
                    self._error(400, {"code": "BAD_REQUEST",
                                      "message": 'body must be {"input": ...}'})
                    return
                outer._handle_entry(self, entry, body["input"], debug)

        class _Server(ThreadingHTTPServer):
            request_queue_size = 128  # survive client connection bursts

        try:
            self._httpd = _Server(("0.0.0.0", port), Handler)
        except OSError as exc:
            if exc.errno == errno.EADDRINUSE:
                raise PortInUse(f"port {port} already in use") from exc
            raise
        self._httpd.daemon_threads = True
        self.port = self._httpd.server_address[1]
        self._thread = threading.Thread(target=self._httpd.serve_forever,
                                        daemon=True)
        self._thread.start()

    def _handle_entry(self, http, entry: str, input_value, debug: bool) -> None:
        entry_decl = self.graph.spec.entry(entry)
        try:
            output, trace = runtime.execute(self.graph, entry, input_value,
                                            debug=debug)
        except runtime.ExecutionFailed as exc:
            runtime.record_metrics(exc.trace, self.registry)
            self.registry.record_entry(entry, ok=False)
            status = _HTTP_STATUS.get(exc.error.code, 500)
            http._error(status, exc.error.to_json())
            return
        runtime.record_metrics(trace, self.registry)
        self.registry.record_entry(entry, ok=True)
        # Compose around the canonical output encoding so the output bytes are
        # exactly idl.encode's.
        encoded = idl.encode(self.graph.schemas, entry_decl.output, output)
        parts = ['{"output":', encoded]
        if debug:
            parts.append(',"trace":')
            parts.append(json.dumps(trace.to_json(), ensure_ascii=False,
                                    separators=(",", ":")))
            parts.append(',"total_duration_ms":')
            parts.append(json.dumps(trace.total_duration_ms))
        parts.append("}")
        http._reply(200, "".join(parts).encode("utf-8"))

    def shutdown(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.shutdown()

    def serve_forever(self) -> None:
        self._thread.join()


def serve(graph: FlowGraph, port: int = 0, **kwargs) -> GatewayServer:
    """Start the gateway; returns immediately with the running server."""
    return GatewayServer(graph, port, **kwargs)
