"""Execute a compiled FlowGraph for one entry invocation: call node services
over the wire, honoring timeouts, propagating errors, recording latencies, and
parallelizing fan-out when enabled.

All per-request state is confined to the request; the graph and schemas are
shared read-only, and the metrics registry is internally synchronized.
"""

from __future__ import annotations

import json
import threading
import time
from concurrent.futures import FIRST_EXCEPTION, ThreadPoolExecutor, wait
from dataclasses import dataclass, field

import requests

from . import idl
from .errors import ValidationError
from .flowspec import CONST, ENTRY_INPUT, Endpoint, NodeDecl, thaw
from .graph import Binding, FlowGraph
from .idl import parse_path
from .metrics import MetricsRegistry

SNAPSHOT_LIMIT = 64 * 1024  # bytes per captured payload
DEFAULT_MAX_FANOUT = 64
GRACE_DRAIN_S = 1.0  # wait this long for abandoned sibling calls

STATUS_OK = "ok"
STATUS_TIMEOUT = "timeout"
STATUS_NODE_ERROR = "node_error"
STATUS_TRANSPORT = "transport_error"

_STATUS_CODE = {
    STATUS_TIMEOUT: "TIMEOUT",
    STATUS_NODE_ERROR: "NODE_ERROR",
    STATUS_TRANSPORT: "TRANSPORT",
}


@dataclass
class InvocationRecord:
    node: str
    frame: int  # -1 for root-frame invocations
    start_offset_ms: float
    duration_ms: float
    status: str
    input_snapshot: str | None = None
    output_snapshot: str | None = None
    truncated: bool = False

    def to_json(self) -> dict:
        out = {
            "node": self.node,
            "frame": self.frame,
            "start_offset_ms": self.start_offset_ms,
            "duration_ms": self.duration_ms,
            "status": self.status,
        }
        if self.input_snapshot is not None:
            out["input_snapshot"] = self.input_snapshot
        if self.output_snapshot is not None:
            out["output_snapshot"] = self.output_snapshot
        if self.truncated:
            out["truncated"] = True
        return out


@dataclass
class ExecutionTrace:
    records: list[InvocationRecord] = field(default_factory=list)
    total_duration_ms: float = 0.0

    def to_json(self) -> list[dict]:
        return [r.to_json() for r in self.records]


@dataclass
class OrchestratorError:
    code: str  # TIMEOUT | NODE_ERROR | TRANSPORT | BAD_REQUEST
    node: str
    message: str
    chain: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        out = {"code": self.code, "message": self.message}
        if self.node:
            out["node"] = self.node
        if self.chain:
            out["chain"] = self.chain
        return out


class ExecutionFailed(Exception):
    """Raised by execute(); carries the error and the partial trace."""

    def __init__(self, error: OrchestratorError, trace: ExecutionTrace):
        self.error = error
        self.trace = trace
        super().__init__(f"{error.code} at {error.node or '<entry>'}: {error.message}")


class _NodeFailure(Exception):
    def __init__(self, status: str, message: str, frame: int):
        self.status = status
        self.message = message
        self.frame = frame
        super().__init__(message)


def _truncate(wire: str) -> tuple[str, bool]:
    data = wire.encode("utf-8")
    if len(data) <= SNAPSHOT_LIMIT:
        return wire, False
    return data[:SNAPSHOT_LIMIT].decode("utf-8", errors="ignore"), True


def invoke_node(schemas, decl: NodeDecl, input_value, *, debug: bool = False,
                session: requests.Session | None = None,
                clock_start: float | None = None,
                frame: int = -1) -> tuple[object, InvocationRecord]:
    """POST one encoded request to a node and validate its response.

    Returns (output value, record); raises _NodeFailure with the record's
    status folded in on timeout, transport failure, or node error.
    """
    service = schemas.services[decl.service]
    wire = idl.encode(schemas, service.input, input_value)
    url = f"http://{decl.address}/invoke"
    t0 = clock_start if clock_start is not None else time.perf_counter()
    start = time.perf_counter()
    record = InvocationRecord(decl.name, frame, (start - t0) * 1000.0, 0.0, STATUS_OK)
    if debug:
        record.input_snapshot, record.truncated = _truncate(wire)

    post = session.post if session is not None else requests.post
    try:
        resp = post(url, data=wire.encode("utf-8"),
                    headers={"Content-Type": "application/json"},
                    timeout=decl.timeout_ms / 1000.0)
    except requests.Timeout:
        record.duration_ms = (time.perf_counter() - start) * 1000.0
        record.status = STATUS_TIMEOUT
        raise _FailureWithRecord(record, f"node {decl.name!r} exceeded "
                                 f"{decl.timeout_ms} ms")
    except requests.RequestException as exc:
        record.duration_ms = (time.perf_counter() - start) * 1000.0
        record.status = STATUS_TRANSPORT
        raise _FailureWithRecord(record, f"transport failure: {exc}")

    record.duration_ms = (time.perf_counter() - start) * 1000.0
    if 200 <= resp.status_code < 300:
        try:
            value = idl.decode(schemas, service.output, resp.text)
        except ValidationError as exc:
            record.status = STATUS_NODE_ERROR
            raise _FailureWithRecord(record,
                                     f"response validation failed: {exc}")
        if debug:
            snap, trunc = _truncate(resp.text)
            record.output_snapshot = snap
            record.truncated = record.truncated or trunc
        return value, record
    # Non-2xx: a valid error envelope is a node-signaled failure, anything
    # else is a transport-level problem.
    try:
        envelope = resp.json()
        message = envelope["error"]["message"]
    except Exception:
        record.status = STATUS_TRANSPORT
        raise _FailureWithRecord(record,
                                 f"HTTP {resp.status_code} without error envelope")
    record.status = STATUS_NODE_ERROR
    raise _FailureWithRecord(record, message)


class _FailureWithRecord(Exception):
    def __init__(self, record: InvocationRecord, message: str):
        self.record = record
        self.message = message
        super().__init__(message)


class _Execution:
    def __init__(self, graph: FlowGraph, entry: str, options: dict):
        self.graph = graph
        self.entry = entry
        self.debug = bool(options.get("debug"))
        self.max_fanout = int(options.get("max_fanout", DEFAULT_MAX_FANOUT))
        self.session = options.get("session")
        self.t0 = time.perf_counter()
        self.trace = ExecutionTrace()
        self.trace_lock = threading.Lock()
        self.entry_value = None
        self.outputs: dict[str, object] = {}
        self.region_lists: dict[int, list] = {}

    def fail(self, status_or_code: str, node: str, message: str):
        code = _STATUS_CODE.get(status_or_code, status_or_code)
        chain = self._chain(node) if node else []
        self.trace.total_duration_ms = (time.perf_counter() - self.t0) * 1000.0
        raise ExecutionFailed(OrchestratorError(code, node, message, chain),
                              self.trace)

    def _chain(self, node: str) -> list[str]:
        deps: dict[str, set[str]] = {n.name: set() for n in self.graph.spec.nodes}
        for e in self.graph.edges:
            if e.source.kind == "node_output" and e.sink.kind == "node_input":
                deps[e.sink.owner].add(e.source.owner)
        preds: set[str] = set()
        stack = [node]
        while stack:
            n = stack.pop()
            for d in deps.get(n, ()):
                if d not in preds:
                    preds.add(d)
                    stack.append(d)
        return [n for n in self.graph.topo_order if n in preds] + [node]

    # -- value plumbing ---------------------------------------------------

    def _resolve(self, ep: Endpoint, frame: int | None):
        if ep.kind == ENTRY_INPUT:
            base = self.entry_value
        else:
            owner_region = self.graph.node_region.get(ep.owner)
            if owner_region is None:
                base = self.outputs[ep.owner]
            else:
                base = self.outputs[ep.owner][frame]
        for name, marker in parse_path(ep.path):
            base = base[name]
            if marker:
                base = base[frame]
        return base

    def _region_list(self, idx: int) -> list:
        if idx not in self.region_lists:
            region = self.graph.regions[idx]
            self.region_lists[idx] = self._resolve(region.origin, None)
        return self.region_lists[idx]

    def _assemble(self, bindings: tuple[Binding, ...], frame: int | None) -> dict:
        record: dict[str, object] = {}
        for b in bindings:
            if b.source.kind == CONST:
                record[b.field] = thaw(b.source.const)
            elif b.gather:
                n = len(self._region_list(b.region))
                record[b.field] = [self._resolve(b.source, i) for i in range(n)]
            elif b.per_frame:
                record[b.field] = self._resolve(b.source, frame)
            else:
                record[b.field] = self._resolve(b.source, None)
        return record

    # -- node invocation --------------------------------------------------

    def _call(self, decl: NodeDecl, input_value, frame: int):
        try:
            value, record = invoke_node(
                self.graph.schemas, decl, input_value, debug=self.debug,
                session=self.session, clock_start=self.t0, frame=frame)
        except _FailureWithRecord as exc:
            with self.trace_lock:
                self.trace.records.append(exc.record)
            raise _NodeFailure(exc.record.status, exc.message, frame)
        with self.trace_lock:
            self.trace.records.append(record)
        return value

    def run_fanout(self, decl: NodeDecl, frame_inputs: list, parallel: bool) -> list:
        """Invoke one node once per frame; outputs keep frame order for both
        modes. Sequential mode stops at the first failing frame; parallel mode
        reports the earliest-index failure after a bounded grace drain."""
        if not parallel or len(frame_inputs) <= 1:
            return [self._call(decl, inp, i)
                    for i, inp in enumerate(frame_inputs)]
        failures: dict[int, _NodeFailure] = {}
        results: dict[int, object] = {}

        def one(i: int, inp):
            try:
                results[i] = self._call(decl, inp, i)
            except _NodeFailure as exc:
                failures[i] = exc
                raise

        with ThreadPoolExecutor(max_workers=len(frame_inputs)) as pool:
            futures = [pool.submit(one, i, inp)
                       for i, inp in enumerate(frame_inputs)]
            done, pending = wait(futures, return_when=FIRST_EXCEPTION)
            if failures:
                wait(pending, timeout=GRACE_DRAIN_S)
            else:
                wait(pending)
        if failures:
            raise failures[min(failures)]
        return [results[i] for i in range(len(frame_inputs))]

    # -- main loop --------------------------------------------------------

    def run(self, input_value) -> tuple[object, ExecutionTrace]:
        graph = self.graph
        entry_decl = graph.spec.entry(self.entry)
        if entry_decl is None:
            self.fail("BAD_REQUEST", "", f"unknown entry {self.entry!r}")
        try:
            self.entry_value = idl.validate(graph.schemas, entry_decl.input,
                                            input_value)
        except ValidationError as exc:
            self.fail("BAD_REQUEST", "", str(exc))

        for name in graph.topo_order:
            decl = graph.node(name)
            bindings = graph.node_plans[name]
            region_idx = graph.node_region.get(name)
            try:
                if region_idx is None:
                    value = self._call(decl, self._assemble(bindings, None), -1)
                    self.outputs[name] = value
                else:
                    origin_list = self._region_list(region_idx)
                    if len(origin_list) > self.max_fanout:
                        self.fail("BAD_REQUEST", name,
                                  f"fan-out width {len(origin_list)} exceeds "
                                  f"limit {self.max_fanout}")
                    frame_inputs = [self._assemble(bindings, i)
                                    for i in range(len(origin_list))]
                    self.outputs[name] = self.run_fanout(
                        decl, frame_inputs, decl.parallel)
            except _NodeFailure as exc:
                self.fail(exc.status, name, exc.message)

        output = self._assemble(graph.entry_plans[self.entry], None)
        output = idl.validate(graph.schemas, entry_decl.output, output)
        self.trace.records.sort(key=lambda r: (r.start_offset_ms, r.frame))
        self.trace.total_duration_ms = (time.perf_counter() - self.t0) * 1000.0
        return output, self.trace


def execute(graph: FlowGraph, entry: str, input_value, *, debug: bool = False,
            max_fanout: int = DEFAULT_MAX_FANOUT,
            session: requests.Session | None = None
            ) -> tuple[object, ExecutionTrace]:
    """Run one entry invocation. Raises ExecutionFailed on any failure; the
    exception carries the partial trace."""
    return _Execution(graph, entry, {
        "debug": debug, "max_fanout": max_fanout, "session": session,
    }).run(input_value)


def record_metrics(trace: ExecutionTrace, registry: MetricsRegistry) -> None:
    """Append every invocation's duration sample, tagged by status."""
    for r in trace.records:
        registry.record_node(r.node, r.duration_ms, r.status)
