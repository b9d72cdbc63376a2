"""Flow-spec parsing: nodes, entry points, data-element mappings, and deploy
settings, in a line-oriented stanza format.

    [node NAME]    service, address, timeout_ms, parallel, image
    [entry NAME]   input, output
    [map]          SOURCE -> SINK  |  const JSON -> SINK
    [deploy]       registry, gateway_port

Source paths: entry.NAME.input.F(.F|[])*, NODE.output.F(.F|[])*, or a JSON
constant. Sink paths name one top-level input/output field, with a trailing
"[]" marking gather-append.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .errors import (
    DuplicateEntry,
    DuplicateNode,
    IdlSyntaxError,
    MalformedConstant,
    MalformedPath,
    UnknownMessage,
    UnknownService,
)
from .idl import SchemaSet

DEFAULT_TIMEOUT_MS = 5000
DEFAULT_GATEWAY_PORT = 8080

ENTRY_INPUT = "entry_input"
ENTRY_OUTPUT = "entry_output"
NODE_INPUT = "node_input"
NODE_OUTPUT = "node_output"
CONST = "const"


@dataclass(frozen=True)
class Endpoint:
    kind: str  # one of the constants above
    owner: str  # entry or node name; "" for const
    path: str  # field path text; "" for const
    const: object = None  # JSON literal for CONST endpoints

    def render(self) -> str:
        if self.kind == CONST:
            return "const " + json.dumps(self.const, separators=(",", ":"))
        if self.kind in (ENTRY_INPUT, ENTRY_OUTPUT):
            direction = "input" if self.kind == ENTRY_INPUT else "output"
            return f"entry.{self.owner}.{direction}.{self.path}"
        direction = "input" if self.kind == NODE_INPUT else "output"
        return f"{self.owner}.{direction}.{self.path}"


@dataclass(frozen=True)
class Mapping:
    source: Endpoint
    sink: Endpoint
    gather: bool = False
    line: int = 0

    def render(self) -> str:
        suffix = "[]" if self.gather else ""
        return f"{self.source.render()} -> {self.sink.render()}{suffix}"

    def __eq__(self, other):
        if not isinstance(other, Mapping):
            return NotImplemented
        return (self.source, self.sink, self.gather) == (
            other.source, other.sink, other.gather)

    def __hash__(self):
        return hash((self.source, self.sink, self.gather))


@dataclass(frozen=True)
class NodeDecl:
    name: str
    service: str
    address: str
    timeout_ms: int = DEFAULT_TIMEOUT_MS
    parallel: bool = False
    image: str | None = None

    @property
    def host(self) -> str:
        return self.address.rsplit(":", 1)[0]

    @property
    def port(self) -> int:
        return int(self.address.rsplit(":", 1)[1])


@dataclass(frozen=True)
class EntryDecl:
    name: str
    input: str
    output: str


@dataclass(frozen=True)
class DeployConfig:
    registry: str | None = None
    gateway_port: int = DEFAULT_GATEWAY_PORT


@dataclass(frozen=True)
class FlowSpec:
    nodes: tuple[NodeDecl, ...]
    entries: tuple[EntryDecl, ...]
    mappings: tuple[Mapping, ...]
    deploy: DeployConfig = field(default_factory=DeployConfig)

    def node(self, name: str) -> NodeDecl | None:
        for n in self.nodes:
            if n.name == name:
                return n
        return None

    def entry(self, name: str) -> EntryDecl | None:
        for e in self.entries:
            if e.name == name:
                return e
        return None


_HEADER_RE = re.compile(r"^\[(node|entry)\s+([A-Za-z_][A-Za-z0-9_]*)\]$|^\[(map|deploy)\]$")
_KEY_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$")
_ADDRESS_RE = re.compile(r"^[A-Za-z0-9_.-]+:\d{1,5}$")
_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_PATH_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*(\[\])?(\.[A-Za-z_][A-Za-z0-9_]*(\[\])?)*$")


def _parse_endpoint(text: str, line: int, *, sink: bool,
                    nodes: dict[str, NodeDecl],
                    entries: dict[str, EntryDecl]) -> tuple[Endpoint, bool]:
    """Returns (endpoint, gather). gather is only ever True for sinks."""
    text = text.strip()
    if not sink and text.startswith("const "):
        literal = text[len("const "):].strip()
        try:
            value = json.loads(literal)
        except json.JSONDecodeError as exc:
            raise MalformedConstant(f"bad JSON constant {literal!r}: {exc.msg}",
                                    line=line) from exc
        if isinstance(value, dict) or value is None:
            raise MalformedConstant(
                f"constant must be a JSON scalar or array, got {literal!r}", line=line)
        return Endpoint(CONST, "", "", _freeze(value)), False

    gather = False
    parts = text.split(".")
    if parts and parts[0] == "entry":
        if len(parts) < 4 or parts[2] not in ("input", "output"):
            raise MalformedPath(f"malformed entry path {text!r}", line=line)
        name, direction = parts[1], parts[2]
        if name not in entries:
            raise MalformedPath(f"unknown entry {name!r} in {text!r}", line=line)
        kind = ENTRY_INPUT if direction == "input" else ENTRY_OUTPUT
        path = ".".join(parts[3:])
        owner = name
    else:
        if len(parts) < 3 or parts[1] not in ("input", "output"):
            raise MalformedPath(f"malformed node path {text!r}", line=line)
        name, direction = parts[0], parts[1]
        if name not in nodes:
            raise MalformedPath(f"unknown node {name!r} in {text!r}", line=line)
        kind = NODE_INPUT if direction == "input" else NODE_OUTPUT
        path = ".".join(parts[2:])
        owner = name

    if sink:
        if path.endswith("[]"):
            gather = True
            path = path[:-2]
        if kind in (NODE_OUTPUT, ENTRY_INPUT):
            raise MalformedPath(f"{text!r} is not a valid sink", line=line)
        if not _NAME_RE.match(path):
            raise MalformedPath(
                f"sink must name one top-level field, got {text!r}", line=line)
    else:
        if kind in (NODE_INPUT, ENTRY_OUTPUT):
            raise MalformedPath(f"{text!r} is not a valid source", line=line)
        if not _PATH_RE.match(path):
            raise MalformedPath(f"malformed field path in {text!r}", line=line)
    return Endpoint(kind, owner, path), gather


def _freeze(value):
    """JSON arrays become tuples so Endpoint stays hashable."""
    if isinstance(value, list):
        return tuple(_freeze(v) for v in value)
    return value


def thaw(value):
    """Inverse of the constant freeze: tuples back to lists."""
    if isinstance(value, tuple):
        return [thaw(v) for v in value]
    return value


def _parse_bool(text: str, line: int) -> bool:
    if text == "true":
        return True
    if text == "false":
        return False
    raise IdlSyntaxError(f"expected true/false, got {text!r}", line=line)


def _parse_int(text: str, line: int) -> int:
    try:
        return int(text)
    except ValueError:
        raise IdlSyntaxError(f"expected integer, got {text!r}", line=line) from None


def parse_flow(source: str, schemas: SchemaSet) -> FlowSpec:
    """Parse flow-spec text, resolving names against the schema set and
    applying defaults for absent keys."""
    nodes: dict[str, NodeDecl] = {}
    entries: dict[str, EntryDecl] = {}
    raw_mappings: list[tuple[str, str, int]] = []
    deploy_kv: dict[str, tuple[str, int]] = {}

    section: tuple[str, str] | None = None  # (kind, name)
    pending: dict[str, tuple[str, int]] = {}
    pending_line = 0

    def flush() -> None:
        nonlocal pending
        if section is None:
            return
        kind, name = section
        if kind == "node":
            nodes[name] = _finish_node(name, pending, pending_line)
        elif kind == "entry":
            entries[name] = _finish_entry(name, pending, pending_line, schemas)
        elif kind == "deploy":
            deploy_kv.update(pending)
        pending = {}

    def _finish_node(name: str, kv: dict, line: int) -> NodeDecl:
        allowed = {"service", "address", "timeout_ms", "parallel", "image"}
        for key, (_, kline) in kv.items():
            if key not in allowed:
                raise IdlSyntaxError(f"unknown node key {key!r}", line=kline)
        for req in ("service", "address"):
            if req not in kv:
                raise IdlSyntaxError(f"node {name!r} missing {req!r}", line=line)
        service, sline = kv["service"]
        if service not in schemas.services:
            raise UnknownService(f"unknown service {service!r}", line=sline)
        address, aline = kv["address"]
        if not _ADDRESS_RE.match(address) or not 1 <= int(address.rsplit(":", 1)[1]) <= 65535:
            raise IdlSyntaxError(f"bad address {address!r}", line=aline)
        timeout = DEFAULT_TIMEOUT_MS
        if "timeout_ms" in kv:
            timeout = _parse_int(*kv["timeout_ms"])
            if timeout < 1:
                raise IdlSyntaxError("timeout_ms must be >= 1", line=kv["timeout_ms"][1])
        parallel = _parse_bool(*kv["parallel"]) if "parallel" in kv else False
        image = kv["image"][0] if "image" in kv else None
        return NodeDecl(name, service, address, timeout, parallel, image)

    def _finish_entry(name: str, kv: dict, line: int, schemas: SchemaSet) -> EntryDecl:
        for key, (_, kline) in kv.items():
            if key not in ("input", "output"):
                raise IdlSyntaxError(f"unknown entry key {key!r}", line=kline)
        for req in ("input", "output"):
            if req not in kv:
                raise IdlSyntaxError(f"entry {name!r} missing {req!r}", line=line)
        for key in ("input", "output"):
            msg, mline = kv[key]
            if msg not in schemas.messages:
                raise UnknownMessage(f"unknown message {msg!r}", line=mline)
        return EntryDecl(name, kv["input"][0], kv["output"][0])

    for lineno, raw in enumerate(source.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _HEADER_RE.match(line)
        if m:
            flush()
            if m.group(1):  # node/entry
                kind, name = m.group(1), m.group(2)
                if kind == "node" and name in nodes:
                    raise DuplicateNode(f"duplicate node {name!r}", line=lineno)
                if kind == "entry" and name in entries:
                    raise DuplicateEntry(f"duplicate entry {name!r}", line=lineno)
                section = (kind, name)
            else:
                section = (m.group(3), "")
            pending_line = lineno
            continue
        if section is None:
            raise IdlSyntaxError(f"content outside any section: {line!r}", line=lineno)
        if section[0] == "map":
            if "->" not in line:
                raise IdlSyntaxError(f"mapping line must contain '->': {line!r}",
                                     line=lineno)
            src, sink = line.split("->", 1)
            raw_mappings.append((src.strip(), sink.strip(), lineno))
        else:
            km = _KEY_RE.match(line)
            if not km:
                raise IdlSyntaxError(f"expected 'key = value': {line!r}", line=lineno)
            key, value = km.group(1), km.group(2).strip()
            if key in pending:
                raise IdlSyntaxError(f"duplicate key {key!r}", line=lineno)
            pending[key] = (value, lineno)
    flush()

    registry = deploy_kv["registry"][0] if "registry" in deploy_kv else None
    gateway_port = DEFAULT_GATEWAY_PORT
    if "gateway_port" in deploy_kv:
        gateway_port = _parse_int(*deploy_kv["gateway_port"])
        if not 1 <= gateway_port <= 65535:
            raise IdlSyntaxError("gateway_port out of range",
                                 line=deploy_kv["gateway_port"][1])
    for key, (_, kline) in deploy_kv.items():
        if key not in ("registry", "gateway_port"):
            raise IdlSyntaxError(f"unknown deploy key {key!r}", line=kline)

    mappings: list[Mapping] = []
    for src_text, sink_text, lineno in raw_mappings:
        source_ep, _ = _parse_endpoint(src_text, lineno, sink=False,
                                       nodes=nodes, entries=entries)
        sink_ep, gather = _parse_endpoint(sink_text, lineno, sink=True,
                                          nodes=nodes, entries=entries)
        mappings.append(Mapping(source_ep, sink_ep, gather, lineno))

    return FlowSpec(tuple(nodes.values()), tuple(entries.values()),
                    tuple(mappings), DeployConfig(registry, gateway_port))


def print_flow(spec: FlowSpec) -> str:
    """Canonical rendering; parse_flow(print_flow(s), schemas) == s."""
    out: list[str] = []
    for n in spec.nodes:
        out.append(f"[node {n.name}]")
        out.append(f"service = {n.service}")
        out.append(f"address = {n.address}")
        out.append(f"timeout_ms = {n.timeout_ms}")
        out.append(f"parallel = {'true' if n.parallel else 'false'}")
        if n.image is not None:
            out.append(f"image = {n.image}")
        out.append("")
    for e in spec.entries:
        out.append(f"[entry {e.name}]")
        out.append(f"input = {e.input}")
        out.append(f"output = {e.output}")
        out.append("")
    out.append("[map]")
    for m in spec.mappings:
        out.append(m.render())
    out.append("")
    out.append("[deploy]")
    if spec.deploy.registry is not None:
        out.append(f"registry = {spec.deploy.registry}")
    out.append(f"gateway_port = {spec.deploy.gateway_port}")
    out.append("")
    return "\n".join(out)
