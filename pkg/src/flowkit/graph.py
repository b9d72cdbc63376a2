"""Compile (SchemaSet, FlowSpec) into a validated dataflow DAG.

The compiled FlowGraph carries, per node, an input-assembly plan (one binding
per input field), the fan-out regions with their gather sinks, and a
deterministic topological execution order. The runtime interprets this
structure; no code is generated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import (
    CycleDetected,
    DanglingEntryOutput,
    GatherOutsideRegion,
    MixedFrames,
    MultiplyBoundInput,
    NestedFanout,
    TypeMismatch,
    UnboundInput,
    UnknownNode,
    UnreachableNode,
)
from .flowspec import (
    CONST,
    ENTRY_INPUT,
    ENTRY_OUTPUT,
    NODE_INPUT,
    NODE_OUTPUT,
    Endpoint,
    FlowSpec,
    Mapping,
    NodeDecl,
)
from .idl import PathType, SchemaSet, parse_path, type_at_path

ROOT_FRAME = "root"


@dataclass(frozen=True)
class Binding:
    """How one sink field obtains its value."""

    field: str
    gather: bool
    source: Endpoint
    ptype: PathType | None  # None for constants
    per_frame: bool  # source yields one value per fan-out frame
    region: int | None  # region index the source value lives in


@dataclass(frozen=True)
class TypedEdge:
    source: Endpoint
    sink: Endpoint
    kind: str  # element kind flowing on the edge
    gather: bool


@dataclass(frozen=True)
class FanoutRegion:
    index: int
    origin: Endpoint  # repeated field path, without the "[]" marker
    element_kind: str
    members: tuple[str, ...]
    gather_sinks: tuple[str, ...]  # rendered sink endpoints

    @property
    def ident(self) -> str:
        return f"region:{self.origin.render()}"


@dataclass(frozen=True)
class FlowGraph:
    schemas: SchemaSet
    spec: FlowSpec
    node_plans: dict[str, tuple[Binding, ...]]
    entry_plans: dict[str, tuple[Binding, ...]]
    regions: tuple[FanoutRegion, ...]
    node_region: dict[str, int]  # absent key = root frame
    topo_order: tuple[str, ...]
    edges: tuple[TypedEdge, ...]
    warnings: tuple[str, ...] = ()

    def node(self, name: str) -> NodeDecl:
        decl = self.spec.node(name)
        if decl is None:
            raise UnknownNode(f"unknown node {name!r}")
        return decl


def frame_of(graph: FlowGraph, node: str) -> str:
    """"root" for nodes outside all fan-out regions, region id otherwise."""
    graph.node(node)  # raises UnknownNode
    idx = graph.node_region.get(node)
    return ROOT_FRAME if idx is None else graph.regions[idx].ident


class _Compiler:
    def __init__(self, schemas: SchemaSet, spec: FlowSpec, unreachable_error: bool):
        self.schemas = schemas
        self.spec = spec
        self.unreachable_error = unreachable_error
        self.node_region: dict[str, int] = {}
        self.regions: list[dict] = []  # origin, element_kind, members, gather_sinks
        self.warnings: list[str] = []

    # -- helpers ----------------------------------------------------------

    def _source_message(self, ep: Endpoint) -> str:
        if ep.kind == ENTRY_INPUT:
            return self.spec.entry(ep.owner).input
        service = self.schemas.services[self.spec.node(ep.owner).service]
        return service.output

    def _sink_field(self, ep: Endpoint):
        if ep.kind == ENTRY_OUTPUT:
            msg = self.spec.entry(ep.owner).output
        else:
            msg = self.schemas.services[self.spec.node(ep.owner).service].input
        f = self.schemas.messages[msg].field_by_name(ep.path)
        if f is None:
            raise TypeMismatch(
                f"sink {ep.render()!r}: message {msg!r} has no field {ep.path!r}")
        return f

    def _origin_of(self, ep: Endpoint) -> tuple[Endpoint, str]:
        """For a marked source path, the repeated-field prefix and element kind."""
        segments = parse_path(ep.path)
        prefix: list[str] = []
        for name, marker in segments:
            prefix.append(name)
            if marker:
                break
        origin_path = ".".join(prefix)
        origin = Endpoint(ep.kind, ep.owner, origin_path)
        msg = self._source_message(ep)
        pt = type_at_path(self.schemas, msg, origin_path)
        return origin, pt.kind

    def _region_for(self, origin: Endpoint, element_kind: str, line: int) -> int:
        if origin.kind == NODE_OUTPUT and origin.owner in self.node_region:
            raise NestedFanout(
                f"fan-out origin {origin.render()!r} is itself inside a region",
                line=line)
        for i, r in enumerate(self.regions):
            if r["origin"] == origin:
                return i
        self.regions.append({
            "origin": origin,
            "element_kind": element_kind,
            "members": [],
            "gather_sinks": [],
        })
        return len(self.regions) - 1

    # -- main -------------------------------------------------------------

    def compile(self) -> FlowGraph:
        spec, schemas = self.spec, self.schemas
        deps, rdeps = self._dependency_graph()
        topo = self._topo_sort(deps)

        # Group mappings per sink.
        node_maps: dict[str, list[Mapping]] = {n.name: [] for n in spec.nodes}
        entry_maps: dict[str, list[Mapping]] = {e.name: [] for e in spec.entries}
        for m in spec.mappings:
            if m.sink.kind == NODE_INPUT:
                node_maps[m.sink.owner].append(m)
            else:
                entry_maps[m.sink.owner].append(m)

        self._check_bindings(node_maps, entry_maps)

        node_plans: dict[str, tuple[Binding, ...]] = {}
        edges: list[TypedEdge] = []
        for name in topo:
            bindings = [self._bind(m) for m in node_maps[name]]
            self._assign_frame(name, bindings, node_maps[name])
            # Re-bind now that this node's own frame is known downstream.
            node_plans[name] = tuple(bindings)
        # Node frames are final; resolve per-frame flags that depend on a
        # member's own outputs (bindings were built in topo order, so source
        # nodes were already assigned).
        for name in topo:
            for b, m in zip(node_plans[name], node_maps[name]):
                self._typecheck(b, m)
                edges.append(TypedEdge(m.source, m.sink, self._edge_kind(b, m),
                                       m.gather))

        entry_plans: dict[str, tuple[Binding, ...]] = {}
        for e in spec.entries:
            bindings = []
            for m in entry_maps[e.name]:
                b = self._bind(m)
                if b.per_frame and not b.gather:
                    raise TypeMismatch(
                        f"per-frame source {m.source.render()!r} feeding entry "
                        f"output requires a gather '[]' sink", line=m.line)
                self._typecheck(b, m)
                edges.append(TypedEdge(m.source, m.sink, self._edge_kind(b, m),
                                       m.gather))
                bindings.append(b)
            entry_plans[e.name] = tuple(bindings)

        self._check_entry_overlap(deps)
        self._check_reachability(deps, entry_maps)

        regions = tuple(
            FanoutRegion(
                i, r["origin"], r["element_kind"],
                tuple(n.name for n in spec.nodes
                      if self.node_region.get(n.name) == i),
                tuple(r["gather_sinks"]),
            )
            for i, r in enumerate(self.regions)
        )
        return FlowGraph(schemas, spec, node_plans, entry_plans, regions,
                         dict(self.node_region), tuple(topo), tuple(edges),
                         tuple(self.warnings))

    def _dependency_graph(self):
        deps: dict[str, set[str]] = {n.name: set() for n in self.spec.nodes}
        rdeps: dict[str, set[str]] = {n.name: set() for n in self.spec.nodes}
        for m in self.spec.mappings:
            if m.source.kind == NODE_OUTPUT and m.sink.kind == NODE_INPUT:
                deps[m.sink.owner].add(m.source.owner)
                rdeps[m.source.owner].add(m.sink.owner)
        return deps, rdeps

    def _topo_sort(self, deps: dict[str, set[str]]) -> list[str]:
        order = [n.name for n in self.spec.nodes]
        remaining = dict(deps)
        topo: list[str] = []
        placed: set[str] = set()
        while remaining:
            ready = [n for n in order
                     if n in remaining and remaining[n] <= placed]
            if not ready:
                cycle = self._find_cycle(remaining)
                raise CycleDetected("cycle among nodes: " + " -> ".join(cycle))
            nxt = ready[0]  # declaration order breaks ties
            topo.append(nxt)
            placed.add(nxt)
            del remaining[nxt]
        return topo

    @staticmethod
    def _find_cycle(deps: dict[str, set[str]]) -> list[str]:
        state: dict[str, int] = {}
        path: list[str] = []

        def visit(n: str) -> list[str] | None:
            state[n] = 0
            path.append(n)
            for d in sorted(deps.get(n, ())):
                if d not in deps:
                    continue
                if state.get(d) == 0:
                    return path[path.index(d):] + [d]
                if d not in state:
                    found = visit(d)
                    if found:
                        return found
            path.pop()
            state[n] = 1
            return None

        for n in deps:
            if n not in state:
                found = visit(n)
                if found:
                    return found
        return []

    def _check_bindings(self, node_maps, entry_maps) -> None:
        for decl in self.spec.nodes:
            msg = self.schemas.services[decl.service].input
            fields = self.schemas.messages[msg].fields
            bound: dict[str, int] = {}
            for m in node_maps[decl.name]:
                bound[m.sink.path] = bound.get(m.sink.path, 0) + 1
            for f in fields:
                n = bound.get(f.name, 0)
                if n == 0:
                    raise UnboundInput(
                        f"node {decl.name!r} input field {f.name!r} is unbound")
                if n > 1:
                    raise MultiplyBoundInput(
                        f"node {decl.name!r} input field {f.name!r} bound "
                        f"{n} times")
            if not fields:
                raise UnboundInput(
                    f"node {decl.name!r} has no input fields to bind; it cannot "
                    f"be scheduled")
        for e in self.spec.entries:
            fields = self.schemas.messages[e.output].fields
            bound = {}
            for m in entry_maps[e.name]:
                bound[m.sink.path] = bound.get(m.sink.path, 0) + 1
            for f in fields:
                n = bound.get(f.name, 0)
                if n == 0:
                    raise DanglingEntryOutput(
                        f"entry {e.name!r} output field {f.name!r} is unbound")
                if n > 1:
                    raise MultiplyBoundInput(
                        f"entry {e.name!r} output field {f.name!r} bound "
                        f"{n} times")

    def _bind(self, m: Mapping) -> Binding:
        src = m.source
        if src.kind == CONST:
            return Binding(m.sink.path, m.gather, src, None, False, None)
        msg = self._source_message(src)
        pt = type_at_path(self.schemas, msg, src.path)
        if pt.fanout > 1:
            raise NestedFanout(
                f"source {src.render()!r} traverses more than one repeated "
                f"field", line=m.line)
        per_frame = False
        region: int | None = None
        if pt.fanout == 1:
            origin, element_kind = self._origin_of(src)
            region = self._region_for(origin, element_kind, m.line)
            per_frame = True
        elif src.kind == NODE_OUTPUT and src.owner in self.node_region:
            region = self.node_region[src.owner]
            per_frame = True
        return Binding(m.sink.path, m.gather, src, pt, per_frame, region)

    def _assign_frame(self, node: str, bindings: list[Binding],
                      maps: list[Mapping]) -> None:
        frames = {b.region for b in bindings if b.per_frame and not b.gather}
        if len(frames) > 1:
            raise MixedFrames(
                f"node {node!r} draws per-element inputs from "
                f"{len(frames)} different fan-out regions")
        if frames:
            idx = frames.pop()
            self.node_region[node] = idx
            self.regions[idx]["members"].append(node)

    def _typecheck(self, b: Binding, m: Mapping) -> None:
        sink_field = self._sink_field(m.sink)
        if b.source.kind == CONST:
            self._check_const(b, m, sink_field)
            return
        assert b.ptype is not None
        src_kind, src_list = b.ptype.kind, b.ptype.is_list
        if b.gather:
            if not b.per_frame:
                raise GatherOutsideRegion(
                    f"gather sink {m.sink.render()!r}[] fed from non-fan-out "
                    f"source {m.source.render()!r}", line=m.line)
            self.regions[b.region]["gather_sinks"].append(
                m.sink.render() + "[]")
            if not sink_field.repeated or src_list or src_kind != sink_field.kind:
                raise TypeMismatch(
                    f"{m.source.render()} -> {m.sink.render()}[]: expected "
                    f"per-frame {sink_field.kind}, found "
                    f"{'list of ' if src_list else ''}{src_kind}", line=m.line)
            return
        if sink_field.repeated:
            if not src_list or src_kind != sink_field.kind:
                raise TypeMismatch(
                    f"{m.source.render()} -> {m.sink.render()}: expected list "
                    f"of {sink_field.kind}, found "
                    f"{'list of ' if src_list else ''}{src_kind}", line=m.line)
        else:
            if src_list or src_kind != sink_field.kind:
                raise TypeMismatch(
                    f"{m.source.render()} -> {m.sink.render()}: expected "
                    f"{sink_field.kind}, found "
                    f"{'list of ' if src_list else ''}{src_kind}", line=m.line)

    def _check_const(self, b: Binding, m: Mapping, sink_field) -> None:
        from .flowspec import thaw
        value = thaw(b.source.const)
        if b.gather:
            raise GatherOutsideRegion(
                f"gather sink {m.sink.render()!r}[] fed from a constant",
                line=m.line)
        if sink_field.is_scalar:
            if sink_field.repeated:
                ok = isinstance(value, list) and all(
                    _scalar_matches(sink_field.kind, v) for v in value)
            else:
                ok = _scalar_matches(sink_field.kind, value)
        else:
            ok = False  # message-typed sinks cannot take constants
        if not ok:
            raise TypeMismatch(
                f"const {json.dumps(value)} does not match sink "
                f"{m.sink.render()!r} of kind "
                f"{'repeated ' if sink_field.repeated else ''}{sink_field.kind}",
                line=m.line)

    def _edge_kind(self, b: Binding, m: Mapping) -> str:
        if b.ptype is not None:
            return b.ptype.kind
        return self._sink_field(m.sink).kind

    def _check_entry_overlap(self, deps: dict[str, set[str]]) -> None:
        if len(self.spec.entries) < 2:
            return
        owner: dict[str, str] = {}
        for m in self.spec.mappings:
            touched = []
            if m.source.kind == ENTRY_INPUT and m.sink.kind == NODE_INPUT:
                touched.append((m.sink.owner, m.source.owner))
            if m.sink.kind == ENTRY_OUTPUT and m.source.kind == NODE_OUTPUT:
                touched.append((m.source.owner, m.sink.owner))
            for node, entry in touched:
                self._claim(owner, deps, node, entry)

    def _claim(self, owner: dict[str, str], deps: dict[str, set[str]],
               node: str, entry: str) -> None:
        stack = [node]
        seen = set()
        while stack:
            n = stack.pop()
            if n in seen:
                continue
            seen.add(n)
            prev = owner.get(n)
            if prev is not None and prev != entry:
                raise MixedFrames(
                    f"node {n!r} is reachable from entries {prev!r} and "
                    f"{entry!r}")
            owner[n] = entry
            stack.extend(deps.get(n, ()))

    def _check_reachability(self, deps: dict[str, set[str]],
                            entry_maps: dict[str, list[Mapping]]) -> None:
        useful: set[str] = set()
        stack: list[str] = []
        for maps in entry_maps.values():
            for m in maps:
                if m.source.kind == NODE_OUTPUT:
                    stack.append(m.source.owner)
        while stack:
            n = stack.pop()
            if n in useful:
                continue
            useful.add(n)
            stack.extend(deps.get(n, ()))
        for decl in self.spec.nodes:
            if decl.name not in useful:
                msg = (f"node {decl.name!r} does not contribute to any entry "
                       f"output")
                if self.unreachable_error:
                    raise UnreachableNode(msg)
                self.warnings.append(msg)


def compile(schemas: SchemaSet, spec: FlowSpec, *,
            unreachable_error: bool = False) -> FlowGraph:
    """Compile and validate a flow. Deterministic: identical inputs yield a
    structurally identical FlowGraph."""
    return _Compiler(schemas, spec, unreachable_error).compile()


def _scalar_matches(kind: str, value) -> bool:
    if kind == "bool":
        return isinstance(value, bool)
    if isinstance(value, bool):
        return False
    if kind == "string":
        return isinstance(value, str)
    if kind == "int64":
        return isinstance(value, int)
    if kind == "float64":
        return isinstance(value, (int, float))
    return False


def describe(graph: FlowGraph) -> dict:
    """Serializable graph description with canonical ordering."""
    return {
        "nodes": [
            {
                "name": n.name,
                "service": n.service,
                "address": n.address,
                "timeout_ms": n.timeout_ms,
                "parallel": n.parallel,
                "frame": frame_of(graph, n.name),
            }
            for n in graph.spec.nodes
        ],
        "edges": [
            {
                "source": e.source.render(),
                "sink": e.sink.render() + ("[]" if e.gather else ""),
                "kind": e.kind,
            }
            for e in graph.edges
        ],
        "regions": [
            {
                "id": r.ident,
                "origin": r.origin.render(),
                "element_kind": r.element_kind,
                "members": list(r.members),
                "gather_sinks": list(r.gather_sinks),
            }
            for r in graph.regions
        ],
        "topo_order": list(graph.topo_order),
        "entries": [
            {"name": e.name, "input": e.input, "output": e.output}
            for e in graph.spec.entries
        ],
        "warnings": list(graph.warnings),
    }


def describe_json(graph: FlowGraph) -> str:
    return json.dumps(describe(graph), ensure_ascii=False, separators=(",", ":"))
