"""Bundled demo pipeline fixtures: interface definitions, flow spec, corpora,
and evaluation questions, plus helpers to run the whole pipeline in-process."""

from __future__ import annotations

from dataclasses import dataclass, replace
from importlib import resources

from .. import graph as graph_mod
from ..flowspec import FlowSpec, parse_flow
from ..idl import SchemaSet, parse_idl

CORPORA = {"demo": "corpus.jsonl", "support": "corpus_support.jsonl"}


def _read(name: str) -> str:
    return (resources.files(__package__) / name).read_text(encoding="utf-8")


def demo_idl_text() -> str:
    return _read("qa.idl")


def demo_flow_text() -> str:
    return _read("qa.flow")


def corpus_lines(corpus_id: str = "demo"):
    return _read(CORPORA[corpus_id]).splitlines()


def questions_text() -> str:
    return _read("questions.jsonl")


def load_demo_schemas() -> SchemaSet:
    return parse_idl(demo_idl_text())


def load_demo_flow(schemas: SchemaSet | None = None) -> FlowSpec:
    return parse_flow(demo_flow_text(), schemas or load_demo_schemas())


@dataclass
class DemoPipeline:
    """All four demo nodes running on ephemeral local ports, plus the compiled
    graph rewired to those ports."""

    schemas: SchemaSet
    spec: FlowSpec
    graph: graph_mod.FlowGraph
    servers: list

    def shutdown(self) -> None:
        for s in self.servers:
            s.shutdown()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.shutdown()


def start_demo_nodes(*, parallel_reader: bool = True,
                     reader_timeout_ms: int | None = None) -> DemoPipeline:
    """Start retrieval/reader/dedup/combiner on free ports and compile the
    demo flow against the live addresses."""
    from ..nodekit import serve_node
    from ..postproc import handle_combine, handle_dedup
    from ..reader import ReaderService
    from ..retrieval import RetrievalService

    schemas = load_demo_schemas()
    spec = load_demo_flow(schemas)

    retrieval = RetrievalService()
    for corpus_id in CORPORA:
        retrieval.add_corpus(corpus_id, corpus_lines(corpus_id))
    handlers = {
        "retrieval": ("Retrieval", retrieval.handle),
        "reader": ("Reader", ReaderService().handle),
        "dedup": ("Dedup", handle_dedup),
        "combiner": ("Combiner", handle_combine),
    }
    servers = []
    nodes = []
    for decl in spec.nodes:
        service_name, handler = handlers[decl.name]
        server = serve_node(schemas, schemas.services[service_name], handler)
        servers.append(server)
        updated = replace(decl, address=server.address)
        if decl.name == "reader":
            updated = replace(updated, parallel=parallel_reader)
            if reader_timeout_ms is not None:
                updated = replace(updated, timeout_ms=reader_timeout_ms)
        nodes.append(updated)
    live_spec = replace(spec, nodes=tuple(nodes))
    return DemoPipeline(schemas, live_spec,
                        graph_mod.compile(schemas, live_spec), servers)
