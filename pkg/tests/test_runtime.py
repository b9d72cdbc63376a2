from __future__ import annotations

import json
import random
import threading
import time
from dataclasses import replace

import pytest

from flowkit import errors, flowspec, graph as graph_mod, idl, nodekit, runtime
from flowkit.metrics import MetricsRegistry

SCHEMAS = idl.parse_idl("""
    message Msg { string text = 1; int64 n = 2; }
    service Echo { input Msg; output Msg; }
""")
ECHO = SCHEMAS.services["Echo"]


def echo_decl(server, **kwargs) -> flowspec.NodeDecl:
    return flowspec.NodeDecl("echo", "Echo", server.address, **kwargs)


def test_invoke_node_echo():
    with nodekit.serve_node(SCHEMAS, ECHO, lambda v: v) as server:
        value, record = runtime.invoke_node(SCHEMAS, echo_decl(server),
                                            {"text": "hi", "n": 1})
        assert value == {"text": "hi", "n": 1}
        assert record.status == "ok"
        assert record.duration_ms >= 0


def test_invoke_node_error_envelope():
    def handler(v):
        raise nodekit.HandlerError("boom from stub")

    with nodekit.serve_node(SCHEMAS, ECHO, handler) as server:
        with pytest.raises(runtime._FailureWithRecord) as ei:
            runtime.invoke_node(SCHEMAS, echo_decl(server), {"text": "x", "n": 0})
        assert ei.value.record.status == "node_error"
        assert "boom from stub" in ei.value.message


def test_invoke_node_schema_violating_response():
    # raw server that returns JSON not matching the Echo output schema
    from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

    class Bad(BaseHTTPRequestHandler):
        def log_message(self, *a):
            pass

        def do_POST(self):
            body = b'{"text": 99}'
            self.send_response(200)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

    httpd = ThreadingHTTPServer(("127.0.0.1", 0), Bad)
    threading.Thread(target=httpd.serve_forever, daemon=True).start()
    decl = flowspec.NodeDecl("bad", "Echo", f"127.0.0.1:{httpd.server_address[1]}")
    try:
        with pytest.raises(runtime._FailureWithRecord) as ei:
            runtime.invoke_node(SCHEMAS, decl, {"text": "x", "n": 0})
        assert ei.value.record.status == "node_error"
        assert "response validation failed" in ei.value.message
    finally:
        httpd.shutdown()


def test_invoke_node_transport_error():
    decl = flowspec.NodeDecl("gone", "Echo", "127.0.0.1:1")
    with pytest.raises(runtime._FailureWithRecord) as ei:
        runtime.invoke_node(SCHEMAS, decl, {"text": "x", "n": 0})
    assert ei.value.record.status == "transport_error"


# -- demo-pipeline execution ----------------------------------------------

def ask(graph, question, k=3, threshold=0.0, corpus="demo", **kwargs):
    return runtime.execute(graph, "ask", {
        "question": question, "corpus_id": corpus, "k": k,
        "threshold": threshold}, **kwargs)


def test_demo_end_to_end(demo_pipeline):
    out, trace = ask(demo_pipeline.graph,
                     "What is the harbor lighthouse height?")
    answers = out["answers"]
    assert answers
    assert answers[0]["text"] == "harbor lighthouse height"
    assert len(answers) <= 3
    by_node = {}
    for r in trace.records:
        by_node.setdefault(r.node, []).append(r)
    assert len(by_node["retrieval"]) == 1
    assert len(by_node["reader"]) >= 1
    assert len(by_node["dedup"]) == 1
    assert len(by_node["combiner"]) == 1
    assert all(r.frame >= 0 for r in by_node["reader"])
    assert all(r.frame == -1 for r in by_node["retrieval"])


def test_demo_reader_invoked_once_per_doc(demo_pipeline):
    out, trace = ask(demo_pipeline.graph, "What is the sand cat diet?", k=2)
    retrieved = sum(1 for r in trace.records if r.node == "reader")
    assert 1 <= retrieved <= 2


def test_empty_fanout(demo_pipeline):
    out, trace = ask(demo_pipeline.graph, "zzz qqq vvv")  # matches nothing
    assert out["answers"] == []
    assert sum(1 for r in trace.records if r.node == "reader") == 0
    assert sum(1 for r in trace.records if r.node == "dedup") == 1


def test_bad_request_no_node_called(demo_pipeline):
    with pytest.raises(runtime.ExecutionFailed) as ei:
        runtime.execute(demo_pipeline.graph, "ask", {"question": 7})
    assert ei.value.error.code == "BAD_REQUEST"
    assert ei.value.trace.records == []


def test_unknown_entry(demo_pipeline):
    with pytest.raises(runtime.ExecutionFailed) as ei:
        runtime.execute(demo_pipeline.graph, "nope", {})
    assert ei.value.error.code == "BAD_REQUEST"


def test_timeout_propagation_with_chain():
    """A slow reader with a tight timeout fails as TIMEOUT with the upstream
    chain, within the scheduling tolerance."""
    from flowkit.demo import start_demo_nodes

    with start_demo_nodes() as pipeline:
        # replace the reader with a sleeping stub on a fresh port
        def sleepy(v):
            time.sleep(0.5)
            return {"answer": {"text": "", "begin_char": 0, "end_char": 0,
                               "score": 0.0, "no_answer_score": 1.0,
                               "doc_id": ""}}

        stub = nodekit.serve_node(pipeline.schemas,
                                  pipeline.schemas.services["Reader"], sleepy)
        try:
            nodes = tuple(
                replace(n, address=stub.address, timeout_ms=100)
                if n.name == "reader" else n
                for n in pipeline.spec.nodes)
            spec = replace(pipeline.spec, nodes=nodes)
            g = graph_mod.compile(pipeline.schemas, spec)
            start = time.perf_counter()
            with pytest.raises(runtime.ExecutionFailed) as ei:
                ask(g, "What is the glass frog habitat?")
            elapsed_ms = (time.perf_counter() - start) * 1000
            assert ei.value.error.code == "TIMEOUT"
            assert ei.value.error.node == "reader"
            assert ei.value.error.chain == ["retrieval", "reader"]
            reader_records = [r for r in ei.value.trace.records
                              if r.node == "reader"]
            assert reader_records and all(r.status == "timeout"
                                          for r in reader_records)
            assert elapsed_ms < 2000
        finally:
            stub.shutdown()


def test_node_error_propagation():
    from flowkit.demo import start_demo_nodes

    with start_demo_nodes() as pipeline:
        def broken(v):
            raise nodekit.HandlerError("reader exploded")

        stub = nodekit.serve_node(pipeline.schemas,
                                  pipeline.schemas.services["Reader"], broken)
        try:
            nodes = tuple(replace(n, address=stub.address)
                          if n.name == "reader" else n
                          for n in pipeline.spec.nodes)
            g = graph_mod.compile(pipeline.schemas,
                                  replace(pipeline.spec, nodes=nodes))
            with pytest.raises(runtime.ExecutionFailed) as ei:
                ask(g, "What is the glass frog habitat?")
            assert ei.value.error.code == "NODE_ERROR"
            assert "reader exploded" in ei.value.error.message
        finally:
            stub.shutdown()


def test_parallel_off_vs_on_identical(demo_pipeline):
    """Determinism across parallel modes, with a jittery stub delay."""
    schemas = demo_pipeline.schemas

    def jittery(v):
        time.sleep(random.random() * 0.05)
        from flowkit.reader import ReaderService
        return ReaderService().handle(v)

    stub = nodekit.serve_node(schemas, schemas.services["Reader"], jittery)
    try:
        variants = {}
        for parallel in (False, True):
            nodes = tuple(
                replace(n, address=stub.address, parallel=parallel)
                if n.name == "reader" else n
                for n in demo_pipeline.spec.nodes)
            g = graph_mod.compile(schemas, replace(demo_pipeline.spec,
                                                   nodes=nodes))
            out, _ = ask(g, "What is the marble quarry depth?")
            variants[parallel] = idl.encode(schemas, "AskResponse", out)
        assert variants[False] == variants[True]
    finally:
        stub.shutdown()


def test_fanout_parallelism_timing():
    """8 sleeping frames: parallel well under the sequential sum."""
    schemas = idl.parse_idl("""
        message EIn { repeated string xs = 1; }
        message EOut { repeated string ys = 1; }
        message SIn { string s = 1; }
        message SOut { string s = 1; }
        service Slow { input SIn; output SOut; }
    """)

    def slow(v):
        time.sleep(0.1)
        return {"s": v["s"].upper()}

    with nodekit.serve_node(schemas, schemas.services["Slow"], slow,
                            max_workers=16) as server:
        results = {}
        for parallel in (True, False):
            text = (f"[node slow]\nservice = Slow\naddress = {server.address}\n"
                    f"parallel = {'true' if parallel else 'false'}\n"
                    "[entry e]\ninput = EIn\noutput = EOut\n"
                    "[map]\n"
                    "entry.e.input.xs[] -> slow.input.s\n"
                    "slow.output.s -> entry.e.output.ys[]\n")
            g = graph_mod.compile(schemas, flowspec.parse_flow(text, schemas))
            start = time.perf_counter()
            out, _ = runtime.execute(g, "e", {"xs": [f"x{i}" for i in range(8)]})
            results[parallel] = (time.perf_counter() - start) * 1000
            assert out["ys"] == [f"X{i}" for i in range(8)]
        assert results[True] < 300
        assert results[False] >= 800


def test_fanout_width_limit(demo_pipeline):
    schemas = idl.parse_idl("""
        message EIn { repeated string xs = 1; }
        message EOut { repeated string ys = 1; }
        message SIn { string s = 1; }
        message SOut { string s = 1; }
        service S { input SIn; output SOut; }
    """)
    with nodekit.serve_node(schemas, schemas.services["S"],
                            lambda v: {"s": v["s"]}) as server:
        text = (f"[node n]\nservice = S\naddress = {server.address}\n"
                "[entry e]\ninput = EIn\noutput = EOut\n"
                "[map]\n"
                "entry.e.input.xs[] -> n.input.s\n"
                "n.output.s -> entry.e.output.ys[]\n")
        g = graph_mod.compile(schemas, flowspec.parse_flow(text, schemas))
        with pytest.raises(runtime.ExecutionFailed) as ei:
            runtime.execute(g, "e", {"xs": ["x"] * 65})
        assert ei.value.error.code == "BAD_REQUEST"
        out, _ = runtime.execute(g, "e", {"xs": ["x"] * 65}, max_fanout=100)
        assert len(out["ys"]) == 65


def test_broadcast_identical_to_all_frames(demo_pipeline):
    """Root-scalar question broadcast: every reader frame sees the same bytes."""
    out, trace = ask(demo_pipeline.graph, "What is the ginger tea recipe?",
                     debug=True)
    reader_inputs = [json.loads(r.input_snapshot) for r in trace.records
                     if r.node == "reader"]
    assert len(reader_inputs) >= 1
    questions = {json.dumps(r["question"]) for r in reader_inputs}
    assert len(questions) == 1


def test_record_metrics(demo_pipeline):
    registry = MetricsRegistry()
    out, trace = ask(demo_pipeline.graph, "What is the cedar bridge length?")
    runtime.record_metrics(trace, registry)
    snap = registry.snapshot()
    for node in ("retrieval", "reader", "dedup", "combiner"):
        assert len(snap["nodes"][node]) >= 1
    # empty trace leaves the registry unchanged
    before = registry.snapshot()
    runtime.record_metrics(runtime.ExecutionTrace(), registry)
    assert registry.snapshot() == before


def test_failed_invocation_still_records_sample():
    registry = MetricsRegistry()
    decl = flowspec.NodeDecl("gone", "Echo", "127.0.0.1:1")
    try:
        runtime.invoke_node(SCHEMAS, decl, {"text": "x", "n": 0})
    except runtime._FailureWithRecord as exc:
        trace = runtime.ExecutionTrace([exc.record])
        runtime.record_metrics(trace, registry)
    samples = registry.snapshot()["nodes"]["gone"]
    assert len(samples) == 1
    assert samples[0][1] == "transport_error"


def test_concurrent_request_isolation(demo_pipeline):
    """32 concurrent requests with distinct payloads never mix outputs."""
    from concurrent.futures import ThreadPoolExecutor

    questions = [
        "What is the harbor lighthouse height?",
        "What is the glass frog habitat?",
        "What is the sand cat diet?",
        "What is the copper kettle origin?",
    ]

    def one(i):
        q = questions[i % len(questions)]
        out, trace = ask(demo_pipeline.graph, q)
        return q, out["answers"][0]["text"]

    with ThreadPoolExecutor(max_workers=32) as pool:
        for q, top in pool.map(one, range(32)):
            # the top answer is the planted span of this question's triple
            expected = q.removeprefix("What is the ").removesuffix("?")
            assert top == expected
