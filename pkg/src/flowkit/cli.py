"""The `flow` command: compile, deploy artifact generation, gateway serving,
and a self-contained in-process demo."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import deploy as deploy_mod
from . import graph as graph_mod
from .errors import FlowError
from .flowspec import parse_flow
from .gateway import serve
from .idl import parse_idl


def _load(idl_path: str, spec_path: str):
    schemas = parse_idl(Path(idl_path).read_text(encoding="utf-8"))
    spec = parse_flow(Path(spec_path).read_text(encoding="utf-8"), schemas)
    return schemas, spec


def cmd_compile(args) -> int:
    schemas, spec = _load(args.idl, args.spec)
    graph = graph_mod.compile(schemas, spec,
                              unreachable_error=args.strict_unreachable)
    print(json.dumps(graph_mod.describe(graph), indent=2))
    return 0


def cmd_deploy(args) -> int:
    schemas, spec = _load(args.idl, args.spec)
    graph_mod.compile(schemas, spec)  # validate before emitting artifacts
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "compose.yaml").write_text(deploy_mod.generate_compose(spec),
                                      encoding="utf-8")
    (out / "k8s.yaml").write_text(deploy_mod.generate_k8s(spec),
                                  encoding="utf-8")
    launch = out / "launch.sh"
    launch.write_text(deploy_mod.generate_launch(spec), encoding="utf-8")
    launch.chmod(0o755)
    print(f"wrote {out / 'compose.yaml'}, {out / 'k8s.yaml'}, {launch}")
    return 0


def cmd_serve(args) -> int:
    schemas, spec = _load(args.idl, args.spec)
    graph = graph_mod.compile(schemas, spec)
    port = args.port if args.port is not None else spec.deploy.gateway_port
    server = serve(graph, port, ui_dir=args.ui)
    print(f"gateway listening on :{server.port}", flush=True)
    server.serve_forever()
    return 0


def cmd_demo(args) -> int:
    from .demo import CORPORA, start_demo_nodes

    pipeline = start_demo_nodes()
    server = serve(pipeline.graph, args.port,
                   metadata={"corpora": sorted(CORPORA)}, ui_dir=args.ui)
    print(f"demo pipeline up; gateway listening on :{server.port}", flush=True)
    print("try: curl -s -X POST localhost:%d/entry/ask -d '%s'" % (
        server.port,
        json.dumps({"input": {"question": "What is the glass frog habitat?",
                              "corpus_id": "demo", "k": 3, "threshold": 0.0}}),
    ), flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pipeline.shutdown()
        server.shutdown()
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="flow")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", help="compile and print the flow graph")
    p.add_argument("--idl", required=True)
    p.add_argument("--spec", required=True)
    p.add_argument("--strict-unreachable", action="store_true")
    p.set_defaults(fn=cmd_compile)

    p = sub.add_parser("deploy", help="generate deployment artifacts")
    p.add_argument("--idl", required=True)
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_deploy)

    p = sub.add_parser("serve", help="serve the gateway for a compiled flow")
    p.add_argument("--idl", required=True)
    p.add_argument("--spec", required=True)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--ui", default=None, help="static UI directory")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("demo", help="run the bundled QA pipeline in-process")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--ui", default=None, help="static UI directory")
    p.set_defaults(fn=cmd_demo)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except FlowError as exc:
        print(f"error[{exc.code}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
