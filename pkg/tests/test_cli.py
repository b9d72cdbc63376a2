from __future__ import annotations

import json
from importlib.resources import files

import pytest

from flowkit import cli

DEMO = files("flowkit.demo")


def test_compile_prints_graph(capsys):
    cli.main(["compile", "--idl", str(DEMO / "qa.idl"),
              "--spec", str(DEMO / "qa.flow")])
    doc = json.loads(capsys.readouterr().out)
    assert doc["topo_order"] == ["retrieval", "reader", "dedup", "combiner"]


def test_compile_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.flow"
    bad.write_text("[node x]\nservice = Nope\naddress = h:1\n[map]\n")
    rc = cli.main(["compile", "--idl", str(DEMO / "qa.idl"),
                   "--spec", str(bad)])
    assert rc == 1
    err = capsys.readouterr().err
    assert err.startswith("error[")


def test_strict_unreachable_flag(tmp_path, capsys):
    idl_path = tmp_path / "s.idl"
    idl_path.write_text("""
        message In { string q = 1; }
        message Out { string a = 1; }
        service S { input In; output Out; }
    """)
    flow = tmp_path / "s.flow"
    flow.write_text(
        "[node a]\nservice = S\naddress = h:1\n"
        "[node b]\nservice = S\naddress = h:2\n"
        "[entry e]\ninput = In\noutput = Out\n"
        "[map]\n"
        "entry.e.input.q -> a.input.q\n"
        "entry.e.input.q -> b.input.q\n"
        "a.output.a -> entry.e.output.a\n")
    assert cli.main(["compile", "--idl", str(idl_path),
                     "--spec", str(flow)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["warnings"]
    assert cli.main(["compile", "--idl", str(idl_path), "--spec", str(flow),
                     "--strict-unreachable"]) == 1
