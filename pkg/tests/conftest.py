from __future__ import annotations

import random

import pytest

from flowkit import demo, graph as graph_mod
from flowkit.idl import SCALAR_KINDS, SchemaSet


@pytest.fixture(scope="session")
def demo_schemas():
    return demo.load_demo_schemas()


@pytest.fixture(scope="session")
def demo_flow(demo_schemas):
    return demo.load_demo_flow(demo_schemas)


@pytest.fixture(scope="session")
def demo_graph(demo_schemas, demo_flow):
    return graph_mod.compile(demo_schemas, demo_flow)


@pytest.fixture(scope="module")
def demo_pipeline():
    with demo.start_demo_nodes() as pipeline:
        yield pipeline


def random_value(schemas: SchemaSet, message: str, rng: random.Random,
                 depth: int = 0):
    """Generate a schema-conforming Value."""
    out = {}
    for f in schemas.messages[message].fields:
        if f.repeated:
            n = rng.randint(0, 3) if depth < 3 else 0
            out[f.name] = [_random_element(schemas, f.kind, rng, depth + 1)
                           for _ in range(n)]
        else:
            out[f.name] = _random_element(schemas, f.kind, rng, depth + 1)
    return out


def _random_element(schemas, kind, rng, depth):
    if kind == "string":
        return "".join(rng.choice("abcxyz é中") for _ in range(rng.randint(0, 8)))
    if kind == "int64":
        return rng.randint(-(2**53 - 1), 2**53 - 1)
    if kind == "float64":
        return rng.choice([0.0, -1.5, 3.141592653589793,
                           rng.uniform(-1e9, 1e9)])
    if kind == "bool":
        return rng.random() < 0.5
    if kind in SCALAR_KINDS:
        raise AssertionError(kind)
    return random_value(schemas, kind, rng, depth)
