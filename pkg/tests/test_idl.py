from __future__ import annotations

import json
import random

import pytest

from conftest import random_value
from flowkit import errors, idl
from flowkit.demo import demo_idl_text


def test_minimal_message():
    s = idl.parse_idl("message Q { string text = 1; }")
    assert list(s.messages) == ["Q"]
    (f,) = s.messages["Q"].fields
    assert (f.name, f.kind, f.repeated, f.number) == ("text", "string", False, 1)


def test_dangling_reference():
    with pytest.raises(errors.UnknownTypeReference, match="'B'"):
        idl.parse_idl("message A { B b = 1; }")


def test_service_and_repeated():
    s = idl.parse_idl("""
        message Req { string q = 1; }
        message Rsp { repeated Req items = 1; }
        service Svc { input Req; output Rsp; }
    """)
    assert s.services["Svc"].input == "Req"
    assert s.messages["Rsp"].fields[0].repeated


@pytest.mark.parametrize("source,exc", [
    ("message Q { string text = 1; string text = 2; }", errors.DuplicateName),
    ("message Q { string a = 1; string b = 1; }", errors.DuplicateFieldNumber),
    ("message Q { string a = 0; }", errors.IdlSyntaxError),
    ("message Q { string a = 1 }", errors.IdlSyntaxError),
    ("message Q { A a = 1; } message A { Q q = 1; }", errors.RecursiveMessage),
    ("message A { A a = 1; }", errors.RecursiveMessage),
    ("message Q {} message Q {}", errors.DuplicateName),
    ("service S { input Q; output Q; }", errors.UnknownTypeReference),
    ("banana", errors.IdlSyntaxError),
])
def test_parse_errors(source, exc):
    with pytest.raises(exc):
        idl.parse_idl(source)


def test_syntax_error_carries_line_and_col():
    source = "message Q {\n  string a = x;\n}"
    with pytest.raises(errors.IdlSyntaxError) as ei:
        idl.parse_idl(source)
    assert ei.value.line == 2
    assert ei.value.col is not None


def test_comments_and_whitespace():
    s = idl.parse_idl("// header\nmessage Q { // inline\n string a = 1; }")
    assert s.messages["Q"].fields[0].name == "a"


def test_demo_schema_roundtrip_fixed_point():
    s1 = idl.parse_idl(demo_idl_text())
    printed = idl.print_idl(s1)
    s2 = idl.parse_idl(printed)
    assert s1 == s2
    assert idl.print_idl(s2) == printed
    assert len(s1.services) == 4


def test_parse_determinism():
    src = demo_idl_text()
    assert idl.parse_idl(src) == idl.parse_idl(src)


# -- decode / encode -------------------------------------------------------

Q = idl.parse_idl("message Q { string text = 1; }")
R = idl.parse_idl("""
    message Doc { string id = 1; }
    message R { repeated Doc docs = 1; }
""")


def test_decode_simple():
    assert idl.decode(Q, "Q", '{"text":"hi"}') == {"text": "hi"}


def test_decode_type_mismatch():
    with pytest.raises(errors.FieldTypeMismatch, match="text"):
        idl.decode(Q, "Q", '{"text": 3}')


def test_decode_empty_repeated():
    assert idl.decode(R, "R", '{"docs":[]}') == {"docs": []}


def test_decode_absent_repeated_is_empty_list():
    assert idl.decode(R, "R", "{}") == {"docs": []}


def test_decode_unknown_field():
    with pytest.raises(errors.UnknownField, match="nope"):
        idl.decode(Q, "Q", '{"text":"x","nope":1}')


def test_decode_missing_field_strict_vs_defaults():
    with pytest.raises(errors.MissingField):
        idl.decode(Q, "Q", "{}")
    assert idl.decode(Q, "Q", "{}", defaults=True) == {"text": ""}


def test_decode_int64_range():
    s = idl.parse_idl("message N { int64 n = 1; }")
    assert idl.decode(s, "N", '{"n": 9007199254740991}') == {"n": 2**53 - 1}
    with pytest.raises(errors.FieldTypeMismatch):
        idl.decode(s, "N", '{"n": 9007199254740992}')
    with pytest.raises(errors.FieldTypeMismatch):
        idl.decode(s, "N", '{"n": 1.5}')
    with pytest.raises(errors.FieldTypeMismatch):
        idl.decode(s, "N", '{"n": true}')


def test_encode_simple_and_key_order():
    s = idl.parse_idl("message M { string b = 2; string a = 1; }")
    # declaration order, not alphabetical or wire order
    assert idl.encode(s, "M", {"a": "x", "b": "y"}) == '{"b":"y","a":"x"}'
    assert idl.encode(Q, "Q", {"text": "hi"}) == '{"text":"hi"}'


def test_encode_rejects_invalid():
    with pytest.raises(errors.ValidationError):
        idl.encode(Q, "Q", {"text": 7})


def test_encode_deterministic():
    v = {"docs": [{"id": "a"}, {"id": "b"}]}
    assert idl.encode(R, "R", v) == idl.encode(R, "R", v)


def test_roundtrip_random_values(demo_schemas):
    rng = random.Random(1234)
    names = list(demo_schemas.messages)
    for _ in range(1000):
        msg = rng.choice(names)
        v = random_value(demo_schemas, msg, rng)
        wire = idl.encode(demo_schemas, msg, v)
        back = idl.decode(demo_schemas, msg, wire)
        assert back == idl.validate(demo_schemas, msg, v)
        # canonical text is a fixed point
        assert idl.encode(demo_schemas, msg, back) == wire


def test_decode_output_always_validates(demo_schemas):
    rng = random.Random(7)
    for _ in range(200):
        msg = rng.choice(list(demo_schemas.messages))
        wire = idl.encode(demo_schemas, msg,
                          random_value(demo_schemas, msg, rng))
        v = idl.decode(demo_schemas, msg, wire)
        idl.validate(demo_schemas, msg, v)  # must not raise


def test_float_shortest_roundtrip():
    s = idl.parse_idl("message F { float64 x = 1; }")
    wire = idl.encode(s, "F", {"x": 0.1})
    assert wire == '{"x":0.1}'
    assert json.loads(wire)["x"] == 0.1


# -- type_at_path ----------------------------------------------------------

def test_type_at_path_demo(demo_schemas):
    pt = idl.type_at_path(demo_schemas, "RetrieveResponse", "docs[].text")
    assert (pt.kind, pt.fanout, pt.is_list) == ("string", 1, False)


def test_type_at_path_scalar():
    pt = idl.type_at_path(Q, "Q", "text")
    assert (pt.kind, pt.fanout, pt.is_list) == ("string", 0, False)


def test_type_at_path_traversal_of_scalar():
    with pytest.raises(errors.TraversalOfScalar):
        idl.type_at_path(Q, "Q", "text[]")


def test_type_at_path_missing_marker(demo_schemas):
    with pytest.raises(errors.MissingTraversalMarker):
        idl.type_at_path(demo_schemas, "RetrieveResponse", "docs.text")


def test_type_at_path_unknown_field():
    with pytest.raises(errors.UnknownField):
        idl.type_at_path(Q, "Q", "nope")


def test_type_at_path_list_end(demo_schemas):
    pt = idl.type_at_path(demo_schemas, "RetrieveResponse", "docs")
    assert (pt.kind, pt.fanout, pt.is_list) == ("Doc", 0, True)
