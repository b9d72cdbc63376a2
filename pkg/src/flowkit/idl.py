"""Interface definitions: parse message/service declarations, validate and
encode/decode message values on the JSON wire.

Messages are top-level only (no nesting declarations, enums, maps, or oneof).
Values are plain Python trees: str/int/float/bool scalars, lists for repeated
fields, dicts for records.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .errors import (
    DuplicateFieldNumber,
    DuplicateName,
    FieldTypeMismatch,
    IdlSyntaxError,
    MissingField,
    MissingTraversalMarker,
    RecursiveMessage,
    TraversalOfScalar,
    UnknownField,
    UnknownTypeReference,
    ValidationError,
)

SCALAR_KINDS = ("string", "int64", "float64", "bool")

# JSON numbers above this lose integer precision; the wire rejects them.
MAX_SAFE_INT = 2**53 - 1

Value = object  # scalar | list | dict tree


@dataclass(frozen=True)
class FieldSchema:
    name: str
    kind: str  # scalar kind or message name
    repeated: bool
    number: int

    @property
    def is_scalar(self) -> bool:
        return self.kind in SCALAR_KINDS


@dataclass(frozen=True)
class MessageSchema:
    name: str
    fields: tuple[FieldSchema, ...]

    def field_by_name(self, name: str) -> FieldSchema | None:
        for f in self.fields:
            if f.name == name:
                return f
        return None


@dataclass(frozen=True)
class ServiceSchema:
    name: str
    input: str
    output: str


@dataclass(frozen=True)
class SchemaSet:
    messages: dict[str, MessageSchema] = field(default_factory=dict)
    services: dict[str, ServiceSchema] = field(default_factory=dict)


@dataclass(frozen=True)
class PathType:
    """Resolved type of a field path: element kind, how many repeated fields
    the path traversed with "[]", and whether it ends at an untraversed
    repeated field (i.e. denotes the whole list)."""

    kind: str
    fanout: int
    is_list: bool


# --------------------------------------------------------------------------
# Tokenizer / parser
# --------------------------------------------------------------------------

_TOKEN_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*|\d+|[{}=;]")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")


@dataclass(frozen=True)
class _Token:
    text: str
    line: int
    col: int


def _tokenize_idl(source: str) -> list[_Token]:
    tokens: list[_Token] = []
    for lineno, line in enumerate(source.splitlines(), start=1):
        line = line.split("//", 1)[0]
        pos = 0
        while pos < len(line):
            if line[pos].isspace():
                pos += 1
                continue
            m = _TOKEN_RE.match(line, pos)
            if not m:
                raise IdlSyntaxError(
                    f"unexpected character {line[pos]!r}", line=lineno, col=pos + 1
                )
            tokens.append(_Token(m.group(), lineno, m.start() + 1))
            pos = m.end()
    return tokens


class _IdlParser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    def _peek(self) -> _Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def _next(self, expect: str | None = None) -> _Token:
        tok = self._peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else None
            raise IdlSyntaxError(
                "unexpected end of input" + (f", expected {expect!r}" if expect else ""),
                line=last.line if last else 1,
                col=last.col if last else 1,
            )
        if expect is not None and tok.text != expect:
            raise IdlSyntaxError(
                f"expected {expect!r}, found {tok.text!r}", line=tok.line, col=tok.col
            )
        self.pos += 1
        return tok

    def _ident(self) -> _Token:
        tok = self._next()
        if not _IDENT_RE.match(tok.text):
            raise IdlSyntaxError(
                f"expected identifier, found {tok.text!r}", line=tok.line, col=tok.col
            )
        return tok

    def parse(self) -> SchemaSet:
        messages: dict[str, MessageSchema] = {}
        services: dict[str, ServiceSchema] = {}
        while (tok := self._peek()) is not None:
            if tok.text == "message":
                msg = self._message()
                if msg.name in messages or msg.name in services:
                    raise self._dup(msg.name, tok)
                messages[msg.name] = msg
            elif tok.text == "service":
                svc = self._service()
                if svc.name in services or svc.name in messages:
                    raise self._dup(svc.name, tok)
                services[svc.name] = svc
            else:
                raise IdlSyntaxError(
                    f"expected 'message' or 'service', found {tok.text!r}",
                    line=tok.line,
                    col=tok.col,
                )
        schemas = SchemaSet(messages, services)
        _check_references(schemas)
        return schemas

    @staticmethod
    def _dup(name: str, tok: _Token) -> DuplicateName:
        return DuplicateName(f"duplicate declaration {name!r}", line=tok.line, col=tok.col)

    def _message(self) -> MessageSchema:
        self._next("message")
        name = self._ident()
        self._next("{")
        fields: list[FieldSchema] = []
        names: set[str] = set()
        numbers: set[int] = set()
        while self._peek() is not None and self._peek().text != "}":
            fields.append(self._field(name.text, names, numbers))
        self._next("}")
        return MessageSchema(name.text, tuple(fields))

    def _field(self, msg: str, names: set[str], numbers: set[int]) -> FieldSchema:
        repeated = False
        tok = self._peek()
        if tok is not None and tok.text == "repeated":
            self._next()
            repeated = True
        kind = self._ident()
        fname = self._ident()
        self._next("=")
        num_tok = self._next()
        if not num_tok.text.isdigit() or int(num_tok.text) < 1:
            raise IdlSyntaxError(
                f"field number must be a positive integer, found {num_tok.text!r}",
                line=num_tok.line,
                col=num_tok.col,
            )
        self._next(";")
        if fname.text in names:
            raise DuplicateName(
                f"duplicate field {fname.text!r} in message {msg!r}",
                line=fname.line,
                col=fname.col,
            )
        number = int(num_tok.text)
        if number in numbers:
            raise DuplicateFieldNumber(
                f"duplicate field number {number} in message {msg!r}",
                line=num_tok.line,
                col=num_tok.col,
            )
        names.add(fname.text)
        numbers.add(number)
        return FieldSchema(fname.text, kind.text, repeated, number)

    def _service(self) -> ServiceSchema:
        self._next("service")
        name = self._ident()
        self._next("{")
        self._next("input")
        input_msg = self._ident()
        self._next(";")
        self._next("output")
        output_msg = self._ident()
        self._next(";")
        self._next("}")
        return ServiceSchema(name.text, input_msg.text, output_msg.text)


def _check_references(schemas: SchemaSet) -> None:
    for msg in schemas.messages.values():
        for f in msg.fields:
            if not f.is_scalar and f.kind not in schemas.messages:
                raise UnknownTypeReference(
                    f"message {msg.name!r} field {f.name!r} references "
                    f"undeclared type {f.kind!r}"
                )
    for svc in schemas.services.values():
        for ref in (svc.input, svc.output):
            if ref not in schemas.messages:
                raise UnknownTypeReference(
                    f"service {svc.name!r} references undeclared message {ref!r}"
                )
    # Containment may not be cyclic, regardless of repeated.
    state: dict[str, int] = {}  # 0 visiting, 1 done

    def visit(name: str, stack: list[str]) -> None:
        if state.get(name) == 1:
            return
        if state.get(name) == 0:
            cycle = stack[stack.index(name):] + [name]
            raise RecursiveMessage("recursive message nesting: " + " -> ".join(cycle))
        state[name] = 0
        stack.append(name)
        for f in schemas.messages[name].fields:
            if not f.is_scalar:
                visit(f.kind, stack)
        stack.pop()
        state[name] = 1

    for name in schemas.messages:
        visit(name, [])


def parse_idl(source: str) -> SchemaSet:
    """Parse IDL text into a SchemaSet. Deterministic; raises on any error."""
    return _IdlParser(_tokenize_idl(source)).parse()


def print_idl(schemas: SchemaSet) -> str:
    """Canonical rendering; parse_idl(print_idl(s)) is structurally equal to s."""
    out: list[str] = []
    for msg in schemas.messages.values():
        out.append(f"message {msg.name} {{")
        for f in msg.fields:
            rep = "repeated " if f.repeated else ""
            out.append(f"  {rep}{f.kind} {f.name} = {f.number};")
        out.append("}")
        out.append("")
    for svc in schemas.services.values():
        out.append(f"service {svc.name} {{")
        out.append(f"  input {svc.input};")
        out.append(f"  output {svc.output};")
        out.append("}")
        out.append("")
    return "\n".join(out)


# --------------------------------------------------------------------------
# Value validation and wire encoding
# --------------------------------------------------------------------------

def _check_scalar(kind: str, value, where: str) -> Value:
    if kind == "bool":
        if not isinstance(value, bool):
            raise FieldTypeMismatch(f"{where}: expected bool")
        return value
    if isinstance(value, bool):
        raise FieldTypeMismatch(f"{where}: expected {kind}, found bool")
    if kind == "string":
        if not isinstance(value, str):
            raise FieldTypeMismatch(f"{where}: expected string")
        return value
    if kind == "int64":
        if not isinstance(value, int):
            raise FieldTypeMismatch(f"{where}: expected int64")
        if abs(value) > MAX_SAFE_INT:
            raise FieldTypeMismatch(f"{where}: int64 magnitude exceeds 2^53-1")
        return value
    if kind == "float64":
        if isinstance(value, int):
            return float(value)
        if not isinstance(value, float):
            raise FieldTypeMismatch(f"{where}: expected float64")
        return value
    raise AssertionError(f"not a scalar kind: {kind}")


def _zero_value(schemas: SchemaSet, kind: str) -> Value:
    defaults = {"string": "", "int64": 0, "float64": 0.0, "bool": False}
    if kind in defaults:
        return defaults[kind]
    return {
        f.name: [] if f.repeated else _zero_value(schemas, f.kind)
        for f in schemas.messages[kind].fields
    }


def validate(schemas: SchemaSet, message: str, value, *, defaults: bool = False,
             where: str = "") -> Value:
    """Check value against the message schema and return the normalized tree.

    With defaults=True, absent non-repeated fields are filled with zero values;
    otherwise they raise MissingField.
    """
    schema = schemas.messages[message]
    where = where or message
    if not isinstance(value, dict):
        raise FieldTypeMismatch(f"{where}: expected object for message {message}")
    known = {f.name for f in schema.fields}
    for key in value:
        if key not in known:
            raise UnknownField(f"{where}: unknown field {key!r}")
    out: dict[str, Value] = {}
    for f in schema.fields:
        fwhere = f"{where}.{f.name}"
        if f.name not in value:
            if f.repeated:
                out[f.name] = []
            elif defaults:
                out[f.name] = _zero_value(schemas, f.kind)
            else:
                raise MissingField(f"{fwhere}: missing required field")
            continue
        v = value[f.name]
        if f.repeated:
            if not isinstance(v, list):
                raise FieldTypeMismatch(f"{fwhere}: expected array")
            out[f.name] = [
                _check_element(schemas, f.kind, item, f"{fwhere}[{i}]", defaults)
                for i, item in enumerate(v)
            ]
        else:
            out[f.name] = _check_element(schemas, f.kind, v, fwhere, defaults)
    return out


def _check_element(schemas: SchemaSet, kind: str, value, where: str,
                   defaults: bool) -> Value:
    if kind in SCALAR_KINDS:
        return _check_scalar(kind, value, where)
    return validate(schemas, kind, value, defaults=defaults, where=where)


def decode(schemas: SchemaSet, message: str, wire: str, *,
           defaults: bool = False) -> Value:
    """Decode wire JSON into a validated Value."""
    try:
        raw = json.loads(wire)
    except json.JSONDecodeError as exc:
        raise FieldTypeMismatch(f"invalid JSON: {exc}") from exc
    return validate(schemas, message, raw, defaults=defaults)


def encode(schemas: SchemaSet, message: str, value) -> str:
    """Canonical wire encoding: schema-declaration key order, compact separators,
    shortest-round-trip floats. Byte-deterministic."""
    normalized = validate(schemas, message, value)
    ordered = _reorder(schemas, message, normalized)
    return json.dumps(ordered, ensure_ascii=False, separators=(",", ":"))


def _reorder(schemas: SchemaSet, message: str, value: dict) -> dict:
    out: dict[str, Value] = {}
    for f in schemas.messages[message].fields:
        v = value[f.name]
        if f.is_scalar:
            out[f.name] = v
        elif f.repeated:
            out[f.name] = [_reorder(schemas, f.kind, item) for item in v]
        else:
            out[f.name] = _reorder(schemas, f.kind, v)
    return out


# --------------------------------------------------------------------------
# Field paths
# --------------------------------------------------------------------------

_SEGMENT_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)(\[\])?$")


def parse_path(path: str) -> list[tuple[str, bool]]:
    """Split "docs[].text" into [("docs", True), ("text", False)]."""
    segments: list[tuple[str, bool]] = []
    for part in path.split("."):
        m = _SEGMENT_RE.match(part)
        if not m:
            raise ValidationError(f"malformed path segment {part!r} in {path!r}")
        segments.append((m.group(1), m.group(2) is not None))
    return segments


def type_at_path(schemas: SchemaSet, message: str, path: str) -> PathType:
    """Resolve the element type reached by a field path within a message.

    Descending through a repeated field requires the "[]" marker; "[]" on a
    non-repeated field is an error. A path ending at a repeated field without
    the marker denotes the whole list (is_list=True).
    """
    segments = parse_path(path) if isinstance(path, str) else path
    current = message
    fanout = 0
    for i, (name, marker) in enumerate(segments):
        if current in SCALAR_KINDS:
            raise UnknownField(f"cannot descend into scalar {current!r} with {name!r}")
        f = schemas.messages[current].field_by_name(name)
        if f is None:
            raise UnknownField(f"message {current!r} has no field {name!r}")
        last = i == len(segments) - 1
        if marker:
            if not f.repeated:
                raise TraversalOfScalar(f"'[]' on non-repeated field {name!r}")
            fanout += 1
        elif f.repeated and not last:
            raise MissingTraversalMarker(
                f"descending through repeated field {name!r} requires '[]'"
            )
        if last:
            return PathType(f.kind, fanout, f.repeated and not marker)
        current = f.kind
    raise ValidationError("empty field path")
