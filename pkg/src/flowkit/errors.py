"""Exception hierarchy shared by the parsers, compiler, runtime, and nodes."""

from __future__ import annotations


class FlowError(Exception):
    """Base for all framework errors."""

    code = "FLOW_ERROR"

    def __init__(self, message: str, *, line: int | None = None, col: int | None = None):
        self.line = line
        self.col = col
        if line is not None:
            loc = f"line {line}" + (f", col {col}" if col is not None else "")
            message = f"{loc}: {message}"
        super().__init__(message)


# --- IDL / schema errors -------------------------------------------------

class IdlSyntaxError(FlowError):
    code = "SYNTAX"


class DuplicateName(FlowError):
    code = "DUPLICATE_NAME"


class UnknownTypeReference(FlowError):
    code = "UNKNOWN_TYPE"


class DuplicateFieldNumber(FlowError):
    code = "DUPLICATE_FIELD_NUMBER"


class RecursiveMessage(FlowError):
    code = "RECURSIVE_MESSAGE"


# --- wire validation errors ----------------------------------------------

class ValidationError(FlowError):
    code = "VALIDATION"


class FieldTypeMismatch(ValidationError):
    code = "FIELD_TYPE_MISMATCH"


class UnknownField(ValidationError):
    code = "UNKNOWN_FIELD"


class MissingField(ValidationError):
    code = "MISSING_FIELD"


# --- field-path errors ---------------------------------------------------

class TraversalOfScalar(FlowError):
    code = "TRAVERSAL_OF_SCALAR"


class MissingTraversalMarker(FlowError):
    code = "MISSING_TRAVERSAL_MARKER"


# --- flow-spec errors ----------------------------------------------------

class UnknownService(FlowError):
    code = "UNKNOWN_SERVICE"


class UnknownMessage(FlowError):
    code = "UNKNOWN_MESSAGE"


class DuplicateNode(FlowError):
    code = "DUPLICATE_NODE"


class DuplicateEntry(FlowError):
    code = "DUPLICATE_ENTRY"


class MalformedPath(FlowError):
    code = "MALFORMED_PATH"


class MalformedConstant(FlowError):
    code = "MALFORMED_CONSTANT"


# --- compile errors ------------------------------------------------------

class CompileError(FlowError):
    code = "COMPILE"


class TypeMismatch(CompileError):
    code = "TYPE_MISMATCH"


class UnboundInput(CompileError):
    code = "UNBOUND_INPUT"


class MultiplyBoundInput(CompileError):
    code = "MULTIPLY_BOUND_INPUT"


class CycleDetected(CompileError):
    code = "CYCLE_DETECTED"


class NestedFanout(CompileError):
    code = "NESTED_FANOUT"


class MixedFrames(CompileError):
    code = "MIXED_FRAMES"


class GatherOutsideRegion(CompileError):
    code = "GATHER_OUTSIDE_REGION"


class UnreachableNode(CompileError):
    code = "UNREACHABLE_NODE"


class DanglingEntryOutput(CompileError):
    code = "DANGLING_ENTRY_OUTPUT"


class UnknownNode(CompileError):
    code = "UNKNOWN_NODE"


# --- serving errors ------------------------------------------------------

class PortInUse(FlowError):
    code = "PORT_IN_USE"


# --- retrieval errors ----------------------------------------------------

class MalformedLine(FlowError):
    code = "MALFORMED_LINE"


class DuplicateDocId(FlowError):
    code = "DUPLICATE_DOC_ID"


class UnknownDoc(FlowError):
    code = "UNKNOWN_DOC"


class UnknownCorpus(FlowError):
    code = "UNKNOWN_CORPUS"


# --- metrics / eval errors -----------------------------------------------

class EmptySamples(FlowError):
    code = "EMPTY_SAMPLES"


class EmptyResults(FlowError):
    code = "EMPTY_RESULTS"


class NoGold(FlowError):
    code = "NO_GOLD"


class GatewayUnreachable(FlowError):
    code = "GATEWAY_UNREACHABLE"


class MalformedExample(FlowError):
    code = "MALFORMED_EXAMPLE"


# --- deploy errors -------------------------------------------------------

class MissingImage(FlowError):
    code = "MISSING_IMAGE"
