"""
Frontend - Lexer, parser, AST and pretty-printer for RDSL sources

RDSL describes processing as flows of immutable streams. A flow declares
streams and calls other flows or modifiers; a modifier binds a stream
transformation to SDK functions, optionally behind a `guarded{first}` block
that picks the first arm whose condition holds.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from lark import Token as LarkToken
from lark import v_args
from lark.exceptions import LarkError

from .errors import (
    DuplicateName,
    MissingTrueArm,
    RdslError,
    RdslSyntaxError,
    SourcePos,
)
from .expr import Expr, ExprBuilder, format_expr
from .parsing import rdsl_parser, translate_lark_error

KEYWORDS = frozenset(
    {"flow", "modifier", "stream", "guarded", "first", "in", "out", "type", "label", "TRUE", "EMPTY"}
)

PUNCTUATION = {
    "[": "lbracket",
    "]": "rbracket",
    "{": "lbrace",
    "}": "rbrace",
    "(": "lparen",
    ")": "rparen",
    ":": "colon",
    ",": "comma",
    "=": "eq",
    "%": "percent",
    "---": "separator",
    "!=": "neq",
    "==": "eqeq",
    "<=": "le",
    "<": "lt",
    ">=": "ge",
    ">": "gt",
    "+": "plus",
    "-": "minus",
    "*": "star",
    "/": "slash",
    "@": "at",
}


class Direction(str, Enum):
    IN = "in"
    OUT = "out"
    INTERNAL = "internal"


class GuardKind(str, Enum):
    TRUE = "true"
    DEFINED = "defined"
    EMPTY = "empty"


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int


@dataclass(frozen=True)
class StreamDecl:
    name: str
    dims: Tuple[Expr, ...] = ()
    direction: Direction = Direction.INTERNAL
    label: Optional[str] = None
    comment: Optional[str] = None
    pos: Optional[SourcePos] = field(default=None, compare=False)


@dataclass(frozen=True)
class StreamRef:
    name: str
    indices: Tuple[Expr, ...] = ()
    delay: int = 0
    pos: Optional[SourcePos] = field(default=None, compare=False)


@dataclass(frozen=True)
class IndexRange:
    var: str
    lo: Expr
    hi: Expr
    pos: Optional[SourcePos] = field(default=None, compare=False)


@dataclass(frozen=True)
class ArgBinding:
    formal: str
    ref: StreamRef
    pos: Optional[SourcePos] = field(default=None, compare=False)


CallArg = Union[IndexRange, ArgBinding, StreamRef]


@dataclass(frozen=True)
class CallStmt:
    callee: str
    args: Tuple[CallArg, ...] = ()
    pos: Optional[SourcePos] = field(default=None, compare=False)

    @property
    def ranges(self) -> Tuple[IndexRange, ...]:
        return tuple(a for a in self.args if isinstance(a, IndexRange))

    @property
    def bindings(self) -> Tuple[ArgBinding, ...]:
        return tuple(a for a in self.args if isinstance(a, ArgBinding))

    @property
    def positional(self) -> Tuple[StreamRef, ...]:
        return tuple(a for a in self.args if isinstance(a, StreamRef))


@dataclass(frozen=True)
class FlowDef:
    name: str
    formals: Tuple[str, ...] = ()
    streams: Tuple[StreamDecl, ...] = ()
    body: Tuple[CallStmt, ...] = ()
    pos: Optional[SourcePos] = field(default=None, compare=False)

    def stream(self, name: str) -> Optional[StreamDecl]:
        for decl in self.streams:
            if decl.name == name:
                return decl
        return None

    @property
    def interface(self) -> Tuple[StreamDecl, ...]:
        return tuple(d for d in self.streams if d.direction is not Direction.INTERNAL)


@dataclass(frozen=True)
class Param:
    direction: Direction
    name: str
    pos: Optional[SourcePos] = field(default=None, compare=False)


@dataclass(frozen=True)
class Condition:
    kind: GuardKind
    stream: Optional[str] = None

    def holds(self, states: Mapping[str, str]) -> bool:
        """`states` maps stream names to DEFINED / EMPTY / UNDEFINED."""
        if self.kind is GuardKind.TRUE:
            return True
        defined = states.get(self.stream) == "DEFINED"
        return defined if self.kind is GuardKind.DEFINED else not defined


@dataclass(frozen=True)
class FunctionCall:
    function: str
    args: Tuple[StreamRef, ...] = ()
    pos: Optional[SourcePos] = field(default=None, compare=False)


@dataclass(frozen=True)
class ErrorMessage:
    target: str
    message: str
    pos: Optional[SourcePos] = field(default=None, compare=False)


@dataclass(frozen=True)
class AssignEmpty:
    target: str
    pos: Optional[SourcePos] = field(default=None, compare=False)


Action = Union[FunctionCall, ErrorMessage, AssignEmpty]

TRUE_CONDITION = Condition(GuardKind.TRUE)


@dataclass(frozen=True)
class GuardArm:
    condition: Condition
    actions: Tuple[Action, ...] = ()


@dataclass(frozen=True)
class GuardedBlock:
    arms: Tuple[GuardArm, ...]
    policy: str = "first"
    pos: Optional[SourcePos] = field(default=None, compare=False)


@dataclass(frozen=True)
class ModifierDef:
    name: str
    params: Tuple[Param, ...] = ()
    actions: Tuple[Action, ...] = ()
    guard: Optional[GuardedBlock] = None
    pos: Optional[SourcePos] = field(default=None, compare=False)

    @property
    def arms(self) -> Tuple[GuardArm, ...]:
        if self.guard is not None:
            return self.guard.arms
        return (GuardArm(TRUE_CONDITION, self.actions),)

    def param(self, name: str) -> Optional[Param]:
        for p in self.params:
            if p.name == name:
                return p
        return None

    def params_of(self, direction: Direction) -> Tuple[str, ...]:
        return tuple(p.name for p in self.params if p.direction is direction)


@dataclass(frozen=True)
class SourceUnit:
    flows: Tuple[FlowDef, ...] = ()
    modifiers: Tuple[ModifierDef, ...] = ()

    def flow(self, name: str) -> Optional[FlowDef]:
        for flow in self.flows:
            if flow.name == name:
                return flow
        return None

    def modifier(self, name: str) -> Optional[ModifierDef]:
        for modifier in self.modifiers:
            if modifier.name == name:
                return modifier
        return None

    def names(self) -> Tuple[str, ...]:
        return tuple(f.name for f in self.flows) + tuple(m.name for m in self.modifiers)

    def merge(self, other: "SourceUnit") -> "SourceUnit":
        known = set(self.names())
        for definition in (*other.flows, *other.modifiers):
            if definition.name in known:
                raise DuplicateName(definition.name, definition.pos)
            known.add(definition.name)
        return SourceUnit(self.flows + other.flows, self.modifiers + other.modifiers)


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    line: int = 1
    column: int = 1
    severity: str = "error"

    def to_dict(self) -> dict:
        return {
            "code": self.code,
            "message": self.message,
            "line": self.line,
            "column": self.column,
            "severity": self.severity,
        }

    def __str__(self) -> str:
        return f"{self.line}:{self.column} {self.code} {self.message}"


# ---------------------------------------------------------------- lexing


def tokenize(text: str) -> List[Token]:
    try:
        raw = list(rdsl_parser().lex(text))
    except (LarkError, RdslError) as exc:
        raise translate_lark_error(exc, text) from None
    tokens = []
    for tok in raw:
        value = str(tok)
        if tok.type == "NAME" and value not in KEYWORDS:
            kind = "ident"
        elif tok.type == "INT":
            kind = "int"
        elif tok.type == "STRING":
            kind = "string"
        elif value.lower() == "flow":
            kind = "kw-flow"
        elif value in KEYWORDS:
            kind = f"kw-{value}"
        else:
            kind = PUNCTUATION.get(value, tok.type.lower())
        tokens.append(Token(kind, value, tok.line, tok.column))
    return tokens


# --------------------------------------------------------------- parsing


@dataclass(frozen=True)
class _Formals:
    names: Tuple[str, ...]


@dataclass(frozen=True)
class _Dim:
    expr: Expr


@dataclass(frozen=True)
class _Subscript:
    expr: Expr


@dataclass(frozen=True)
class _Delay:
    periods: int


@dataclass(frozen=True)
class _Attrs:
    items: Tuple[Tuple[str, object], ...]


@dataclass(frozen=True)
class _PlainBody:
    actions: Tuple[Action, ...]


def _pos(meta) -> Optional[SourcePos]:
    if getattr(meta, "empty", True):
        return None
    return SourcePos(meta.line, meta.column)


class UnitBuilder(ExprBuilder):
    """Transforms a `unit` parse tree into a SourceUnit."""

    def __init__(self, lines: Sequence[str]):
        super().__init__()
        self._lines = lines

    def _trailing_comment(self, meta) -> Optional[str]:
        if getattr(meta, "empty", True):
            return None
        line = self._lines[meta.end_line - 1] if meta.end_line <= len(self._lines) else ""
        if "%" not in line:
            return None
        comment = line.split("%", 1)[1].strip()
        return comment or None

    @v_args(meta=True)
    def unit(self, meta, children):
        flows = tuple(c for c in children if isinstance(c, FlowDef))
        modifiers = tuple(c for c in children if isinstance(c, ModifierDef))
        return SourceUnit().merge(SourceUnit(flows, modifiers))

    def formals(self, children):
        return _Formals(tuple(str(c) for c in children))

    @v_args(meta=True)
    def flow_def(self, meta, children):
        name = str(children[0])
        formals: Tuple[str, ...] = ()
        streams: List[StreamDecl] = []
        body: List[CallStmt] = []
        for child in children[1:]:
            if isinstance(child, _Formals):
                formals = child.names
            elif isinstance(child, StreamDecl):
                streams.append(child)
            else:
                body.append(child)
        return FlowDef(name, formals, tuple(streams), tuple(body), _pos(meta))

    def dim(self, children):
        return _Dim(children[0])

    def dir_in(self, children):
        return Direction.IN

    def dir_out(self, children):
        return Direction.OUT

    def type_attr(self, children):
        return ("type", children[0])

    def label_attr(self, children):
        return ("label", str(children[0]))

    def attrs(self, children):
        return _Attrs(tuple(children))

    @v_args(meta=True)
    def stream_decl(self, meta, children):
        name = str(children[0])
        dims = tuple(c.expr for c in children[1:] if isinstance(c, _Dim))
        direction = Direction.INTERNAL
        label = None
        for child in children[1:]:
            if isinstance(child, _Attrs):
                for key, value in child.items:
                    if key == "type":
                        direction = value
                    else:
                        label = value
        return StreamDecl(name, dims, direction, label, self._trailing_comment(meta), _pos(meta))

    def subscript(self, children):
        return _Subscript(children[0])

    @v_args(meta=True)
    def delay(self, meta, children):
        periods = int(children[0])
        if periods < 1:
            raise RdslSyntaxError(_pos(meta) or SourcePos(1, 1), f"'@-{periods}'", ["@-k with k >= 1"])
        return _Delay(periods)

    @v_args(meta=True)
    def stream_ref(self, meta, children):
        name = str(children[0])
        indices = tuple(c.expr for c in children[1:] if isinstance(c, _Subscript))
        delay = next((c.periods for c in children[1:] if isinstance(c, _Delay)), 0)
        return StreamRef(name, indices, delay, _pos(meta))

    @v_args(meta=True)
    def index_range(self, meta, children):
        return IndexRange(str(children[0]), children[1], children[2], _pos(meta))

    @v_args(meta=True)
    def binding(self, meta, children):
        return ArgBinding(str(children[0]), children[1], _pos(meta))

    @v_args(meta=True)
    def call_stmt(self, meta, children):
        return CallStmt(str(children[0]), tuple(children[1:]), _pos(meta))

    @v_args(meta=True)
    def param(self, meta, children):
        return Param(children[0], str(children[1]), _pos(meta))

    def plain_body(self, children):
        return _PlainBody(tuple(children))

    def policy_first(self, children):
        return "first"

    @v_args(meta=True)
    def policy_other(self, meta, children):
        word = str(children[0])
        raise RdslSyntaxError(_pos(meta) or SourcePos(1, 1), f"guard policy '{word}'", ["first"])

    def cond_true(self, children):
        return TRUE_CONDITION

    def cond_defined(self, children):
        return Condition(GuardKind.DEFINED, str(children[0]))

    def cond_empty(self, children):
        return Condition(GuardKind.EMPTY, str(children[0]))

    def arm(self, children):
        return GuardArm(children[0], tuple(children[1:]))

    @v_args(meta=True)
    def guarded_block(self, meta, children):
        return GuardedBlock(tuple(children[1:]), children[0], _pos(meta))

    @v_args(meta=True)
    def call_action(self, meta, children):
        function = str(children[0])
        args = children[1:]
        pos = _pos(meta)
        if function == "error_message":
            if (
                len(args) != 2
                or not isinstance(args[0], StreamRef)
                or not isinstance(args[1], LarkToken)
            ):
                raise RdslSyntaxError(pos or SourcePos(1, 1), "error_message arguments", ["(stream, \"text\")"])
            return ErrorMessage(args[0].name, str(args[1])[1:-1], pos)
        for arg in args:
            if isinstance(arg, LarkToken):
                raise RdslSyntaxError(
                    SourcePos(arg.line, arg.column), "string literal", ["stream reference"]
                )
        return FunctionCall(function, tuple(args), pos)

    @v_args(meta=True)
    def assign_empty(self, meta, children):
        return AssignEmpty(str(children[0]), _pos(meta))

    @v_args(meta=True)
    def modifier_def(self, meta, children):
        name = str(children[0])
        params = tuple(c for c in children[1:] if isinstance(c, Param))
        body = children[-1]
        pos = _pos(meta)
        if isinstance(body, GuardedBlock):
            arms = body.arms
            if not arms or arms[-1].condition.kind is not GuardKind.TRUE:
                raise MissingTrueArm(name, body.pos or pos)
            return ModifierDef(name, params, (), body, pos)
        return ModifierDef(name, params, body.actions, None, pos)


def parse_unit(text: str) -> SourceUnit:
    """Parse RDSL source text into a SourceUnit.

    Lexing and parsing share one grammar; `tokenize` exposes the lexer
    stage on its own. Any malformed input raises an RdslError carrying a
    position, never a bare lark exception.
    """
    try:
        tree = rdsl_parser().parse(text, start="unit")
        return UnitBuilder(text.split("\n")).transform(tree)
    except (LarkError, RdslError) as exc:
        raise translate_lark_error(exc, text) from None
    except RecursionError:
        raise RdslSyntaxError(SourcePos(1, 1), "deeply nested input") from None


def parse_sources(texts: Mapping[str, str]) -> SourceUnit:
    """Parse several files into one compilation, in path order."""
    unit = SourceUnit()
    for path in sorted(texts):
        unit = unit.merge(parse_unit(texts[path]))
    return unit


# ---------------------------------------------------------- pretty print


def _format_ref(ref: StreamRef) -> str:
    text = ref.name + "".join(f"[{format_expr(e)}]" for e in ref.indices)
    return f"{text}@-{ref.delay}" if ref.delay else text


def _format_arg(arg: CallArg) -> str:
    if isinstance(arg, IndexRange):
        return f"{arg.var} = {format_expr(arg.lo)}:{format_expr(arg.hi)}"
    if isinstance(arg, ArgBinding):
        return f"{arg.formal} = {_format_ref(arg.ref)}"
    return _format_ref(arg)


def _format_stream(decl: StreamDecl) -> str:
    text = f"{decl.name} : stream" + "".join(f"[{format_expr(d)}]" for d in decl.dims)
    attrs = []
    if decl.direction is not Direction.INTERNAL:
        attrs.append(f"type = {decl.direction.value}")
    if decl.label:
        attrs.append(f"label = {decl.label}")
    if attrs:
        text += "{" + ", ".join(attrs) + "}"
    if decl.comment:
        text += f" % {decl.comment}"
    return text


def _format_action(action: Action) -> str:
    if isinstance(action, FunctionCall):
        return f"{action.function}({', '.join(_format_ref(a) for a in action.args)})"
    if isinstance(action, ErrorMessage):
        return f'error_message({action.target}, "{action.message}")'
    return f"{action.target} = EMPTY"


def _format_condition(condition: Condition) -> str:
    if condition.kind is GuardKind.TRUE:
        return "TRUE"
    op = "!=" if condition.kind is GuardKind.DEFINED else "=="
    return f"({condition.stream} {op} EMPTY)"


def _print_flow(flow: FlowDef) -> List[str]:
    header = f"flow {flow.name}"
    if flow.formals:
        header += f"({', '.join(flow.formals)})"
    lines = [header]
    lines += [f"  {_format_stream(d)}" for d in flow.streams]
    lines += [f"  {call.callee}({', '.join(_format_arg(a) for a in call.args)})" for call in flow.body]
    return lines


def _print_modifier(modifier: ModifierDef) -> List[str]:
    params = ", ".join(f"{p.direction.value} {p.name}" for p in modifier.params)
    lines = [f"modifier {modifier.name}({params})"]
    if modifier.guard is None:
        lines += [f"  {_format_action(a)}" for a in modifier.actions]
        return lines
    lines.append(f"  guarded{{{modifier.guard.policy}}}{{")
    for arm in modifier.guard.arms:
        lines.append(f"    {_format_condition(arm.condition)} :")
        lines += [f"      {_format_action(a)}" for a in arm.actions]
    lines.append("  }")
    return lines


def pretty_print(unit: SourceUnit) -> str:
    blocks = [_print_flow(f) for f in unit.flows] + [_print_modifier(m) for m in unit.modifiers]
    if not blocks:
        return ""
    return "\n\n".join("\n".join(block) for block in blocks) + "\n"


# ------------------------------------------------------------ validation


def _diag(code: str, message: str, pos: Optional[SourcePos], severity: str = "error") -> Diagnostic:
    pos = pos or SourcePos(1, 1)
    return Diagnostic(code, message, pos.line, pos.column, severity)


def callee_interface(unit: SourceUnit, callee: str) -> Optional[Tuple[str, ...]]:
    """Stream formals of a callee: IN/OUT streams of a flow, params of a modifier."""
    flow = unit.flow(callee)
    if flow is not None:
        return tuple(d.name for d in flow.interface)
    modifier = unit.modifier(callee)
    if modifier is not None:
        return tuple(p.name for p in modifier.params)
    return None


def split_call_args(call: CallStmt, index_names: Iterable[str]) -> Tuple[List[StreamRef], List[StreamRef]]:
    """Separate positional index arguments from positional stream arguments."""
    index_names = set(index_names)
    index_args, stream_args = [], []
    for ref in call.positional:
        if ref.name in index_names and not ref.indices and not ref.delay:
            index_args.append(ref)
        else:
            stream_args.append(ref)
    return index_args, stream_args


def _validate_flow(flow: FlowDef, unit: SourceUnit) -> List[Diagnostic]:
    diagnostics = []
    declared: Dict[str, StreamDecl] = {}
    for decl in flow.streams:
        if decl.name in declared or decl.name in flow.formals:
            diagnostics.append(_diag("DuplicateName", f"stream '{decl.name}' declared twice in '{flow.name}'", decl.pos))
        declared[decl.name] = decl
    for call in flow.body:
        scope = set(flow.formals) | {r.var for r in call.ranges}
        _, stream_args = split_call_args(call, scope)
        refs = [b.ref for b in call.bindings] + stream_args
        for ref in refs:
            if ref.name not in declared:
                diagnostics.append(
                    _diag("UndeclaredStream", f"'{flow.name}' uses undeclared stream '{ref.name}'", ref.pos or call.pos)
                )
        interface = callee_interface(unit, call.callee)
        if interface is None:
            continue
        for binding in call.bindings:
            if binding.formal not in interface:
                diagnostics.append(
                    _diag("UnknownFormal", f"'{call.callee}' has no formal '{binding.formal}'", binding.pos or call.pos)
                )
        if len(call.bindings) + len(stream_args) != len(interface):
            diagnostics.append(
                _diag(
                    "ArityMismatch",
                    f"'{call.callee}' takes {len(interface)} streams, got {len(call.bindings) + len(stream_args)}",
                    call.pos,
                )
            )
    return diagnostics


def _validate_modifier(modifier: ModifierDef) -> List[Diagnostic]:
    diagnostics = []
    inputs = set(modifier.params_of(Direction.IN))
    outputs = set(modifier.params_of(Direction.OUT))
    tested = {arm.condition.stream for arm in modifier.arms if arm.condition.kind is not GuardKind.TRUE}
    seen = set()
    for param in modifier.params:
        if param.name in seen:
            diagnostics.append(_diag("DuplicateName", f"parameter '{param.name}' repeated", param.pos))
        seen.add(param.name)
    if modifier.guard is not None:
        arms = modifier.guard.arms
        if not arms or arms[-1].condition.kind is not GuardKind.TRUE:
            diagnostics.append(_diag("MissingTrueArm", f"guarded block in '{modifier.name}' lacks a final TRUE arm", modifier.guard.pos or modifier.pos))
    for index, arm in enumerate(modifier.arms):
        condition = arm.condition
        if condition.kind is not GuardKind.TRUE and condition.stream not in inputs:
            diagnostics.append(
                _diag("GuardOnNonInput", f"arm {index} of '{modifier.name}' tests '{condition.stream}', not an IN param", modifier.pos)
            )
        assigned = set()
        for action in arm.actions:
            if isinstance(action, FunctionCall):
                for ref in action.args:
                    if ref.name in tested and not (
                        condition.kind is GuardKind.DEFINED and condition.stream == ref.name
                    ):
                        diagnostics.append(
                            _diag(
                                "UnguardedOptionalRead",
                                f"arm {index} of '{modifier.name}' reads '{ref.name}' without testing it",
                                ref.pos or action.pos,
                                "warning",
                            )
                        )
                    if ref.name not in seen:
                        diagnostics.append(
                            _diag("UndeclaredStream", f"'{modifier.name}' uses undeclared stream '{ref.name}'", ref.pos or action.pos)
                        )
                    elif ref.name in outputs:
                        assigned.add(ref.name)
            else:
                if action.target not in outputs:
                    diagnostics.append(
                        _diag("AssignToNonOutput", f"'{modifier.name}' assigns '{action.target}', not an OUT param", action.pos)
                    )
                assigned.add(action.target)
        for name in sorted(outputs - assigned):
            diagnostics.append(
                _diag(
                    "UnassignedOutput",
                    f"arm {index} of '{modifier.name}' never assigns '{name}', it stays EMPTY",
                    modifier.pos,
                    "warning",
                )
            )
    return diagnostics


def validate_unit(unit: SourceUnit) -> List[Diagnostic]:
    diagnostics: List[Diagnostic] = []
    seen: Dict[str, object] = {}
    for definition in (*unit.flows, *unit.modifiers):
        if definition.name in seen:
            diagnostics.append(_diag("DuplicateName", f"'{definition.name}' is defined more than once", definition.pos))
        seen[definition.name] = definition
    for flow in unit.flows:
        diagnostics += _validate_flow(flow, unit)
    for modifier in unit.modifiers:
        diagnostics += _validate_modifier(modifier)
    return sorted(diagnostics, key=lambda d: (d.line, d.column, d.code, d.message))
