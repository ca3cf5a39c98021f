"""
Expr - Integer expression language with comparison chains

Expressions appear in stream dimensions, index ranges, constraint equations
and SDK cost fields. Arithmetic is integer-only; `/` truncates toward zero.
"""

import operator
from dataclasses import dataclass
from typing import Callable, Dict, FrozenSet, List, Mapping, Tuple, Union

from lark import Transformer, v_args
from lark.exceptions import LarkError

from .errors import DivisionByZero, RdslError, UnboundSymbol
from .parsing import rdsl_parser, translate_lark_error
from .symbols import SymbolTable


@dataclass(frozen=True)
class Num:
    value: int


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Chain:
    """`e1 REL e2 REL e3 ...`, the conjunction of its pairwise relations."""

    operands: Tuple["Expr", ...]
    relations: Tuple[str, ...]

    def pairs(self) -> List[Tuple["Expr", str, "Expr"]]:
        return [
            (self.operands[i], rel, self.operands[i + 1])
            for i, rel in enumerate(self.relations)
        ]


Expr = Union[Num, Var, Neg, BinOp]
Equation = Union[Num, Var, Neg, BinOp, Chain]

RELATIONS: Dict[str, Callable[[int, int], bool]] = {
    "<": operator.lt,
    "<=": operator.le,
    "=": operator.eq,
    ">=": operator.ge,
    ">": operator.gt,
}

_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2}

Lookup = Union[SymbolTable, Mapping[str, int]]


class ExprBuilder(Transformer):
    """Builds Expr nodes from the expression rules of the shared grammar."""

    def num(self, children):
        return Num(int(children[0]))

    def var(self, children):
        return Var(str(children[0]))

    def neg(self, children):
        return Neg(children[0])

    def add(self, children):
        return BinOp("+", children[0], children[1])

    def sub(self, children):
        return BinOp("-", children[0], children[1])

    def mul(self, children):
        return BinOp("*", children[0], children[1])

    def div(self, children):
        return BinOp("/", children[0], children[1])

    def relation(self, children):
        return str(children[0])

    def equation(self, children):
        if len(children) == 1:
            return children[0]
        return Chain(tuple(children[0::2]), tuple(children[1::2]))


def parse_expr(text: str) -> Equation:
    """Parse an integer expression or a comparison chain."""
    try:
        tree = rdsl_parser().parse(text, start="equation")
        return ExprBuilder().transform(tree)
    except (LarkError, RdslError) as exc:
        raise translate_lark_error(exc, text) from None


def _resolve(symbols: Lookup, name: str) -> int:
    if isinstance(symbols, SymbolTable):
        return symbols.lookup(name)
    if name not in symbols or symbols[name] is None:
        raise UnboundSymbol(name)
    return symbols[name]


def truncating_div(a: int, b: int) -> int:
    if b == 0:
        raise DivisionByZero()
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def eval_expr(expr: Equation, symbols: Lookup) -> Union[int, bool]:
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Var):
        return _resolve(symbols, expr.name)
    if isinstance(expr, Neg):
        return -eval_expr(expr.operand, symbols)
    if isinstance(expr, BinOp):
        left = eval_expr(expr.left, symbols)
        right = eval_expr(expr.right, symbols)
        if expr.op == "+":
            return left + right
        if expr.op == "-":
            return left - right
        if expr.op == "*":
            return left * right
        try:
            return truncating_div(left, right)
        except DivisionByZero:
            raise DivisionByZero(format_expr(expr)) from None
    if isinstance(expr, Chain):
        values = [eval_expr(operand, symbols) for operand in expr.operands]
        return all(
            RELATIONS[rel](values[i], values[i + 1]) for i, rel in enumerate(expr.relations)
        )
    raise RdslError(f"not an expression: {expr!r}")


def free_names(expr: Equation) -> FrozenSet[str]:
    if isinstance(expr, Var):
        return frozenset({expr.name})
    if isinstance(expr, Neg):
        return free_names(expr.operand)
    if isinstance(expr, BinOp):
        return free_names(expr.left) | free_names(expr.right)
    if isinstance(expr, Chain):
        names: FrozenSet[str] = frozenset()
        for operand in expr.operands:
            names |= free_names(operand)
        return names
    return frozenset()


def substitute(expr: Equation, renames: Mapping[str, str]) -> Equation:
    """Rename identifiers, e.g. constraint letters to their targets."""
    if isinstance(expr, Var):
        return Var(renames.get(expr.name, expr.name))
    if isinstance(expr, Neg):
        return Neg(substitute(expr.operand, renames))
    if isinstance(expr, BinOp):
        return BinOp(expr.op, substitute(expr.left, renames), substitute(expr.right, renames))
    if isinstance(expr, Chain):
        return Chain(tuple(substitute(o, renames) for o in expr.operands), expr.relations)
    return expr


def _precedence(expr: Expr) -> int:
    if isinstance(expr, BinOp):
        return _PRECEDENCE[expr.op]
    if isinstance(expr, Neg):
        return 3
    return 4


def format_expr(expr: Equation) -> str:
    """Minimal-parenthesis rendering that re-parses to the same tree."""
    if isinstance(expr, Num):
        return str(expr.value)
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Neg):
        inner = format_expr(expr.operand)
        return f"-({inner})" if _precedence(expr.operand) < 3 else f"-{inner}"
    if isinstance(expr, BinOp):
        prec = _PRECEDENCE[expr.op]
        left = format_expr(expr.left)
        right = format_expr(expr.right)
        if _precedence(expr.left) < prec:
            left = f"({left})"
        if _precedence(expr.right) <= prec:
            right = f"({right})"
        return f"{left} {expr.op} {right}"
    if isinstance(expr, Chain):
        parts = [format_expr(expr.operands[0])]
        for rel, operand in zip(expr.relations, expr.operands[1:]):
            parts.append(rel)
            parts.append(format_expr(operand))
        return " ".join(parts)
    raise RdslError(f"not an expression: {expr!r}")


def expr_from_value(value: Union[int, str, Equation]) -> Expr:
    """Accept YAML scalars: integers stay literals, strings are parsed."""
    if isinstance(value, bool):
        raise RdslError(f"expected an integer or expression, got {value!r}")
    if isinstance(value, int):
        return Num(value)
    if isinstance(value, str):
        parsed = parse_expr(value)
        if isinstance(parsed, Chain):
            raise RdslError(f"'{value}' is a comparison, expected an arithmetic expression")
        return parsed
    if isinstance(value, (Num, Var, Neg, BinOp)):
        return value
    raise RdslError(f"expected an integer or expression, got {value!r}")
