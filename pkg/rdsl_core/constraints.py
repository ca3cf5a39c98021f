"""
Constraints - Kubernetes-style timing constraint documents

Two document shapes share the `timing equality` kind: a value constraint
pinning one variable, and an equation constraint whose single letters are
bound to target identifiers. Targets resolve to bound symbols, schedule
timing labels, or free variables the solver must pick a witness for.
"""

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, FrozenSet, Iterable, List, Mapping, Optional, Tuple, Union

import yaml
from loguru import logger

from utils.colors import Colors

from .errors import (
    AmbiguousTarget,
    ConflictingValue,
    DivisionByZero,
    MissingAssignment,
    MissingField,
    RdslError,
    UnboundSymbol,
    UnitNotClock,
    UnknownApiVersion,
    UnknownKind,
)
from .expr import RELATIONS, Chain, Equation, eval_expr, format_expr, free_names, parse_expr, substitute
from .symbols import SymbolTable

API_VERSION = "rdsl/v0"
TIMING_EQUALITY = "timing equality"
WITNESS_UPPER = 1 << 40
LETTER_KEY = re.compile(r"[A-Za-z]\Z")


class Relation(str, Enum):
    EQUAL = "equal"
    LE = "le"
    GE = "ge"

    @property
    def symbol(self) -> str:
        return {"equal": "=", "le": "<=", "ge": ">="}[self.value]


class TargetRole(str, Enum):
    FIXED = "fixed"
    LABEL = "label"
    FREE = "free"


@dataclass(frozen=True)
class ValueConstraint:
    relation: Relation
    variable_name: str
    value: int
    unit: str = "clock"

    @property
    def targets(self) -> Tuple[str, ...]:
        return (self.variable_name,)

    def to_dict(self) -> dict:
        return {
            "constraint": self.relation.value,
            "variable_name": self.variable_name,
            "unit": self.unit,
            "value": self.value,
        }


@dataclass(frozen=True)
class EquationConstraint:
    equation: Chain
    bindings: Tuple[Tuple[str, str], ...]
    unit: str = "clock"

    @property
    def targets(self) -> Tuple[str, ...]:
        return tuple(sorted({target for _, target in self.bindings}))

    @property
    def resolved(self) -> Chain:
        """The equation with letters replaced by their targets."""
        return substitute(self.equation, dict(self.bindings))

    def to_dict(self) -> dict:
        data = {"equation": format_expr(self.equation), "unit": self.unit}
        data.update(dict(self.bindings))
        return data


ConstraintSpec = Union[ValueConstraint, EquationConstraint]


@dataclass(frozen=True)
class ConstraintDoc:
    name: str
    spec: ConstraintSpec
    api_version: str = API_VERSION
    kind: str = TIMING_EQUALITY
    extra_fields: Tuple[str, ...] = field(default=(), compare=False)

    def to_dict(self) -> dict:
        return {
            "apiVersion": self.api_version,
            "kind": self.kind,
            "metadata": {"name": self.name},
            "spec": self.spec.to_dict(),
        }


@dataclass(frozen=True)
class ConstraintViolation:
    constraint: str
    detail: str
    excess: int = 0

    def to_dict(self) -> dict:
        return {"constraint": self.constraint, "detail": self.detail, "excess": self.excess}


# ----------------------------------------------------------------- parsing

KindParser = Callable[[str, dict], Tuple[ConstraintSpec, Tuple[str, ...]]]
_KIND_REGISTRY: Dict[Tuple[str, str], KindParser] = {}


def register_kind(api_version: str, kind: str):
    """Register a spec parser for one (apiVersion, kind) pair."""

    def decorator(func: KindParser) -> KindParser:
        _KIND_REGISTRY[(api_version, kind)] = func
        return func

    return decorator


def _check_unit(spec: dict, name: str) -> str:
    if "unit" not in spec:
        raise MissingField("spec.unit", name)
    unit = str(spec["unit"])
    if unit != "clock":
        raise UnitNotClock(unit, name)
    return unit


def _require_int(value, path: str, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise RdslError(f"'{path}' of '{name}' must be an integer, got {value!r}")
    return value


@register_kind(API_VERSION, TIMING_EQUALITY)
def _parse_timing_equality(name: str, spec: dict) -> Tuple[ConstraintSpec, Tuple[str, ...]]:
    unit = _check_unit(spec, name)
    if "equation" in spec:
        equation = parse_expr(str(spec["equation"]))
        if not isinstance(equation, Chain):
            raise RdslError(f"equation of '{name}' has no relation")
        letters = free_names(equation)
        bindings = {}
        extra = []
        for key, value in spec.items():
            if key in ("equation", "unit"):
                continue
            if LETTER_KEY.match(str(key)):
                if key not in letters:
                    raise RdslError(f"binding '{key}' of '{name}' does not appear in the equation")
                bindings[str(key)] = str(value)
            else:
                extra.append(f"spec.{key}")
        for letter in sorted(letters):
            if letter not in bindings:
                raise MissingField(f"spec.{letter}", name)
        return EquationConstraint(equation, tuple(sorted(bindings.items())), unit), tuple(extra)

    for key in ("constraint", "variable_name", "value"):
        if key not in spec:
            raise MissingField(f"spec.{key}", name)
    try:
        relation = Relation(str(spec["constraint"]))
    except ValueError:
        raise RdslError(f"unknown relation '{spec['constraint']}' in '{name}'") from None
    value = _require_int(spec["value"], "spec.value", name)
    extra = tuple(
        f"spec.{key}" for key in spec if key not in ("constraint", "variable_name", "value", "unit")
    )
    return ValueConstraint(relation, str(spec["variable_name"]), value, unit), extra


def _parse_document(doc: dict) -> ConstraintDoc:
    if not isinstance(doc, dict):
        raise RdslError(f"constraint document must be a mapping, got {type(doc).__name__}")
    for key in ("apiVersion", "kind"):
        if key not in doc:
            raise MissingField(key)
    api_version = str(doc["apiVersion"])
    kind = str(doc["kind"])
    if api_version not in {api for api, _ in _KIND_REGISTRY}:
        raise UnknownApiVersion(api_version)
    parser = _KIND_REGISTRY.get((api_version, kind))
    if parser is None:
        raise UnknownKind(kind, api_version)
    metadata = doc.get("metadata")
    if not isinstance(metadata, dict) or "name" not in metadata:
        raise MissingField("metadata.name")
    name = str(metadata["name"])
    if not isinstance(doc.get("spec"), dict):
        raise MissingField("spec", name)
    spec, extra = parser(name, doc["spec"])
    extra = extra + tuple(k for k in doc if k not in ("apiVersion", "kind", "metadata", "spec"))
    for path in extra:
        logger.warning(f"{Colors.WARNING}[CONSTRAINTS] ignoring unknown field '{path}' in '{name}'")
    return ConstraintDoc(name, spec, api_version, kind, extra)


def parse_constraints(text: str) -> List[ConstraintDoc]:
    try:
        documents = list(yaml.safe_load_all(text))
    except yaml.YAMLError as exc:
        raise RdslError(f"invalid YAML: {exc}") from None
    return [_parse_document(doc) for doc in documents if doc is not None]


def dump_constraints(docs: Iterable[ConstraintDoc]) -> str:
    return yaml.safe_dump_all([d.to_dict() for d in docs], sort_keys=True)


# --------------------------------------------------------------- resolving


@dataclass(frozen=True)
class ConstraintSet:
    docs: Tuple[ConstraintDoc, ...]
    roles: Mapping[str, TargetRole]
    fixed: Mapping[str, int]
    period_variable: str = "modem_period"

    def targets(self) -> Tuple[str, ...]:
        return tuple(sorted(self.roles))

    def free_variables(self) -> Tuple[str, ...]:
        return tuple(sorted(n for n, r in self.roles.items() if r is TargetRole.FREE))

    def labels(self) -> Tuple[str, ...]:
        return tuple(sorted(n for n, r in self.roles.items() if r is TargetRole.LABEL))

    def hyperperiod(self) -> Optional[int]:
        for doc in self.docs:
            spec = doc.spec
            if (
                isinstance(spec, ValueConstraint)
                and spec.relation is Relation.EQUAL
                and spec.variable_name == self.period_variable
            ):
                return spec.value
        return self.fixed.get(self.period_variable)

    def period_constraint_name(self) -> str:
        for doc in self.docs:
            if isinstance(doc.spec, ValueConstraint) and doc.spec.variable_name == self.period_variable:
                return doc.name
        return self.period_variable

    def without(self, name: str) -> "ConstraintSet":
        return ConstraintSet(
            tuple(d for d in self.docs if d.name != name), self.roles, self.fixed, self.period_variable
        )

    def to_dict(self) -> dict:
        return {
            "constraints": sorted(d.name for d in self.docs),
            "roles": {n: self.roles[n].value for n in sorted(self.roles)},
            "fixed": {n: self.fixed[n] for n in sorted(self.fixed)},
        }


def empty_constraints(period_variable: str = "modem_period") -> ConstraintSet:
    return ConstraintSet((), {}, {}, period_variable)


def resolve_references(
    docs: Iterable[ConstraintDoc],
    symbols: SymbolTable,
    labels: Iterable[str] = (),
    period_variable: str = "modem_period",
) -> ConstraintSet:
    docs = tuple(sorted(docs, key=lambda d: d.name))
    labels = frozenset(labels)
    roles: Dict[str, TargetRole] = {}
    fixed: Dict[str, int] = {}
    pinned: Dict[str, int] = {}
    for doc in docs:
        spec = doc.spec
        if isinstance(spec, ValueConstraint) and spec.relation is Relation.EQUAL:
            previous = pinned.get(spec.variable_name)
            if previous is not None and previous != spec.value:
                raise ConflictingValue(spec.variable_name, previous, spec.value)
            pinned[spec.variable_name] = spec.value
        for target in spec.targets:
            is_symbol = symbols.is_bound(target)
            is_label = target in labels
            if is_symbol and is_label:
                raise AmbiguousTarget(target)
            if is_symbol:
                roles[target] = TargetRole.FIXED
                fixed[target] = symbols.lookup(target)
            elif is_label:
                roles[target] = TargetRole.LABEL
            else:
                roles[target] = TargetRole.FREE
    if symbols.is_bound(period_variable):
        fixed.setdefault(period_variable, symbols.lookup(period_variable))
    return ConstraintSet(docs, roles, fixed, period_variable)


# ------------------------------------------------------------- satisfaction


def _excess(lhs: int, rel: str, rhs: int) -> int:
    if rel == "<":
        return lhs - rhs + 1
    if rel == "<=":
        return lhs - rhs
    if rel == ">":
        return rhs - lhs + 1
    if rel == ">=":
        return rhs - lhs
    return abs(lhs - rhs)


def _check_doc(doc: ConstraintDoc, values: Mapping[str, int]) -> List[ConstraintViolation]:
    spec = doc.spec
    for target in spec.targets:
        if target not in values:
            raise MissingAssignment(target)
    if isinstance(spec, ValueConstraint):
        actual = values[spec.variable_name]
        rel = spec.relation.symbol
        if RELATIONS[rel](actual, spec.value):
            return []
        return [
            ConstraintViolation(
                doc.name,
                f"{spec.variable_name} = {actual}, required {rel} {spec.value}",
                _excess(actual, rel, spec.value),
            )
        ]
    violations = []
    resolved = spec.resolved
    for lhs, rel, rhs in resolved.pairs():
        try:
            left = eval_expr(lhs, values)
            right = eval_expr(rhs, values)
        except DivisionByZero as exc:
            violations.append(ConstraintViolation(doc.name, exc.message, 1))
            continue
        if not RELATIONS[rel](left, right):
            violations.append(
                ConstraintViolation(
                    doc.name,
                    f"{format_expr(lhs)} {rel} {format_expr(rhs)} fails ({left} {rel} {right})",
                    _excess(left, rel, right),
                )
            )
    return violations


def check_satisfaction(cset: ConstraintSet, assignment: Mapping[str, int]) -> List[ConstraintViolation]:
    values = dict(cset.fixed)
    values.update(assignment)
    violations = []
    for doc in cset.docs:
        violations += _check_doc(doc, values)
    return sorted(violations, key=lambda v: (v.constraint, v.detail))


# ---------------------------------------------------------------- witnesses


def _narrow(f: Callable[[int], Optional[int]], rel: str, lo: int, hi: int) -> Tuple[int, int]:
    """Interval of v in [lo, hi] where f(v) REL 0, assuming f monotone."""
    test = RELATIONS[rel]

    def holds(v: int) -> bool:
        value = f(v)
        return value is not None and test(value, 0)

    at_lo, at_hi = holds(lo), holds(hi)
    if at_lo and at_hi:
        return lo, hi
    if at_lo:
        a, b = lo, hi
        while b - a > 1:
            mid = (a + b) // 2
            a, b = (mid, b) if holds(mid) else (a, mid)
        return lo, a
    if at_hi:
        a, b = lo, hi
        while b - a > 1:
            mid = (a + b) // 2
            a, b = (a, mid) if holds(mid) else (mid, b)
        return b, hi
    if rel != "=":
        return 1, 0
    f_lo, f_hi = f(lo), f(hi)
    if f_lo is None or f_hi is None or (f_lo > 0) == (f_hi > 0) and f_lo != 0:
        return 1, 0
    increasing = f_lo < f_hi
    a, b = lo, hi
    while b - a > 1:
        mid = (a + b) // 2
        value = f(mid)
        if value is None:
            return 1, 0
        if (value >= 0) == increasing:
            b = mid
        else:
            a = mid
    start = b if holds(b) else a
    if not holds(start):
        return 1, 0
    a, b = start, hi
    while b - a > 1:
        mid = (a + b) // 2
        a, b = (mid, b) if holds(mid) else (a, mid)
    return start, a


def solve_witnesses(cset: ConstraintSet, known: Mapping[str, int]) -> Optional[Dict[str, int]]:
    """Pick values for free variables, one at a time in name order.

    Each relation is assumed monotone in the variable being solved; other
    still-unsolved free variables are taken as 0. Returns None when some
    variable has no admissible value.
    """
    values: Dict[str, int] = dict(cset.fixed)
    values.update(known)
    free = cset.free_variables()
    witnesses: Dict[str, int] = {}
    for name in free:
        lo, hi = 0, WITNESS_UPPER
        for doc in cset.docs:
            spec = doc.spec
            if isinstance(spec, ValueConstraint) and spec.variable_name == name:
                if spec.relation is Relation.EQUAL:
                    lo, hi = max(lo, spec.value), min(hi, spec.value)
                elif spec.relation is Relation.LE:
                    hi = min(hi, spec.value)
                else:
                    lo = max(lo, spec.value)
        for doc in cset.docs:
            spec = doc.spec
            if not isinstance(spec, EquationConstraint) or name not in spec.targets:
                continue
            resolved = spec.resolved
            provisional = {n: 0 for n in free_names(resolved) if n not in values and n != name}
            for lhs, rel, rhs in resolved.pairs():
                if name not in free_names(lhs) | free_names(rhs):
                    continue

                def difference(v: int, lhs=lhs, rhs=rhs) -> Optional[int]:
                    scope = {**values, **provisional, name: v}
                    try:
                        return eval_expr(lhs, scope) - eval_expr(rhs, scope)
                    except (DivisionByZero, UnboundSymbol):
                        return None

                if lo > hi:
                    break
                lo, hi = _narrow(difference, rel, lo, hi)
        if lo > hi:
            return None
        values[name] = lo
        witnesses[name] = lo
    return witnesses


def relevant_names(cset: ConstraintSet) -> FrozenSet[str]:
    names = set()
    for doc in cset.docs:
        names.update(doc.spec.targets)
    return frozenset(names)
