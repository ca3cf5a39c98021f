"""
Errors - Exception hierarchy shared by every rdslc stage
"""

from dataclasses import dataclass
from typing import Iterable, Optional


@dataclass(frozen=True)
class SourcePos:
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


class RdslError(Exception):
    """Base class. `code` is the stable, machine-readable error name."""

    def __init__(self, message: str, pos: Optional[SourcePos] = None):
        super().__init__(message)
        self.message = message
        self.pos = pos

    @property
    def code(self) -> str:
        return type(self).__name__

    def to_dict(self) -> dict:
        data = {"code": self.code, "message": self.message}
        if self.pos is not None:
            data["line"] = self.pos.line
            data["column"] = self.pos.column
        return data


# core-model


class UnboundSymbol(RdslError):
    def __init__(self, name: str):
        super().__init__(f"symbol '{name}' is not bound")
        self.name = name


class DivisionByZero(RdslError):
    def __init__(self, expr_text: str = ""):
        suffix = f" in '{expr_text}'" if expr_text else ""
        super().__init__(f"division by zero{suffix}")


class ConflictingBinding(RdslError):
    def __init__(self, name: str, old: int, new: int, old_provenance: str, new_provenance: str):
        super().__init__(
            f"symbol '{name}' bound to {old} ({old_provenance}) and {new} ({new_provenance})"
        )
        self.name = name
        self.old = old
        self.new = new
        self.provenances = (old_provenance, new_provenance)


# rdsl-frontend


class IllegalCharacter(RdslError):
    def __init__(self, char: str, pos: SourcePos):
        super().__init__(f"illegal character {char!r} at {pos}", pos)
        self.char = char


class RdslSyntaxError(RdslError):
    def __init__(self, pos: SourcePos, found: str, expected: Iterable[str] = ()):
        expected = sorted(set(expected))
        hint = f", expected one of {', '.join(expected)}" if expected else ""
        super().__init__(f"unexpected {found} at {pos}{hint}", pos)
        self.found = found
        self.expected = tuple(expected)


class DuplicateName(RdslError):
    def __init__(self, name: str, pos: Optional[SourcePos] = None):
        super().__init__(f"'{name}' is defined more than once", pos)
        self.name = name


class MissingTrueArm(RdslError):
    def __init__(self, modifier: str, pos: Optional[SourcePos] = None):
        super().__init__(f"guarded block in '{modifier}' does not end with a TRUE arm", pos)
        self.modifier = modifier


# constraint-ingest


class UnknownKind(RdslError):
    def __init__(self, kind: str, api_version: str):
        super().__init__(f"unknown kind '{kind}' for apiVersion '{api_version}'")
        self.kind = kind


class UnknownApiVersion(RdslError):
    def __init__(self, api_version: str):
        super().__init__(f"unknown apiVersion '{api_version}'")
        self.api_version = api_version


class MissingField(RdslError):
    def __init__(self, path: str, document: str = ""):
        where = f" in '{document}'" if document else ""
        super().__init__(f"missing field '{path}'{where}")
        self.path = path


class UnitNotClock(RdslError):
    def __init__(self, unit: str, document: str = ""):
        super().__init__(f"unit '{unit}' is not supported in '{document}', only 'clock'")
        self.unit = unit


class AmbiguousTarget(RdslError):
    def __init__(self, name: str):
        super().__init__(f"'{name}' is both a bound symbol and a timing label")
        self.name = name


class MissingAssignment(RdslError):
    def __init__(self, name: str):
        super().__init__(f"no value assigned to constraint target '{name}'")
        self.name = name


class ConflictingValue(RdslError):
    def __init__(self, name: str, first: int, second: int):
        super().__init__(f"'{name}' is pinned to both {first} and {second}")
        self.name = name


# hardware-model


class DanglingReference(RdslError):
    def __init__(self, name: str, referrer: str):
        super().__init__(f"'{referrer}' references unknown '{name}'")
        self.name = name
        self.referrer = referrer


class MalformedPatternName(RdslError):
    def __init__(self, name: str, reason: str):
        super().__init__(f"malformed pattern name '{name}': {reason}")
        self.name = name


class UnknownPattern(RdslError):
    def __init__(self, pattern: str, function: str):
        super().__init__(f"function '{function}' lists unknown pattern '{pattern}'")
        self.pattern = pattern
        self.function = function


class NegativeCost(RdslError):
    def __init__(self, function: str, field_name: str, value: int):
        super().__init__(f"{field_name} of '{function}' grounds to {value} < 0")
        self.function = function


class EmptyCompatibleSet(RdslError):
    def __init__(self, subject: str, detail: str = ""):
        suffix = f": {detail}" if detail else ""
        super().__init__(f"no compatible pattern for '{subject}'{suffix}")
        self.subject = subject


# elaborator


class RecursiveFlow(RdslError):
    def __init__(self, chain: Iterable[str]):
        chain = list(chain)
        super().__init__(f"recursive flow call: {' -> '.join(chain)}")
        self.chain = tuple(chain)


class CallDepthExceeded(RdslError):
    def __init__(self, depth: int, path: str):
        super().__init__(f"call depth {depth} exceeded at '{path}'")


class UnboundDimension(RdslError):
    def __init__(self, stream: str, detail: str):
        super().__init__(f"dimension of '{stream}' cannot be grounded: {detail}")
        self.stream = stream


class UnboundIndex(RdslError):
    def __init__(self, name: str, where: str):
        super().__init__(f"index '{name}' is not bound when calling '{where}'")
        self.name = name


class ShapeMismatch(RdslError):
    def __init__(self, formal: str, actual: str, detail: str):
        super().__init__(f"cannot bind '{formal}' to '{actual}': {detail}")


class DoubleDefine(RdslError):
    def __init__(self, buffer: str, first: str, second: str):
        super().__init__(f"buffer '{buffer}' is written by both '{first}' and '{second}'")
        self.buffer = buffer
        self.producers = (first, second)


class DanglingConsumer(RdslError):
    def __init__(self, reference: str, consumer: str):
        super().__init__(f"'{consumer}' reads '{reference}' which nothing produces")
        self.reference = reference
        self.consumer = consumer


class UnguardedRead(RdslError):
    def __init__(self, task: str, param: str, arm: int):
        super().__init__(f"arm {arm} of '{task}' reads optional '{param}' without testing it != EMPTY")
        self.task = task
        self.param = param
        self.arm = arm


class UnknownFunction(RdslError):
    def __init__(self, name: str, modifier: str = ""):
        where = f" (modifier '{modifier}')" if modifier else ""
        super().__init__(f"no SDK metadata for function '{name}'{where}")
        self.name = name


class UnknownCallee(RdslError):
    def __init__(self, name: str, caller: str):
        super().__init__(f"'{caller}' calls unknown flow or modifier '{name}'")
        self.name = name


class CyclicDependency(RdslError):
    def __init__(self, cycle: Iterable[str]):
        cycle = list(cycle)
        super().__init__(f"same-period dependency cycle: {' -> '.join(cycle)}")
        self.cycle = tuple(cycle)


# scheduler


class Infeasible(RdslError):
    def __init__(self, cause: str, detail: str = ""):
        suffix = f": {detail}" if detail else ""
        super().__init__(f"infeasible ({cause}){suffix}")
        self.cause = cause
        self.detail = detail


class TooLarge(RdslError):
    def __init__(self, what: str, size: int, limit: int):
        super().__init__(f"instance too large for the oracle: {size} {what} > {limit}")


class UnknownSink(RdslError):
    def __init__(self, sink: str):
        super().__init__(f"unknown sink '{sink}'")
        self.sink = sink


# emitters / cli


class ObjectiveMismatch(RdslError):
    def __init__(self, first: str, second: str):
        super().__init__(f"schedules scored under different objectives: {first} vs {second}")


class ScheduleMismatch(RdslError):
    def __init__(self, detail: str):
        super().__init__(f"schedule does not match the scenario: {detail}")


class ScenarioError(RdslError):
    def __init__(self, detail: str, path: str = ""):
        where = f" ({path})" if path else ""
        super().__init__(f"{detail}{where}")
        self.path = path
