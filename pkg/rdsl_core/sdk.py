"""
SDK - Function metadata with symbolic cost fields

Sizes and runtimes may be constants or expressions over system symbols;
they stay symbolic until a scenario grounds them.
"""

from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Tuple

import yaml

from .constraints import API_VERSION
from .errors import MissingField, NegativeCost, RdslError, UnknownApiVersion, UnknownKind, UnknownPattern
from .expr import Expr, eval_expr, expr_from_value, format_expr
from .platform import PlatformDesc
from .symbols import SymbolTable

SDK_KIND = "SDK"
ERROR_MESSAGE_FUNCTION = "__error_message"
ASSIGN_EMPTY_FUNCTION = "__assign_empty"
RESERVED_FUNCTIONS = frozenset({ERROR_MESSAGE_FUNCTION, ASSIGN_EMPTY_FUNCTION})
COST_FIELDS = ("elementsize", "internalsize", "runtime")


@dataclass(frozen=True)
class SdkFunctionMeta:
    name: str
    available_patterns: Tuple[str, ...]
    elementsize: Expr
    internalsize: Expr
    runtime: Expr

    def ground(self, symbols: SymbolTable) -> "GroundedMeta":
        values = {}
        for field_name in COST_FIELDS:
            value = eval_expr(getattr(self, field_name), symbols)
            if value < 0:
                raise NegativeCost(self.name, field_name, value)
            values[field_name] = value
        return GroundedMeta(self.name, self.available_patterns, **values)

    def to_dict(self) -> dict:
        return {
            "apiVersion": API_VERSION,
            "kind": SDK_KIND,
            "metadata": {"name": self.name},
            "spec": {
                "available patterns": list(self.available_patterns),
                **{f: format_expr(getattr(self, f)) for f in COST_FIELDS},
            },
        }


@dataclass(frozen=True)
class GroundedMeta:
    name: str
    available_patterns: Tuple[str, ...]
    elementsize: int
    internalsize: int
    runtime: int


def _meta_from_document(doc) -> SdkFunctionMeta:
    if not isinstance(doc, dict):
        raise RdslError("SDK document must be a mapping")
    for key in ("apiVersion", "kind"):
        if key not in doc:
            raise MissingField(key)
    if str(doc["apiVersion"]) != API_VERSION:
        raise UnknownApiVersion(str(doc["apiVersion"]))
    if str(doc["kind"]) != SDK_KIND:
        raise UnknownKind(str(doc["kind"]), API_VERSION)
    metadata = doc.get("metadata")
    if not isinstance(metadata, dict) or "name" not in metadata:
        raise MissingField("metadata.name")
    name = str(metadata["name"])
    spec = doc.get("spec")
    if not isinstance(spec, dict):
        raise MissingField("spec", name)
    patterns = spec.get("available patterns", spec.get("available_patterns"))
    if patterns is None:
        if name not in RESERVED_FUNCTIONS:
            raise MissingField("spec.available patterns", name)
        patterns = []
    costs = {}
    for field_name in COST_FIELDS:
        if field_name in spec:
            costs[field_name] = expr_from_value(spec[field_name])
        elif field_name == "runtime" or name not in RESERVED_FUNCTIONS:
            raise MissingField(f"spec.{field_name}", name)
        else:
            costs[field_name] = expr_from_value(0)
    return SdkFunctionMeta(name, tuple(str(p) for p in patterns), **costs)


def parse_sdk_meta(
    text: str, symbols: Optional[SymbolTable] = None, platform: Optional[PlatformDesc] = None
) -> List[SdkFunctionMeta]:
    """Parse SDK metadata documents.

    With `platform`, every listed pattern must exist there. With `symbols`,
    the cost fields are also grounded once as a check; the returned
    metadata keeps the expressions.
    """
    try:
        documents = [d for d in yaml.safe_load_all(text) if d is not None]
    except yaml.YAMLError as exc:
        raise RdslError(f"invalid SDK YAML: {exc}") from None
    metas = [_meta_from_document(doc) for doc in documents]
    if platform is not None:
        validate_against_platform(metas, platform)
    if symbols is not None:
        for meta in metas:
            meta.ground(symbols)
    return metas


class SdkCatalog:
    """Grounded metadata by function name, plus guard action costs."""

    def __init__(self, metas: Iterable[GroundedMeta], default_action_cost: int = 10):
        self._metas: Dict[str, GroundedMeta] = {}
        for meta in metas:
            if meta.name in self._metas:
                raise RdslError(f"SDK function '{meta.name}' is described more than once")
            self._metas[meta.name] = meta
        self.default_action_cost = default_action_cost

    @classmethod
    def ground(cls, metas: Iterable[SdkFunctionMeta], symbols: SymbolTable, default_action_cost: int = 10) -> "SdkCatalog":
        return cls((m.ground(symbols) for m in metas), default_action_cost)

    def get(self, name: str) -> Optional[GroundedMeta]:
        if name in RESERVED_FUNCTIONS:
            return None
        return self._metas.get(name)

    def __contains__(self, name: str) -> bool:
        return name in self._metas and name not in RESERVED_FUNCTIONS

    def names(self) -> Tuple[str, ...]:
        return tuple(sorted(n for n in self._metas if n not in RESERVED_FUNCTIONS))

    def action_cost(self, reserved: str) -> int:
        meta = self._metas.get(reserved)
        return meta.runtime if meta is not None else self.default_action_cost

    @property
    def error_message_cost(self) -> int:
        return self.action_cost(ERROR_MESSAGE_FUNCTION)

    @property
    def assign_empty_cost(self) -> int:
        return self.action_cost(ASSIGN_EMPTY_FUNCTION)


def validate_against_platform(metas: Iterable[SdkFunctionMeta], platform: PlatformDesc) -> None:
    for meta in metas:
        for pattern in meta.available_patterns:
            if not platform.has_pattern(pattern):
                raise UnknownPattern(pattern, meta.name)

