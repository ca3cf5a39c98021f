"""
Symbols - Immutable symbol table for system values and dimension symbols
"""

import re
from dataclasses import dataclass
from types import MappingProxyType
from typing import Dict, Iterable, Iterator, Mapping, Optional, Tuple

from .errors import ConflictingBinding, RdslError, UnboundSymbol

IDENTIFIER = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
UNBOUND = None


@dataclass(frozen=True)
class Binding:
    name: str
    value: Optional[int]
    provenance: str

    def to_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "provenance": self.provenance}


class SymbolTable:
    """Name -> integer map with provenance.

    Tables are values: `bind` returns a new table and leaves the receiver
    untouched, so one table can be shared by concurrent solver workers.
    """

    __slots__ = ("_entries",)

    def __init__(self, entries: Optional[Mapping[str, Binding]] = None):
        self._entries: Mapping[str, Binding] = MappingProxyType(dict(entries or {}))

    def bind(self, bindings: Iterable[Tuple[str, Optional[int], str]]) -> "SymbolTable":
        entries: Dict[str, Binding] = dict(self._entries)
        for name, value, provenance in bindings:
            if not IDENTIFIER.match(name):
                raise RdslError(f"'{name}' is not a valid identifier")
            if value is not None and (isinstance(value, bool) or not isinstance(value, int)):
                raise RdslError(f"value of '{name}' must be an integer, got {value!r}")
            current = entries.get(name)
            if current is not None and current.value is not None:
                if value is None or value == current.value:
                    continue
                raise ConflictingBinding(name, current.value, value, current.provenance, provenance)
            entries[name] = Binding(name, value, provenance)
        return SymbolTable(entries)

    def lookup(self, name: str) -> int:
        binding = self._entries.get(name)
        if binding is None or binding.value is None:
            raise UnboundSymbol(name)
        return binding.value

    def get(self, name: str, default: Optional[int] = None) -> Optional[int]:
        binding = self._entries.get(name)
        if binding is None or binding.value is None:
            return default
        return binding.value

    def is_bound(self, name: str) -> bool:
        binding = self._entries.get(name)
        return binding is not None and binding.value is not None

    def provenance(self, name: str) -> Optional[str]:
        binding = self._entries.get(name)
        return binding.provenance if binding else None

    def names(self) -> Tuple[str, ...]:
        return tuple(sorted(self._entries))

    def values(self) -> Dict[str, int]:
        return {n: b.value for n, b in self._entries.items() if b.value is not None}

    def __contains__(self, name: object) -> bool:
        return name in self._entries

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self._entries))

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, SymbolTable) and dict(self._entries) == dict(other._entries)

    def __repr__(self) -> str:
        return f"SymbolTable({self.values()!r})"

    def to_dict(self) -> dict:
        return {name: self._entries[name].to_dict() for name in sorted(self._entries)}


def bind_symbols(table: SymbolTable, bindings: Iterable[Tuple[str, Optional[int], str]]) -> SymbolTable:
    return table.bind(bindings)


def symbols_from_mapping(values: Mapping[str, int], provenance: str) -> SymbolTable:
    return SymbolTable().bind((name, value, provenance) for name, value in sorted(values.items()))
