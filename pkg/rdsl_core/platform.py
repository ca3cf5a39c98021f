"""
Platform - Processors, memories, ports and buffer movement patterns

A pattern name such as `big_delay.c_0.L3_0.DDR_0.L3_0` encodes a family,
the home processor that defines the buffer, and the chain of memories the
buffer passes through. The first memory anchors definition, the last one
observation; each consecutive pair is one transfer leg over the port that
connects the two memories.
"""

import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

import networkx as nx
import yaml

from .errors import DanglingReference, EmptyCompatibleSet, MalformedPatternName, RdslError

SHARE_KEYS: Tuple[str, ...] = tuple(
    f"shares_{level}_{phases}_with" for level in ("L2", "L3") for phases in ("II", "IO", "OI", "OO")
)
RELATION_KEYS: Tuple[str, ...] = ("exclusive_define_with",) + SHARE_KEYS + ("can_observe",)
DELAY_FAMILIES = frozenset({"big_delay"})
DEFAULT_BASE_CLOCKS = 0


class ProcessorClass(str, Enum):
    CPU = "CPU"
    ACCEL = "ACCEL"


@dataclass(frozen=True)
class Processor:
    name: str
    cls: ProcessorClass = ProcessorClass.CPU
    memories: Tuple[str, ...] = ()
    local_memory: Optional[str] = None

    def to_dict(self) -> dict:
        data = {"name": self.name, "class": self.cls.value, "memories": list(self.memories)}
        if self.local_memory:
            data["local_memory"] = self.local_memory
        return data


@dataclass(frozen=True)
class Memory:
    name: str
    capacity: int

    def to_dict(self) -> dict:
        return {"name": self.name, "capacity": self.capacity}


@dataclass(frozen=True)
class Port:
    name: str
    connects: Tuple[str, str]
    bandwidth: Tuple[int, int] = (1, 1)
    base_clocks: Optional[int] = None

    def to_dict(self) -> dict:
        data = {"name": self.name, "connects": list(self.connects), "bandwidth": list(self.bandwidth)}
        if self.base_clocks is not None:
            data["base_clocks"] = self.base_clocks
        return data


@dataclass(frozen=True)
class Leg:
    source: str
    target: str
    port: str


@dataclass(frozen=True)
class Pattern:
    name: str
    family: str
    home_processor: str
    chain: Tuple[str, ...]
    legs: Tuple[Leg, ...] = ()
    relations: Tuple[Tuple[str, FrozenSet[str]], ...] = ()
    delay_flag: Optional[bool] = None

    @property
    def defining_memory(self) -> str:
        return self.chain[0]

    @property
    def observing_memory(self) -> str:
        return self.chain[-1]

    def related(self, key: str) -> FrozenSet[str]:
        for name, members in self.relations:
            if name == key:
                return members
        return frozenset()

    @property
    def exclusive_define_with(self) -> FrozenSet[str]:
        return self.related("exclusive_define_with")

    @property
    def can_observe(self) -> FrozenSet[str]:
        return self.related("can_observe")

    @property
    def delay_capable(self) -> bool:
        if self.delay_flag is not None:
            return self.delay_flag
        return self.family in DELAY_FAMILIES

    def to_dict(self) -> dict:
        data = {
            "name": self.name,
            "defining_memory": self.defining_memory,
            "observing_memory": self.observing_memory,
        }
        for key in RELATION_KEYS:
            data[key] = sorted(self.related(key))
        if self.delay_flag is not None:
            data["delay_capable"] = self.delay_flag
        return data


def split_pattern_name(name: str) -> Tuple[str, str, Tuple[str, ...]]:
    """`family.core.mem(.mem)*` -> (family, core, memories)."""
    parts = name.split(".")
    if len(parts) < 3:
        raise MalformedPatternName(name, "expected family.core.memory[.memory...]")
    if any(not part for part in parts):
        raise MalformedPatternName(name, "empty component")
    return parts[0], parts[1], tuple(parts[2:])


@dataclass(frozen=True)
class PlatformDesc:
    processors: Tuple[Processor, ...] = ()
    memories: Tuple[Memory, ...] = ()
    ports: Tuple[Port, ...] = ()
    patterns: Tuple[Pattern, ...] = ()
    base_clocks: int = DEFAULT_BASE_CLOCKS

    @cached_property
    def _index(self) -> Dict[str, Dict[str, object]]:
        return {
            "processor": {p.name: p for p in self.processors},
            "memory": {m.name: m for m in self.memories},
            "port": {p.name: p for p in self.ports},
            "pattern": {p.name: p for p in self.patterns},
        }

    def processor(self, name: str) -> Processor:
        try:
            return self._index["processor"][name]
        except KeyError:
            raise DanglingReference(name, "platform") from None

    def memory(self, name: str) -> Memory:
        try:
            return self._index["memory"][name]
        except KeyError:
            raise DanglingReference(name, "platform") from None

    def port(self, name: str) -> Port:
        try:
            return self._index["port"][name]
        except KeyError:
            raise DanglingReference(name, "platform") from None

    def pattern(self, name: str) -> Pattern:
        try:
            return self._index["pattern"][name]
        except KeyError:
            raise DanglingReference(name, "platform") from None

    def has_pattern(self, name: str) -> bool:
        return name in self._index["pattern"]

    def processor_names(self) -> Tuple[str, ...]:
        return tuple(p.name for p in self.processors)

    # ----------------------------------------------------------- visibility

    def sees(self, processor: str, memory: str) -> bool:
        proc = self.processor(processor)
        return memory in proc.memories or memory == proc.local_memory

    def can_consume(self, pattern_name: str, processor: str) -> bool:
        """Whether a task on `processor` may read a buffer moved by the pattern."""
        pattern = self.pattern(pattern_name)
        if self.sees(processor, pattern.observing_memory):
            return True
        for other in pattern.can_observe:
            if not self.has_pattern(other):
                continue
            peer = self.pattern(other)
            if peer.home_processor == processor and peer.observing_memory == pattern.observing_memory:
                return True
        return False

    def compatible_patterns(
        self, available: Sequence[str], producer: str, consumers: Iterable[str], subject: str = ""
    ) -> Tuple[str, ...]:
        consumers = sorted(set(consumers))
        result = tuple(
            name
            for name in available
            if self.has_pattern(name)
            and self.pattern(name).home_processor == producer
            and all(self.can_consume(name, c) for c in consumers)
        )
        if not result:
            raise EmptyCompatibleSet(
                subject or producer, f"producer {producer}, consumers {', '.join(consumers) or 'none'}"
            )
        return result

    def candidate_processors(self, available: Sequence[str]) -> Tuple[str, ...]:
        """Processors that are home to at least one of the patterns, in platform order."""
        homes = {self.pattern(name).home_processor for name in available if self.has_pattern(name)}
        return tuple(p.name for p in self.processors if p.name in homes)

    # --------------------------------------------------------------- timing

    def leg_latency(self, leg: Leg, size_bytes: int) -> int:
        port = self.port(leg.port)
        nbytes, clocks = port.bandwidth
        base = self.base_clocks if port.base_clocks is None else port.base_clocks
        return base + math.ceil(size_bytes * clocks / nbytes)

    def transfer_latency(self, pattern_name: str, size_bytes: int) -> int:
        pattern = self.pattern(pattern_name)
        return sum(self.leg_latency(leg, size_bytes) for leg in pattern.legs)

    @cached_property
    def _share_components(self) -> Dict[Tuple[str, str], str]:
        contention = nx.Graph()
        for pattern in self.patterns:
            for key in SHARE_KEYS:
                own, other = key.split("_")[2]
                for peer in pattern.related(key):
                    contention.add_edge((pattern.name, own), (peer, other))
        resources = {}
        for component in nx.connected_components(contention):
            if len(component) < 2:
                continue
            anchor = min(component)
            resource = f"shared:{anchor[0]}:{anchor[1]}"
            for node in component:
                resources[node] = resource
        return resources

    def leg_resources(self, pattern_name: str, leg_index: int) -> Tuple[str, ...]:
        """The physical port of a leg plus every logical resource its phases contend on."""
        pattern = self.pattern(pattern_name)
        leg = pattern.legs[leg_index]
        phases = []
        if leg_index == 0:
            phases.append("I")
        if leg_index == len(pattern.legs) - 1:
            phases.append("O")
        shared = {
            self._share_components[(pattern.name, phase)]
            for phase in phases
            if (pattern.name, phase) in self._share_components
        }
        return (leg.port,) + tuple(sorted(shared))

    def mutually_exclusive(self, first: str, second: str) -> bool:
        return second in self.pattern(first).exclusive_define_with

    def to_dict(self) -> dict:
        return {
            "base_clocks": self.base_clocks,
            "processors": [p.to_dict() for p in self.processors],
            "memories": [m.to_dict() for m in self.memories],
            "ports": [p.to_dict() for p in self.ports],
            "patterns": [p.to_dict() for p in self.patterns],
        }


# ------------------------------------------------------------------ loading


def _names(values, what: str) -> Tuple[str, ...]:
    if values is None:
        return ()
    if not isinstance(values, (list, tuple)):
        raise RdslError(f"'{what}' must be a list")
    return tuple(str(v) for v in values)


def _int_pair(value, what: str) -> Tuple[int, int]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise RdslError(f"'{what}' must be a [bytes, clocks] pair")
    nbytes, clocks = int(value[0]), int(value[1])
    if nbytes <= 0 or clocks < 0:
        raise RdslError(f"'{what}' must have positive bytes and non-negative clocks")
    return nbytes, clocks


def _build_pattern(raw: dict, ports: Sequence[Port]) -> Pattern:
    name = str(raw["name"])
    family, core, chain = split_pattern_name(name)
    for key, expected in (("defining_memory", chain[0]), ("observing_memory", chain[-1])):
        declared = raw.get(key)
        if declared is not None and str(declared) != expected:
            raise MalformedPatternName(name, f"{key} '{declared}' disagrees with the name's memory chain")
    legs = []
    for source, target in zip(chain, chain[1:]):
        port = next((p for p in ports if set(p.connects) == {source, target}), None)
        if port is None:
            raise DanglingReference(f"port {source}-{target}", name)
        legs.append(Leg(source, target, port.name))
    relations = tuple((key, frozenset(_names(raw.get(key), f"{name}.{key}"))) for key in RELATION_KEYS)
    delay = raw.get("delay_capable")
    return Pattern(name, family, core, chain, tuple(legs), relations, None if delay is None else bool(delay))


def _symmetrize(patterns: List[Pattern]) -> List[Pattern]:
    members: Dict[Tuple[str, str], set] = {}
    for pattern in patterns:
        for key in RELATION_KEYS:
            members.setdefault((pattern.name, key), set()).update(pattern.related(key))
    for pattern in patterns:
        for key in RELATION_KEYS:
            for peer in list(members[(pattern.name, key)]):
                members.setdefault((peer, key), set()).add(pattern.name)
    return [
        Pattern(
            p.name,
            p.family,
            p.home_processor,
            p.chain,
            p.legs,
            tuple((key, frozenset(members[(p.name, key)])) for key in RELATION_KEYS),
            p.delay_flag,
        )
        for p in patterns
    ]


def _merge_pattern_dicts(primary: List[dict], extra: Iterable[dict]) -> List[dict]:
    merged = {str(p["name"]): dict(p) for p in primary}
    order = [str(p["name"]) for p in primary]
    for raw in extra:
        name = str(raw["name"])
        if name not in merged:
            merged[name] = dict(raw)
            order.append(name)
            continue
        target = merged[name]
        for key, value in raw.items():
            if key in RELATION_KEYS:
                target[key] = sorted(set(_names(target.get(key), key)) | set(_names(value, key)))
            else:
                target.setdefault(key, value)
    return [merged[name] for name in order]


def platform_from_dict(data: Mapping, extra_patterns: Iterable[dict] = ()) -> PlatformDesc:
    if not isinstance(data, Mapping):
        raise RdslError("platform document must be a mapping")
    base_clocks = int(data.get("base_clocks", DEFAULT_BASE_CLOCKS))
    processors = tuple(
        Processor(
            str(p["name"]),
            ProcessorClass(str(p.get("class", "CPU")).upper()),
            _names(p.get("memories"), f"{p['name']}.memories"),
            p.get("local_memory"),
        )
        for p in data.get("processors") or ()
    )
    memories = tuple(Memory(str(m["name"]), int(m["capacity"])) for m in data.get("memories") or ())
    ports = tuple(
        Port(
            str(p["name"]),
            tuple(_names(p.get("connects"), f"{p['name']}.connects")),
            _int_pair(p.get("bandwidth", [1, 1]), f"{p['name']}.bandwidth"),
            None if p.get("base_clocks") is None else int(p["base_clocks"]),
        )
        for p in data.get("ports") or ()
    )

    seen = set()
    for name in [x.name for x in processors] + [x.name for x in memories] + [x.name for x in ports]:
        if name in seen:
            raise RdslError(f"platform name '{name}' is used more than once")
        seen.add(name)
    memory_names = {m.name for m in memories}
    processor_names = {p.name for p in processors}
    for proc in processors:
        for mem in proc.memories + ((proc.local_memory,) if proc.local_memory else ()):
            if mem not in memory_names:
                raise DanglingReference(mem, proc.name)
    for port in ports:
        if len(port.connects) != 2:
            raise RdslError(f"port '{port.name}' must connect exactly two memories")
        for mem in port.connects:
            if mem not in memory_names:
                raise DanglingReference(mem, port.name)

    raw_patterns = _merge_pattern_dicts(list(data.get("patterns") or ()), extra_patterns)
    patterns = _symmetrize([_build_pattern(raw, ports) for raw in raw_patterns])
    pattern_names = {p.name for p in patterns}
    for pattern in patterns:
        if pattern.home_processor not in processor_names:
            raise DanglingReference(pattern.home_processor, pattern.name)
        for mem in pattern.chain:
            if mem not in memory_names:
                raise DanglingReference(mem, pattern.name)
        for key in RELATION_KEYS:
            for peer in pattern.related(key):
                if peer not in pattern_names:
                    raise DanglingReference(peer, f"{pattern.name}.{key}")
    return PlatformDesc(processors, memories, ports, tuple(patterns), base_clocks)


def parse_platform(text: str, extra_patterns: Iterable[dict] = ()) -> PlatformDesc:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise RdslError(f"invalid platform YAML: {exc}") from None
    return platform_from_dict(data or {}, extra_patterns)


def serialize_platform(platform: PlatformDesc) -> str:
    return yaml.safe_dump(platform.to_dict(), sort_keys=True)


def import_patterns_xml(text: str) -> List[dict]:
    """Read `<pattern>` elements into the canonical pattern mapping.

    Only `<member>` children count as set members; elided placeholder text
    such as `...` is ignored.
    """
    try:
        root = ET.fromstring(text)
    except ET.ParseError:
        try:
            root = ET.fromstring(f"<patterns>{text}</patterns>")
        except ET.ParseError as exc:
            raise RdslError(f"invalid pattern XML: {exc}") from None
    elements = [root] if root.tag == "pattern" else list(root.iter("pattern"))
    patterns = []
    for element in elements:
        name = element.get("name")
        if not name:
            raise MalformedPatternName("", "pattern element without a name")
        raw: dict = {"name": name}
        for child in element:
            if child.tag in ("defining_memory", "observing_memory"):
                raw[child.tag] = (child.text or "").strip()
            elif child.tag in RELATION_KEYS:
                raw[child.tag] = [(m.text or "").strip() for m in child.iter("member")]
            elif child.tag == "delay_capable":
                raw[child.tag] = (child.text or "").strip().lower() == "true"
        patterns.append(raw)
    return patterns
