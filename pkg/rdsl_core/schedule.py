"""
Schedule - Assignments, timed schedules, solver settings and scoring
"""

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Dict, Iterable, Mapping, Optional, Tuple

from .errors import RdslError
from .graph import TaskGraph


class ObjectiveKind(str, Enum):
    MIN_ACTIVE_PERIOD = "power"
    MIN_LATENCY = "latency"

    @property
    def kpi(self) -> str:
        return "Active period" if self is ObjectiveKind.MIN_ACTIVE_PERIOD else "Uplink latency"

    @classmethod
    def parse(cls, text: str) -> "ObjectiveKind":
        lowered = str(text).strip().lower()
        for kind in cls:
            if lowered in (kind.value, kind.name.lower()):
                return kind
        raise RdslError(f"unknown objective '{text}', expected power or latency")


@dataclass(frozen=True)
class Objective:
    kind: ObjectiveKind = ObjectiveKind.MIN_ACTIVE_PERIOD
    sinks: Tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "sinks": list(self.sinks)}

    def describe(self) -> str:
        if self.kind is ObjectiveKind.MIN_ACTIVE_PERIOD:
            return "MIN_ACTIVE_PERIOD"
        return f"MIN_LATENCY({', '.join(self.sinks) or 'all sinks'})"


@dataclass(frozen=True)
class SolverConfig:
    seed: int = 0
    restarts: int = 4
    iterations: int = 600
    initial_temperature: float = 50.0
    cooling: float = 0.995
    time_budget: float = 60.0
    workers: Optional[int] = None
    objective: Objective = Objective()

    def __post_init__(self):
        for name in ("restarts", "iterations"):
            if getattr(self, name) < 1:
                raise RdslError(f"solver {name} must be positive")
        if self.initial_temperature <= 0 or not 0 < self.cooling <= 1:
            raise RdslError("solver temperature must be positive and cooling in (0, 1]")
        if self.time_budget <= 0:
            raise RdslError("solver time budget must be positive")
        if self.workers is not None and self.workers < 1:
            raise RdslError("solver workers must be positive")

    def to_dict(self) -> dict:
        """Echo written into schedules; the worker count never changes results."""
        return {
            "seed": self.seed,
            "restarts": self.restarts,
            "iterations": self.iterations,
            "initial_temperature": self.initial_temperature,
            "cooling": self.cooling,
            "time_budget": self.time_budget,
        }


@dataclass(frozen=True)
class Assignment:
    task_to_processor: Mapping[str, str] = field(default_factory=dict)
    buffer_to_pattern: Mapping[str, str] = field(default_factory=dict)
    witnesses: Mapping[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class TaskSlot:
    task: str
    processor: str
    start: int
    finish: int


@dataclass(frozen=True)
class LegSlot:
    buffer: str
    index: int
    source: str
    target: str
    port: str
    start: int
    end: int
    resources: Tuple[str, ...] = ()

    @property
    def duration(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class BufferRecord:
    id: str
    pattern: str
    producer: str
    size: int
    ready: int
    define_end: int
    siblings: Tuple[str, ...] = ()


@dataclass(frozen=True)
class Schedule:
    assignment: Assignment
    slots: Tuple[TaskSlot, ...]
    legs: Tuple[LegSlot, ...]
    buffers: Tuple[BufferRecord, ...]
    objective: Objective
    objective_value: int
    hyperperiod: Optional[int]
    seed: int = 0
    solver: Mapping[str, object] = field(default_factory=dict)

    @cached_property
    def _slots(self) -> Dict[str, TaskSlot]:
        return {s.task: s for s in self.slots}

    @cached_property
    def _records(self) -> Dict[str, BufferRecord]:
        return {r.id: r for r in self.buffers}

    def slot(self, task: str) -> TaskSlot:
        try:
            return self._slots[task]
        except KeyError:
            raise RdslError(f"task '{task}' is not scheduled") from None

    def start(self, task: str) -> int:
        return self.slot(task).start

    def buffer(self, buffer_id: str) -> Optional[BufferRecord]:
        return self._records.get(buffer_id)

    @cached_property
    def _legs(self) -> Dict[str, Tuple[LegSlot, ...]]:
        grouped: Dict[str, list] = {}
        for leg in self.legs:
            grouped.setdefault(leg.buffer, []).append(leg)
        return {bid: tuple(sorted(legs, key=lambda l: l.index)) for bid, legs in grouped.items()}

    def legs_of(self, buffer_id: str) -> Tuple[LegSlot, ...]:
        return self._legs.get(buffer_id, ())

    @property
    def active_window(self) -> Tuple[int, int]:
        starts = [s.start for s in self.slots] + [l.start for l in self.legs if l.duration]
        ends = [s.finish for s in self.slots] + [l.end for l in self.legs if l.duration]
        if not starts:
            return (0, 0)
        return (min(starts), max(ends))

    @property
    def makespan(self) -> int:
        return max([s.finish for s in self.slots] + [l.end for l in self.legs], default=0)

    def processors(self) -> Dict[str, Tuple[TaskSlot, ...]]:
        lanes: Dict[str, list] = {}
        for slot in self.slots:
            lanes.setdefault(slot.processor, []).append(slot)
        return {p: tuple(sorted(s, key=lambda x: (x.start, x.task))) for p, s in sorted(lanes.items())}

    def full_pattern_assignment(self) -> Dict[str, str]:
        """Pattern per buffer, with merged siblings expanded back out."""
        patterns = {}
        for record in self.buffers:
            patterns[record.id] = record.pattern
            for sibling in record.siblings:
                patterns[sibling] = record.pattern
        return patterns


def derived_times(schedule: Schedule, graph: TaskGraph, buffer_id: str) -> Tuple[int, int]:
    """(ready, define_end) of a produced buffer, taken from its producer slot and legs.

    The define ends with the first leg, or with the producer when the
    pattern has none; the buffer is ready once the last leg lands. The
    values stored on the BufferRecord are never consulted.
    """
    if schedule.buffer(buffer_id) is None:
        raise RdslError(f"buffer '{buffer_id}' is not scheduled")
    finish = schedule.slot(graph.buffer(buffer_id).producer).finish
    legs = schedule.legs_of(buffer_id)
    if not legs:
        return finish, finish
    return max([finish] + [leg.end for leg in legs]), legs[0].end


def ready_time(schedule: Schedule, graph: TaskGraph, buffer_id: str) -> int:
    buffer = graph.buffer(buffer_id)
    if buffer.is_source:
        return buffer.arrival
    return derived_times(schedule, graph, buffer_id)[0]


def label_values(schedule: Schedule, graph: TaskGraph) -> Dict[str, int]:
    """A label's time is the latest ready time over its buffers."""
    return {
        label: max(ready_time(schedule, graph, bid) for bid in ids)
        for label, ids in graph.label_table
        if ids
    }


def latency(schedule: Schedule, graph: TaskGraph, sinks: Iterable[str]) -> int:
    names = tuple(sinks) or tuple(b.id for b in graph.sinks())
    worst = 0
    for sink in graph.resolve_sinks(names):
        arrivals = [graph.buffer(s).arrival for s in graph.upstream_sources(sink)]
        worst = max(worst, ready_time(schedule, graph, sink) - min(arrivals, default=0))
    return worst


def score(schedule: Schedule, objective: Objective, graph: TaskGraph) -> int:
    """Active period (last finish minus first start), or worst sink latency."""
    if objective.kind is ObjectiveKind.MIN_ACTIVE_PERIOD:
        first, last = schedule.active_window
        return last - first
    return latency(schedule, graph, objective.sinks)
