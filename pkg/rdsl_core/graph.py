"""
Graph - Flattened one-period task and buffer graph
"""

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

import networkx as nx

from .errors import CyclicDependency, RdslError, UnguardedRead, UnknownSink
from .frontend import FunctionCall, GuardArm, GuardKind
from .sdk import GroundedMeta


class External(str, Enum):
    SOURCE = "SOURCE"
    SINK = "SINK"
    NONE = "NONE"


@dataclass(frozen=True)
class InputRef:
    buffer: str
    delay: int = 0
    optional: bool = False


@dataclass(frozen=True)
class TaskInstance:
    id: str
    modifier: str
    meta: GroundedMeta
    runtime: int
    inputs: Tuple[InputRef, ...] = ()
    outputs: Tuple[str, ...] = ()
    params: Tuple[Tuple[str, Tuple[str, ...]], ...] = ()
    arms: Tuple[GuardArm, ...] = ()
    arm_costs: Tuple[int, ...] = ()
    index_args: Tuple[int, ...] = ()
    labels: Tuple[str, ...] = ()

    @property
    def worst_case_runtime(self) -> int:
        """Max over guard arms; `runtime` already holds it."""
        return self.runtime

    @property
    def hard_inputs(self) -> Tuple[str, ...]:
        return tuple(sorted({i.buffer for i in self.inputs if not i.optional}))

    @property
    def optional_inputs(self) -> Tuple[str, ...]:
        return tuple(sorted({i.buffer for i in self.inputs if i.optional}))

    def param_buffers(self, param: str) -> Tuple[str, ...]:
        for name, buffers in self.params:
            if name == param:
                return buffers
        return ()

    def delay_of(self, buffer: str) -> int:
        return max((i.delay for i in self.inputs if i.buffer == buffer), default=0)

    def unguarded_reads(self) -> Tuple[Tuple[int, str], ...]:
        """(arm, param) pairs where a call reads an optional input its own arm did not test DEFINED."""
        optional = set(self.optional_inputs)
        risky = {name for name, ids in self.params if optional & set(ids)}
        found = []
        for index, arm in enumerate(self.arms):
            condition = arm.condition
            for action in arm.actions:
                if not isinstance(action, FunctionCall):
                    continue
                for arg in action.args:
                    if arg.name not in risky:
                        continue
                    if condition.kind is GuardKind.DEFINED and condition.stream == arg.name:
                        continue
                    found.append((index, arg.name))
        return tuple(sorted(set(found)))

    def to_dict(self) -> dict:
        return {
            "kind": "task",
            "id": self.id,
            "modifier": self.modifier,
            "runtime": self.runtime,
            "elementsize": self.meta.elementsize,
            "internalsize": self.meta.internalsize,
            "available_patterns": list(self.meta.available_patterns),
            "hard_inputs": list(self.hard_inputs),
            "optional_inputs": list(self.optional_inputs),
            "delayed_inputs": sorted(f"{i.buffer}@-{i.delay}" for i in self.inputs if i.delay),
            "outputs": list(self.outputs),
            "index_args": list(self.index_args),
            "labels": list(self.labels),
        }


@dataclass(frozen=True)
class BufferInstance:
    id: str
    stream: str
    key: Tuple[int, ...] = ()
    producer: Optional[str] = None
    consumers: Tuple[str, ...] = ()
    size_bytes: int = 0
    delay: int = 0
    sibling_group: Optional[str] = None
    external: External = External.NONE
    arrival: int = 0
    labels: Tuple[str, ...] = ()

    @property
    def is_source(self) -> bool:
        return self.external is External.SOURCE

    def to_dict(self) -> dict:
        return {
            "kind": "buffer",
            "id": self.id,
            "stream": self.stream,
            "producer": self.producer,
            "consumers": list(self.consumers),
            "size": self.size_bytes,
            "delay": self.delay,
            "sibling_group": self.sibling_group,
            "external": self.external.value,
            "arrival": self.arrival,
            "labels": list(self.labels),
        }


def buffer_id(stream: str, key: Iterable[int]) -> str:
    return stream + "".join(f"[{k}]" for k in key)


@dataclass(frozen=True)
class TaskGraph:
    tasks: Tuple[TaskInstance, ...] = ()
    buffers: Tuple[BufferInstance, ...] = ()
    hyperperiod: Optional[int] = None
    label_table: Tuple[Tuple[str, Tuple[str, ...]], ...] = field(default=())

    @cached_property
    def _tasks(self) -> Dict[str, TaskInstance]:
        return {t.id: t for t in self.tasks}

    @cached_property
    def _buffers(self) -> Dict[str, BufferInstance]:
        return {b.id: b for b in self.buffers}

    def task(self, task_id: str) -> TaskInstance:
        try:
            return self._tasks[task_id]
        except KeyError:
            raise RdslError(f"unknown task '{task_id}'") from None

    def buffer(self, buffer_id_: str) -> BufferInstance:
        try:
            return self._buffers[buffer_id_]
        except KeyError:
            raise RdslError(f"unknown buffer '{buffer_id_}'") from None

    def has_task(self, task_id: str) -> bool:
        return task_id in self._tasks

    def has_buffer(self, buffer_id_: str) -> bool:
        return buffer_id_ in self._buffers

    def task_ids(self) -> Tuple[str, ...]:
        return tuple(t.id for t in self.tasks)

    @property
    def labels(self) -> Mapping[str, Tuple[str, ...]]:
        return dict(self.label_table)

    def with_hyperperiod(self, hyperperiod: Optional[int]) -> "TaskGraph":
        return replace(self, hyperperiod=hyperperiod)

    def same_period_producers(self, task_id: str) -> Tuple[str, ...]:
        """Producers of the task's hard, undelayed inputs."""
        producers = set()
        for ref in self.task(task_id).inputs:
            if ref.optional or ref.delay:
                continue
            producer = self.buffer(ref.buffer).producer
            if producer is not None:
                producers.add(producer)
        return tuple(sorted(producers))

    @cached_property
    def precedence(self) -> nx.DiGraph:
        digraph = nx.DiGraph()
        digraph.add_nodes_from(self.task_ids())
        for task in self.tasks:
            for producer in self.same_period_producers(task.id):
                digraph.add_edge(producer, task.id)
        return digraph

    def check_acyclic(self) -> None:
        try:
            cycle = nx.find_cycle(self.precedence)
        except nx.NetworkXNoCycle:
            return
        raise CyclicDependency([edge[0] for edge in cycle] + [cycle[0][0]])

    def check_guarded_reads(self) -> None:
        for task in self.tasks:
            reads = task.unguarded_reads()
            if reads:
                arm, param = reads[0]
                raise UnguardedRead(task.id, param, arm)

    def topological_order(self) -> List[str]:
        """Topological order of tasks, ties broken by id."""
        self.check_acyclic()
        return list(nx.lexicographical_topological_sort(self.precedence))

    def sources(self) -> Tuple[BufferInstance, ...]:
        return tuple(b for b in self.buffers if b.external is External.SOURCE)

    def sinks(self) -> Tuple[BufferInstance, ...]:
        return tuple(b for b in self.buffers if b.external is External.SINK)

    def resolve_sinks(self, names: Iterable[str]) -> Tuple[str, ...]:
        """Buffer ids for sink names given as buffer ids or stream names."""
        resolved = set()
        for name in names:
            if name in self._buffers:
                resolved.add(name)
                continue
            matches = [b.id for b in self.buffers if b.stream == name or b.sibling_group == name]
            if not matches:
                raise UnknownSink(name)
            resolved.update(matches)
        return tuple(sorted(resolved))

    def upstream_sources(self, buffer_id_: str) -> Tuple[str, ...]:
        """SOURCE buffers reachable backwards through undelayed inputs."""
        seen, found = set(), set()
        stack = [buffer_id_]
        while stack:
            current = stack.pop()
            if current in seen:
                continue
            seen.add(current)
            buffer = self.buffer(current)
            if buffer.is_source:
                found.add(current)
                continue
            if buffer.producer is None:
                continue
            for ref in self.task(buffer.producer).inputs:
                if not ref.delay:
                    stack.append(ref.buffer)
        return tuple(sorted(found))

    def to_jsonl(self) -> str:
        records = [t.to_dict() for t in self.tasks] + [b.to_dict() for b in self.buffers]
        records.sort(key=lambda r: (r["id"], r["kind"]))
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)


def build_graph(
    tasks: Iterable[TaskInstance],
    buffers: Iterable[BufferInstance],
    hyperperiod: Optional[int] = None,
    labels: Optional[Mapping[str, Iterable[str]]] = None,
) -> TaskGraph:
    """Sort by id and recompute consumer lists from the tasks' inputs."""
    tasks = sorted(tasks, key=lambda t: t.id)
    consumers: Dict[str, set] = {}
    delays: Dict[str, int] = {}
    for task in tasks:
        for ref in task.inputs:
            consumers.setdefault(ref.buffer, set()).add(task.id)
            delays[ref.buffer] = max(delays.get(ref.buffer, 0), ref.delay)
    ordered = []
    for buffer in sorted(buffers, key=lambda b: b.id):
        ordered.append(
            replace(
                buffer,
                consumers=tuple(sorted(consumers.get(buffer.id, ()))),
                delay=delays.get(buffer.id, 0),
            )
        )
    label_table = tuple(sorted((name, tuple(sorted(set(ids)))) for name, ids in (labels or {}).items()))
    return TaskGraph(tuple(tasks), tuple(ordered), hyperperiod, label_table)
