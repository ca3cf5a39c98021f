"""
Verifier - Replays a schedule over many periods and reports violations

Timing, ordering, capacity and exclusivity checks run on an absolute
timeline spanning enough periods to reach steady state; later periods are
translates of that window. Guard outcomes are replayed for every period,
with optional inputs drawn from a seeded generator.
"""

import random
from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import networkx as nx
import yaml
from loguru import logger

from .constraints import ConstraintSet, check_satisfaction, solve_witnesses
from .elaborator import merge_redundant_siblings
from .errors import RdslError, ScheduleMismatch
from .frontend import AssignEmpty, ErrorMessage, FunctionCall
from .graph import TaskGraph
from .platform import PlatformDesc
from .schedule import Schedule, derived_times, label_values
from .timeline import memory_intervals, overlaps, sweep_peaks

DEFINED = "DEFINED"
EMPTY = "EMPTY"
UNDEFINED = "UNDEFINED"
GUARD_STATES = (DEFINED, EMPTY, UNDEFINED)
SEVERITY = {DEFINED: 0, EMPTY: 1, UNDEFINED: 2}
SEED_STRIDE = 1_000_003


class ViolationKind(str, Enum):
    READ_BEFORE_DEFINE = "READ_BEFORE_DEFINE"
    DOUBLE_DEFINE = "DOUBLE_DEFINE"
    CAPACITY_OVERFLOW = "CAPACITY_OVERFLOW"
    PROCESSOR_OVERLAP = "PROCESSOR_OVERLAP"
    PORT_OVERLAP = "PORT_OVERLAP"
    EXCLUSIVE_DEFINE_OVERLAP = "EXCLUSIVE_DEFINE_OVERLAP"
    DEADLINE_MISS = "DEADLINE_MISS"
    UNHANDLED_UNDEFINED_INPUT = "UNHANDLED_UNDEFINED_INPUT"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    at: int
    subjects: Tuple[str, ...]
    period: int = 0
    detail: str = ""

    def to_dict(self) -> dict:
        data = {"kind": self.kind.value, "at": self.at, "subjects": list(self.subjects), "period": self.period}
        if self.detail:
            data["detail"] = self.detail
        return data


@dataclass(frozen=True)
class VerifyReport:
    periods: int
    seed: int
    violations: Tuple[Violation, ...] = ()
    active_windows: Tuple[Tuple[int, int], ...] = ()
    coverage: Tuple[Tuple[str, Tuple[int, ...]], ...] = ()

    @property
    def passed(self) -> bool:
        return not self.violations

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def kinds(self) -> Counter:
        return Counter(v.kind for v in self.violations)

    def arm_counts(self, task_id: str) -> Tuple[int, ...]:
        return dict(self.coverage).get(task_id, ())

    def to_dict(self) -> dict:
        windows = sorted(set(self.active_windows))
        return {
            "verdict": self.verdict,
            "periods": self.periods,
            "seed": self.seed,
            "violations": [v.to_dict() for v in self.violations],
            "active_window": [list(w) for w in windows],
            "coverage": {task: list(counts) for task, counts in self.coverage},
        }


def serialize_report(report: VerifyReport) -> str:
    return yaml.safe_dump(report.to_dict(), sort_keys=True)


class _Findings:
    """Keeps the first occurrence of each (kind, subjects)."""

    def __init__(self):
        self.first: Dict[Tuple[ViolationKind, Tuple[str, ...]], Violation] = {}

    def add(self, kind: ViolationKind, at: int, subjects: Sequence[str], period: int = 0, detail: str = "") -> None:
        key = (kind, tuple(subjects))
        if key not in self.first:
            self.first[key] = Violation(kind, at, tuple(subjects), period, detail)

    def ordered(self) -> Tuple[Violation, ...]:
        return tuple(sorted(self.first.values(), key=lambda v: (v.period, v.at, v.kind.value, v.subjects)))


def reconcile(schedule: Schedule, graph: TaskGraph) -> TaskGraph:
    """The graph as the schedule sees it: redundant siblings merged, ids cross-checked."""
    merged = merge_redundant_siblings(graph, schedule.full_pattern_assignment())
    scheduled = {s.task for s in schedule.slots}
    expected = set(merged.task_ids())
    if scheduled != expected:
        missing = sorted(expected - scheduled)[:3]
        extra = sorted(scheduled - expected)[:3]
        raise ScheduleMismatch(f"task sets differ (missing {missing}, unknown {extra})")
    recorded = {r.id for r in schedule.buffers}
    produced = {b.id for b in merged.buffers if not b.is_source}
    if recorded != produced:
        missing = sorted(produced - recorded)[:3]
        extra = sorted(recorded - produced)[:3]
        raise ScheduleMismatch(f"buffer sets differ (missing {missing}, unknown {extra})")
    for leg in schedule.legs:
        if leg.buffer not in recorded:
            raise ScheduleMismatch(f"transfer leg of unknown buffer '{leg.buffer}'")
    return merged


def _period_length(schedule: Schedule) -> int:
    return schedule.hyperperiod or max(schedule.makespan, 1)


def _lane_overlaps(findings: _Findings, kind: ViolationKind, lane: str, intervals: List[Tuple[int, int, str, int]]) -> None:
    """`intervals` are (start, end, subject, period); reports every overlapping pair."""
    intervals = sorted((i for i in intervals if i[1] > i[0]), key=lambda i: (i[0], i[1], i[2]))
    active: List[Tuple[int, int, str, int]] = []
    for current in intervals:
        active = [a for a in active if a[1] > current[0]]
        for other in active:
            subjects = (lane,) + tuple(sorted((other[2], current[2])))
            findings.add(kind, current[0], subjects, current[3], f"{other[2]} and {current[2]} overlap on {lane}")
        active.append(current)


def _check_record(findings: _Findings, record, derived: Tuple[int, int], producer, schedule: Schedule) -> None:
    """Legs follow the producer and each other; stored times may not run ahead of the slots."""
    previous, at = producer.finish, producer.task
    for leg in schedule.legs_of(record.id):
        if leg.start < previous:
            findings.add(
                ViolationKind.READ_BEFORE_DEFINE,
                leg.start,
                (f"{record.id}#{leg.index}", record.id),
                0,
                f"transfer starts at {leg.start}, {at} ends at {previous}",
            )
        previous, at = leg.end, f"leg {leg.index}"
    ready, define_end = derived
    if record.ready < ready or record.define_end < define_end:
        findings.add(
            ViolationKind.READ_BEFORE_DEFINE,
            record.ready,
            (record.id,),
            0,
            f"recorded ready {record.ready}/define end {record.define_end}, slots give {ready}/{define_end}",
        )


def _check_timing(
    findings: _Findings, schedule: Schedule, graph: TaskGraph, platform: PlatformDesc, window: int
) -> None:
    period = _period_length(schedule)
    slots = {s.task: s for s in schedule.slots}

    lanes: Dict[str, List[Tuple[int, int, str, int]]] = {}
    for p in range(window):
        for slot in schedule.slots:
            lanes.setdefault(slot.processor, []).append((p * period + slot.start, p * period + slot.finish, slot.task, p))
    for processor in sorted(lanes):
        _lane_overlaps(findings, ViolationKind.PROCESSOR_OVERLAP, processor, lanes[processor])

    ports: Dict[str, List[Tuple[int, int, str, int]]] = {}
    for p in range(window):
        for leg in schedule.legs:
            for resource in leg.resources or (leg.port,):
                ports.setdefault(resource, []).append(
                    (p * period + leg.start, p * period + leg.end, f"{leg.buffer}#{leg.index}", p)
                )
    for resource in sorted(ports):
        _lane_overlaps(findings, ViolationKind.PORT_OVERLAP, resource, ports[resource])

    times = {r.id: derived_times(schedule, graph, r.id) for r in schedule.buffers}
    for record in schedule.buffers:
        _check_record(findings, record, times[record.id], slots[graph.buffer(record.id).producer], schedule)

    for p in range(window):
        for task in graph.tasks:
            start = p * period + slots[task.id].start
            for ref in task.inputs:
                if ref.optional:
                    continue
                source_period = p - ref.delay
                if source_period < 0:
                    continue
                buffer = graph.buffer(ref.buffer)
                if buffer.is_source:
                    ready = buffer.arrival
                else:
                    ready = times[ref.buffer][0]
                ready += source_period * period
                if ready > start:
                    findings.add(
                        ViolationKind.READ_BEFORE_DEFINE,
                        start,
                        (task.id, ref.buffer),
                        p,
                        f"starts at {start}, input ready at {ready}",
                    )

    counts = Counter(r.id for r in schedule.buffers)
    for record in schedule.buffers:
        owner = graph.buffer(record.id).producer
        writer_slot = slots.get(record.producer)
        at = writer_slot.start if writer_slot else 0
        if record.producer != owner or counts[record.id] > 1:
            writers = tuple(sorted({record.producer, owner or "SOURCE"}))
            findings.add(ViolationKind.DOUBLE_DEFINE, at, (record.id,) + writers, 0, "buffer defined more than once")

    defines = []
    for p in range(window):
        for record in schedule.buffers:
            writer_slot = slots.get(graph.buffer(record.id).producer)
            if writer_slot is None:
                continue
            defines.append(
                (p * period + writer_slot.start, p * period + times[record.id][1], record, p)
            )
    defines.sort(key=lambda d: (d[0], d[2].id))
    for i, (start, end, record, p) in enumerate(defines):
        for other_start, other_end, other, _ in defines[i + 1:]:
            if other_start >= end:
                break
            if graph.buffer(other.id).producer == graph.buffer(record.id).producer or not overlaps(start, end, other_start, other_end):
                continue
            if platform.mutually_exclusive(record.pattern, other.pattern):
                findings.add(
                    ViolationKind.EXCLUSIVE_DEFINE_OVERLAP,
                    max(start, other_start),
                    tuple(sorted((record.id, other.id))),
                    p,
                    f"{record.pattern} and {other.pattern} define concurrently",
                )

    intervals = memory_intervals(schedule, graph, platform)
    shifted = [
        replace(i, start=i.start + p * period, end=i.end + p * period)
        for p in range(window)
        for i in intervals
    ]
    for memory, (peak, at) in sorted(sweep_peaks(shifted).items()):
        capacity = platform.memory(memory).capacity
        if peak > capacity:
            findings.add(
                ViolationKind.CAPACITY_OVERFLOW, at, (memory,), at // period, f"peak {peak} > capacity {capacity}"
            )


def _check_constraints(findings: _Findings, schedule: Schedule, graph: TaskGraph, constraints: ConstraintSet) -> None:
    if schedule.hyperperiod is not None and schedule.makespan > schedule.hyperperiod:
        name = constraints.period_constraint_name()
        findings.add(
            ViolationKind.DEADLINE_MISS,
            schedule.makespan,
            (name,),
            0,
            f"work ends at {schedule.makespan}, period is {schedule.hyperperiod}",
        )
    known = label_values(schedule, graph)
    values = {**known, **schedule.assignment.witnesses}
    missing = [v for v in constraints.free_variables() if v not in values]
    if missing:
        solved = solve_witnesses(constraints, values) or {}
        values.update({name: solved.get(name, 0) for name in missing})
    for violation in check_satisfaction(constraints, values):
        findings.add(ViolationKind.DEADLINE_MISS, 0, (violation.constraint,), 0, violation.detail)


def _param_directions(task) -> Dict[str, bool]:
    outputs = set(task.outputs)
    return {name: bool(ids) and all(b in outputs for b in ids) for name, ids in task.params}


def _replay(
    findings: _Findings, schedule: Schedule, graph: TaskGraph, periods: int, seed: int
) -> Dict[str, List[int]]:
    period = _period_length(schedule)
    slots = {s.task: s for s in schedule.slots}
    order = list(nx.lexicographical_topological_sort(graph.precedence, key=lambda t: (slots[t].start, slots[t].finish, t)))
    coverage = {task_id: [0] * len(graph.task(task_id).arms) for task_id in order}
    directions = {task_id: _param_directions(graph.task(task_id)) for task_id in order}
    depth = max((b.delay for b in graph.buffers), default=0)
    history: List[Dict[str, str]] = []

    for p in range(periods):
        rng = random.Random(seed * SEED_STRIDE + p)
        states: Dict[str, str] = {}
        for task_id in order:
            task = graph.task(task_id)
            start = p * period + slots[task_id].start
            refs = {r.buffer: r for r in task.inputs}
            param_states: Dict[str, str] = {}
            for name, ids in task.params:
                if directions[task_id][name]:
                    continue
                worst = DEFINED
                for bid in ids:
                    ref = refs.get(bid)
                    if ref is None:
                        continue
                    state = _input_state(ref, graph, schedule, states, history, p, period, start, rng)
                    if SEVERITY[state] > SEVERITY[worst]:
                        worst = state
                param_states[name] = worst
            fired = next(
                (i for i, arm in enumerate(task.arms) if arm.condition.holds(param_states)), None
            )
            outputs = {name: EMPTY for name, is_out in directions[task_id].items() if is_out}
            if fired is not None:
                coverage[task_id][fired] += 1
                for action in task.arms[fired].actions:
                    if isinstance(action, FunctionCall):
                        for arg in action.args:
                            if arg.name in outputs:
                                outputs[arg.name] = DEFINED
                            elif param_states.get(arg.name) == UNDEFINED:
                                findings.add(
                                    ViolationKind.UNHANDLED_UNDEFINED_INPUT,
                                    start,
                                    (task_id, arg.name),
                                    p,
                                    f"{action.function} reads undefined '{arg.name}'",
                                )
                    elif isinstance(action, ErrorMessage) and action.target in outputs:
                        outputs[action.target] = DEFINED
                    elif isinstance(action, AssignEmpty) and action.target in outputs:
                        outputs[action.target] = EMPTY
            for name, ids in task.params:
                if name in outputs:
                    for bid in ids:
                        states[bid] = outputs[name]
        history.append(states)
        if len(history) > depth + 1:
            history[len(history) - depth - 2] = {}
    return coverage


def _input_state(ref, graph, schedule, states, history, p, period, start, rng) -> str:
    buffer = graph.buffer(ref.buffer)
    source_period = p - ref.delay
    if ref.optional:
        draw = rng.choice(GUARD_STATES)
        if source_period < 0:
            return EMPTY
        ready = buffer.arrival if buffer.is_source else derived_times(schedule, graph, ref.buffer)[0]
        if source_period * period + ready > start:
            return UNDEFINED
        if buffer.is_source:
            return draw
        produced = _produced_state(ref.buffer, states, history, source_period, p)
        return draw if produced == DEFINED else produced
    if source_period < 0:
        return EMPTY
    if buffer.is_source:
        return DEFINED
    return _produced_state(ref.buffer, states, history, source_period, p)


def _produced_state(buffer_id, states, history, source_period, p) -> str:
    if source_period == p:
        return states.get(buffer_id, UNDEFINED)
    return history[source_period].get(buffer_id, UNDEFINED)


def verify(
    schedule: Schedule,
    graph: TaskGraph,
    platform: PlatformDesc,
    constraints: ConstraintSet,
    periods: int = 1000,
    seed: int = 0,
) -> VerifyReport:
    """Replay `schedule` for `periods` periods and collect violations."""
    if periods < 1:
        raise RdslError(f"periods must be positive, got {periods}")
    merged = reconcile(schedule, graph)
    depth = max((b.delay for b in merged.buffers), default=0)
    window = min(periods, depth + 2)
    findings = _Findings()
    _check_timing(findings, schedule, merged, platform, window)
    _check_constraints(findings, schedule, merged, constraints)
    coverage = _replay(findings, schedule, merged, periods, seed)
    first, last = schedule.active_window
    report = VerifyReport(
        periods,
        seed,
        findings.ordered(),
        tuple((first, last) for _ in range(periods)),
        tuple((task_id, tuple(coverage[task_id])) for task_id in sorted(coverage)),
    )
    logger.info(f"[VERIFY] {periods} periods, seed {seed}: {report.verdict} ({len(report.violations)} violations)")
    return report


# ------------------------------------------------------------------ traces


class EventKind(str, Enum):
    TASK_START = "task_start"
    TASK_FINISH = "task_finish"
    TRANSFER_START = "transfer_start"
    TRANSFER_FINISH = "transfer_finish"
    DEFINE = "define"
    OBSERVE = "observe"


_EVENT_ORDER = {
    EventKind.TASK_FINISH: 0,
    EventKind.TRANSFER_FINISH: 1,
    EventKind.DEFINE: 2,
    EventKind.OBSERVE: 3,
    EventKind.TRANSFER_START: 4,
    EventKind.TASK_START: 5,
}


@dataclass(frozen=True)
class TraceEvent:
    clock: int
    kind: EventKind
    subject: str
    lane: str
    arm: Optional[int] = None
    detail: Mapping[str, object] = field(default_factory=dict)


def simulate_timeline(
    schedule: Schedule,
    graph: TaskGraph,
    period: int = 0,
    guard_outcomes: Optional[Mapping[str, int]] = None,
) -> List[TraceEvent]:
    """Ordered events of one period in absolute clocks.

    `guard_outcomes` maps task ids to the arm that fired, when known.
    """
    offset = period * _period_length(schedule)
    outcomes = guard_outcomes or {}
    events: List[TraceEvent] = []
    for slot in schedule.slots:
        arm = outcomes.get(slot.task)
        events.append(TraceEvent(offset + slot.start, EventKind.TASK_START, slot.task, slot.processor, arm))
        events.append(TraceEvent(offset + slot.finish, EventKind.TASK_FINISH, slot.task, slot.processor, arm))
    for leg in schedule.legs:
        subject = f"{leg.buffer}#{leg.index}"
        detail = {"source": leg.source, "target": leg.target}
        events.append(TraceEvent(offset + leg.start, EventKind.TRANSFER_START, subject, leg.port, None, detail))
        events.append(TraceEvent(offset + leg.end, EventKind.TRANSFER_FINISH, subject, leg.port, None, detail))
    slots = {s.task: s for s in schedule.slots}
    for record in schedule.buffers:
        writer = slots.get(record.producer)
        lane = writer.processor if writer else ""
        if not graph.has_buffer(record.id):
            events.append(TraceEvent(offset + record.ready, EventKind.DEFINE, record.id, lane))
            continue
        ready = derived_times(schedule, graph, record.id)[0]
        events.append(TraceEvent(offset + ready, EventKind.DEFINE, record.id, lane))
        for consumer in graph.buffer(record.id).consumers:
            if consumer in slots and graph.task(consumer).delay_of(record.id) == 0:
                reader = slots[consumer]
                events.append(
                    TraceEvent(offset + reader.start, EventKind.OBSERVE, record.id, reader.processor, None, {"by": consumer})
                )
    events.sort(key=lambda e: (e.clock, _EVENT_ORDER[e.kind], e.lane, e.subject))
    return events
