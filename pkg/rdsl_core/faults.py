"""
Faults - Perturbations that break a valid schedule in one specific way

Each generator takes a verified schedule with its graph, platform and
constraints and returns a perturbed copy of all four that the verifier
should reject with exactly one violation kind.
"""

from dataclasses import dataclass, replace
from typing import Callable, Dict, Tuple

from .constraints import ConstraintDoc, ConstraintSet, Relation, TargetRole, ValueConstraint
from .errors import RdslError
from .frontend import FunctionCall, GuardArm, StreamRef, TRUE_CONDITION
from .graph import TaskGraph, build_graph
from .platform import PlatformDesc, platform_from_dict
from .schedule import Schedule, derived_times
from .timeline import memory_intervals, overlaps, sweep_peaks
from .verifier import ViolationKind, reconcile, verify

INJECTED_CONSTRAINT = "injected_deadline"


@dataclass(frozen=True)
class FaultCase:
    schedule: Schedule
    graph: TaskGraph
    platform: PlatformDesc
    constraints: ConstraintSet


Generator = Callable[[Schedule, TaskGraph, PlatformDesc, ConstraintSet], FaultCase]
GENERATORS: Dict[ViolationKind, Generator] = {}


def fault_for(kind: ViolationKind):
    def decorator(func: Generator) -> Generator:
        GENERATORS[kind] = func
        return func

    return decorator


def inject(kind: ViolationKind, schedule: Schedule, graph: TaskGraph, platform: PlatformDesc, constraints: ConstraintSet) -> FaultCase:
    return GENERATORS[kind](schedule, graph, platform, constraints)


def _with_platform(platform: PlatformDesc, **changes) -> PlatformDesc:
    data = platform.to_dict()
    data.update(changes)
    return platform_from_dict(data)


def _no_candidate(kind: ViolationKind) -> RdslError:
    return RdslError(f"no place to inject {kind.value} in this schedule")


def _only(kind: ViolationKind, case: FaultCase) -> bool:
    """Whether `case` fails for `kind` and nothing else over the steady-state window."""
    depth = max((b.delay for b in case.graph.buffers), default=0)
    report = verify(case.schedule, case.graph, case.platform, case.constraints, periods=depth + 2)
    return set(report.kinds()) == {kind}


@fault_for(ViolationKind.READ_BEFORE_DEFINE)
def late_source(schedule, graph, platform, constraints) -> FaultCase:
    """Make one source arrive after its first hard consumer has started."""
    merged = reconcile(schedule, graph)
    for source in merged.sources():
        if source.labels:
            continue
        starts = [
            schedule.start(c)
            for c in source.consumers
            if any(r.buffer == source.id and not r.optional and not r.delay for r in merged.task(c).inputs)
        ]
        if not starts:
            continue
        buffers = tuple(replace(b, arrival=min(starts) + 1) if b.id == source.id else b for b in graph.buffers)
        return FaultCase(schedule, replace(graph, buffers=buffers), platform, constraints)
    raise _no_candidate(ViolationKind.READ_BEFORE_DEFINE)


@fault_for(ViolationKind.DOUBLE_DEFINE)
def foreign_writer(schedule, graph, platform, constraints) -> FaultCase:
    """Claim that a buffer is written by a task other than its producer."""
    for record in schedule.buffers:
        other = next((s.task for s in schedule.slots if s.task != record.producer), None)
        if other is None:
            continue
        buffers = tuple(replace(r, producer=other) if r.id == record.id else r for r in schedule.buffers)
        return FaultCase(replace(schedule, buffers=buffers), graph, platform, constraints)
    raise _no_candidate(ViolationKind.DOUBLE_DEFINE)


@fault_for(ViolationKind.CAPACITY_OVERFLOW)
def shrunk_memory(schedule, graph, platform, constraints) -> FaultCase:
    """Cut the busiest memory's capacity to one byte below its peak."""
    merged = reconcile(schedule, graph)
    peaks = sweep_peaks(memory_intervals(schedule, merged, platform))
    used = [(peak, memory) for memory, (peak, _) in peaks.items() if peak > 0]
    if not used:
        raise _no_candidate(ViolationKind.CAPACITY_OVERFLOW)
    peak, memory = max(used)
    memories = [
        {**m.to_dict(), "capacity": peak - 1} if m.name == memory else m.to_dict() for m in platform.memories
    ]
    return FaultCase(schedule, graph, _with_platform(platform, memories=memories), constraints)


@fault_for(ViolationKind.PROCESSOR_OVERLAP)
def doubled_up_processor(schedule, graph, platform, constraints) -> FaultCase:
    """Move a task onto another processor busy at the same time."""
    slots = sorted(schedule.slots, key=lambda s: (s.start, s.task))
    for first in slots:
        for second in slots:
            if second.processor == first.processor or second.task <= first.task:
                continue
            if overlaps(first.start, first.finish, second.start, second.finish):
                moved = tuple(
                    replace(s, processor=first.processor) if s.task == second.task else s for s in schedule.slots
                )
                assignment = replace(
                    schedule.assignment,
                    task_to_processor={**schedule.assignment.task_to_processor, second.task: first.processor},
                )
                case = FaultCase(replace(schedule, slots=moved, assignment=assignment), graph, platform, constraints)
                if _only(ViolationKind.PROCESSOR_OVERLAP, case):
                    return case
    raise _no_candidate(ViolationKind.PROCESSOR_OVERLAP)


@fault_for(ViolationKind.PORT_OVERLAP)
def crossed_ports(schedule, graph, platform, constraints) -> FaultCase:
    """Route a transfer over a port already carrying a concurrent transfer."""
    legs = sorted((l for l in schedule.legs if l.duration), key=lambda l: (l.start, l.buffer, l.index))
    for first in legs:
        for second in legs:
            if second.port == first.port or (second.buffer, second.index) <= (first.buffer, first.index):
                continue
            if set(first.resources) & set(second.resources):
                continue
            if overlaps(first.start, first.end, second.start, second.end):
                rerouted = tuple(
                    replace(l, port=first.port, resources=(first.port,)) if l == second else l for l in schedule.legs
                )
                case = FaultCase(replace(schedule, legs=rerouted), graph, platform, constraints)
                if _only(ViolationKind.PORT_OVERLAP, case):
                    return case
    raise _no_candidate(ViolationKind.PORT_OVERLAP)


@fault_for(ViolationKind.EXCLUSIVE_DEFINE_OVERLAP)
def exclusive_patterns(schedule, graph, platform, constraints) -> FaultCase:
    """Declare two concurrently defined buffers' patterns mutually exclusive."""
    slots = {s.task: s for s in schedule.slots}
    merged = reconcile(schedule, graph)
    ends = {r.id: derived_times(schedule, merged, r.id)[1] for r in schedule.buffers}
    records = sorted(schedule.buffers, key=lambda r: r.id)
    for first in records:
        for second in records:
            if second.id <= first.id or second.producer == first.producer:
                continue
            a = (slots[first.producer].start, ends[first.id])
            b = (slots[second.producer].start, ends[second.id])
            if not overlaps(a[0], a[1], b[0], b[1]):
                continue
            patterns = []
            for pattern in platform.patterns:
                raw = pattern.to_dict()
                if pattern.name in (first.pattern, second.pattern):
                    peer = second.pattern if pattern.name == first.pattern else first.pattern
                    raw["exclusive_define_with"] = sorted(set(raw["exclusive_define_with"]) | {peer})
                patterns.append(raw)
            case = FaultCase(schedule, graph, _with_platform(platform, patterns=patterns), constraints)
            if _only(ViolationKind.EXCLUSIVE_DEFINE_OVERLAP, case):
                return case
    raise _no_candidate(ViolationKind.EXCLUSIVE_DEFINE_OVERLAP)


@fault_for(ViolationKind.DEADLINE_MISS)
def tightened_period(schedule, graph, platform, constraints) -> FaultCase:
    """Add a bound on the period variable one clock below its value."""
    name = constraints.period_variable
    value = schedule.assignment.witnesses.get(name, constraints.fixed.get(name, schedule.hyperperiod))
    if value is None:
        raise _no_candidate(ViolationKind.DEADLINE_MISS)
    doc = ConstraintDoc(INJECTED_CONSTRAINT, ValueConstraint(Relation.LE, name, value - 1))
    roles = dict(constraints.roles)
    fixed = dict(constraints.fixed)
    if name not in roles:
        roles[name] = TargetRole.FIXED
        fixed[name] = value
    tightened = ConstraintSet(constraints.docs + (doc,), roles, fixed, constraints.period_variable)
    return FaultCase(schedule, graph, platform, tightened)


@fault_for(ViolationKind.UNHANDLED_UNDEFINED_INPUT)
def unguarded_read(schedule, graph, platform, constraints) -> FaultCase:
    """Turn one task's first input optional and read it without a guard."""
    outputs_of = {t.id: set(t.outputs) for t in graph.tasks}
    for task in sorted(graph.tasks, key=lambda t: t.id):
        params = [name for name, ids in task.params if ids and not set(ids) <= outputs_of[task.id]]
        if not params:
            continue
        chosen = params[0]
        chosen_ids = set(task.param_buffers(chosen))
        inputs = tuple(replace(r, optional=True) if r.buffer in chosen_ids else r for r in task.inputs)
        call = FunctionCall(task.meta.name, tuple(StreamRef(name) for name, _ in task.params))
        rewritten = replace(task, inputs=inputs, arms=(GuardArm(TRUE_CONDITION, (call,)),), arm_costs=(task.runtime,))
        tasks = [rewritten if t.id == task.id else t for t in graph.tasks]
        rebuilt = build_graph(tasks, graph.buffers, graph.hyperperiod, graph.labels)
        return FaultCase(schedule, rebuilt, platform, constraints)
    raise _no_candidate(ViolationKind.UNHANDLED_UNDEFINED_INPUT)
