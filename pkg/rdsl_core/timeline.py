"""
Timeline - Priority-list decoding into a timed schedule

Every search strategy proposes a Candidate: a priority order over tasks, a
processor per task and a pattern per buffer. The decoder turns it into
start clocks, transfer legs and ready times, then the evaluation checks
pattern compatibility, memory capacity, single-period fit and the timing
constraints.
"""

from dataclasses import dataclass, replace
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

from .constraints import ConstraintSet, ConstraintViolation, check_satisfaction, solve_witnesses
from .elaborator import merge_redundant_siblings
from .errors import EmptyCompatibleSet, Infeasible, RdslError
from .graph import External, TaskGraph
from .platform import PlatformDesc, ProcessorClass
from .schedule import (
    Assignment,
    BufferRecord,
    LegSlot,
    Objective,
    ObjectiveKind,
    Schedule,
    TaskSlot,
    derived_times,
    label_values,
    score,
)

Interval = Tuple[int, int]

PENALTY_WEIGHT = 1000
COMPATIBILITY_CAUSE = "EmptyCompatibleSet"


def overlaps(a_start: int, a_end: int, b_start: int, b_end: int) -> bool:
    """Half-open intervals; empty ones never overlap."""
    return a_start < a_end and b_start < b_end and a_start < b_end and b_start < a_end


def earliest_fit(busy: Mapping[str, List[Interval]], resources: Iterable[str], start: int, duration: int) -> int:
    """Earliest t >= start with [t, t + duration) free on every resource."""
    if duration <= 0:
        return start
    blocked = sorted((s, e) for resource in resources for s, e in busy.get(resource, ()) if s < e and e > start)
    t = start
    for s, e in blocked:
        if s >= t + duration:
            break
        if e > t:
            t = e
    return t


@dataclass
class Candidate:
    priority: List[str]
    processors: Dict[str, str]
    patterns: Dict[str, Optional[str]]

    def copy(self) -> "Candidate":
        return Candidate(list(self.priority), dict(self.processors), dict(self.patterns))


@dataclass(frozen=True)
class Penalty:
    cause: str
    excess: int
    detail: str = ""


@dataclass
class Evaluation:
    candidate: Candidate
    schedule: Schedule
    score: int
    penalties: Tuple[Penalty, ...] = ()

    @property
    def feasible(self) -> bool:
        return not self.penalties

    @property
    def energy(self) -> int:
        return self.score + sum(PENALTY_WEIGHT + max(p.excess, 0) for p in self.penalties)

    def binding(self) -> Penalty:
        return max(self.penalties, key=lambda p: (p.excess, p.cause))


@dataclass(frozen=True)
class MemoryInterval:
    memory: str
    start: int
    end: int
    size: int
    subject: str


class TimelineBuilder:
    """Places tasks one at a time at their earliest feasible start."""

    def __init__(self, problem: "SchedulingProblem"):
        self.problem = problem
        self.busy: Dict[str, List[Interval]] = {}
        self.resource_busy: Dict[str, List[Interval]] = {}
        self.defines: List[Tuple[int, int, str, str]] = []
        self.slots: Dict[str, TaskSlot] = {}
        self.legs: List[LegSlot] = []
        self.ready: Dict[str, int] = {}
        self.define_end: Dict[str, int] = {}
        self.patterns: Dict[str, Optional[str]] = {}
        self.representative: Dict[str, str] = {}
        self.order: List[str] = []

    def copy(self) -> "TimelineBuilder":
        other = TimelineBuilder(self.problem)
        other.busy = {k: list(v) for k, v in self.busy.items()}
        other.resource_busy = {k: list(v) for k, v in self.resource_busy.items()}
        other.defines = list(self.defines)
        other.slots = dict(self.slots)
        other.legs = list(self.legs)
        other.ready = dict(self.ready)
        other.define_end = dict(self.define_end)
        other.patterns = dict(self.patterns)
        other.representative = dict(self.representative)
        other.order = list(self.order)
        return other

    def is_ready(self, task_id: str) -> bool:
        return all(p in self.slots for p in self.problem.producers[task_id])

    def input_ready(self, buffer_id: str) -> int:
        buffer = self.problem.graph.buffer(buffer_id)
        if buffer.is_source:
            return buffer.arrival
        return self.ready[buffer_id]

    def earliest(self, task_id: str) -> int:
        return max([0] + [self.input_ready(b) for b in self.problem.timed_inputs[task_id]])

    @property
    def horizon(self) -> int:
        ends = [s.finish for s in self.slots.values()] + [l.end for l in self.legs]
        return max(ends, default=0)

    def _representatives(self, task_id: str, patterns: Mapping[str, Optional[str]]) -> List[Tuple[str, Optional[str]]]:
        graph = self.problem.graph
        seen: Dict[Tuple[str, Optional[str]], str] = {}
        reps = []
        for bid in graph.task(task_id).outputs:
            buffer = graph.buffer(bid)
            pattern = patterns.get(bid)
            if buffer.sibling_group is not None:
                group = (buffer.sibling_group, pattern)
                if group in seen:
                    self.representative[bid] = seen[group]
                    continue
                seen[group] = bid
            self.representative[bid] = bid
            reps.append((bid, pattern))
        return reps

    def _plan(self, task_id: str, reps, start: int, finish: int):
        platform = self.problem.platform
        scratch = {}
        legs: List[LegSlot] = []
        defines = []
        for bid, pattern in reps:
            t = finish
            first_end = None
            if pattern is not None:
                size = self.problem.graph.buffer(bid).size_bytes
                for index, leg in enumerate(platform.pattern(pattern).legs):
                    resources = platform.leg_resources(pattern, index)
                    duration = platform.leg_latency(leg, size)
                    view = {r: self.resource_busy.get(r, []) + scratch.get(r, []) for r in resources}
                    leg_start = earliest_fit(view, resources, t, duration)
                    if duration > 0:
                        for resource in resources:
                            scratch.setdefault(resource, []).append((leg_start, leg_start + duration))
                    legs.append(
                        LegSlot(bid, index, leg.source, leg.target, leg.port, leg_start, leg_start + duration, resources)
                    )
                    t = leg_start + duration
                    if first_end is None:
                        first_end = t
            define = (start, finish if first_end is None else first_end)
            if pattern is not None:
                for other_start, other_end, other_pattern, writer in self.defines:
                    if writer == task_id or not overlaps(define[0], define[1], other_start, other_end):
                        continue
                    if platform.mutually_exclusive(pattern, other_pattern):
                        return None
            defines.append((bid, pattern, define, t))
        return legs, defines, scratch

    def place(self, task_id: str, processor: str, patterns: Mapping[str, Optional[str]]) -> TaskSlot:
        task = self.problem.graph.task(task_id)
        t0 = self.earliest(task_id)
        reps = self._representatives(task_id, patterns)
        ends = {t0}
        ends.update(e for _, e in self.busy.get(processor, ()) if e > t0)
        ends.update(e for _, e, _, _ in self.defines if e > t0)
        for intervals in self.resource_busy.values():
            ends.update(e for _, e in intervals if e > t0)
        lane = self.busy.get(processor, [])
        for start in sorted(ends):
            finish = start + task.runtime
            if any(overlaps(s, e, start, finish) for s, e in lane):
                continue
            plan = self._plan(task_id, reps, start, finish)
            if plan is None:
                continue
            legs, defines, scratch = plan
            self.busy.setdefault(processor, []).append((start, finish))
            for resource, intervals in scratch.items():
                self.resource_busy.setdefault(resource, []).extend(intervals)
            self.legs.extend(legs)
            for bid, pattern, (d_start, d_end), ready in defines:
                if pattern is not None:
                    self.defines.append((d_start, d_end, pattern, task_id))
                self.ready[bid] = ready
                self.define_end[bid] = d_end
                self.patterns[bid] = pattern
            for bid in task.outputs:
                rep = self.representative[bid]
                self.ready[bid] = self.ready[rep]
                self.define_end[bid] = self.define_end[rep]
                self.patterns[bid] = self.patterns[rep]
            slot = TaskSlot(task_id, processor, start, finish)
            self.slots[task_id] = slot
            self.order.append(task_id)
            return slot
        raise RdslError(f"no start found for '{task_id}'")


def memory_intervals(schedule: Schedule, graph: TaskGraph, platform: PlatformDesc) -> List[MemoryInterval]:
    """Residency of every scheduled buffer and task scratch area, in one period's frame.

    The defining memory holds a buffer from producer start to the end of its
    first leg, each intermediate memory between its inbound and outbound
    legs, and the observing memory until the last same-period consumer
    finishes. Sinks stay until period end; a buffer read `k` periods later
    stays `k` more periods.
    """
    slots = {s.task: s for s in schedule.slots}
    period = schedule.hyperperiod or max(schedule.makespan, 1)
    intervals: List[MemoryInterval] = []
    for record in schedule.buffers:
        if not graph.has_buffer(record.id) or graph.buffer(record.id).producer not in slots:
            continue
        buffer = graph.buffer(record.id)
        producer = slots[buffer.producer]
        pattern = platform.pattern(record.pattern)
        legs = schedule.legs_of(record.id)
        release = derived_times(schedule, graph, record.id)[0]
        for consumer in buffer.consumers:
            if consumer in slots and graph.task(consumer).delay_of(record.id) == 0:
                release = max(release, slots[consumer].finish)
        if buffer.external is External.SINK:
            release = max(release, period)
        if buffer.delay:
            release = max(release, period * (buffer.delay + 1))
        chain = pattern.chain
        if not legs:
            intervals.append(MemoryInterval(chain[0], producer.start, release, record.size, record.id))
            continue
        intervals.append(MemoryInterval(chain[0], producer.start, legs[0].end, record.size, record.id))
        for i in range(1, len(legs)):
            intervals.append(MemoryInterval(chain[i], legs[i - 1].start, legs[i].end, record.size, record.id))
        intervals.append(MemoryInterval(chain[-1], legs[-1].start, release, record.size, record.id))
    for slot in schedule.slots:
        if not graph.has_task(slot.task):
            continue
        local = platform.processor(slot.processor).local_memory
        size = graph.task(slot.task).meta.internalsize
        if local and size:
            intervals.append(MemoryInterval(local, slot.start, slot.finish, size, slot.task))
    return intervals


def sweep_peaks(
    intervals: Iterable[MemoryInterval], constants: Optional[Mapping[str, int]] = None
) -> Dict[str, Tuple[int, int]]:
    """Peak occupancy per memory and the first clock it is reached, sampled at interval endpoints."""
    events: Dict[str, List[Tuple[int, int]]] = {}
    for interval in intervals:
        if interval.end <= interval.start:
            continue
        events.setdefault(interval.memory, []).extend(
            [(interval.start, interval.size), (interval.end, -interval.size)]
        )
    constants = constants or {}
    peaks = {memory: (amount, 0) for memory, amount in constants.items()}
    for memory, points in events.items():
        base = constants.get(memory, 0)
        level, peak, at = base, base, 0
        for clock, delta in sorted(points):
            level += delta
            if level > peak:
                peak, at = level, clock
        peaks[memory] = (peak, at)
    return peaks


def folded_peaks(intervals: Iterable[MemoryInterval], hyperperiod: Optional[int]) -> Dict[str, Tuple[int, int]]:
    """Steady-state peaks: whatever outlives the period counts as whole-period copies."""
    if not hyperperiod:
        return sweep_peaks(intervals)
    clipped = []
    constants: Dict[str, int] = {}
    for interval in intervals:
        if interval.end > hyperperiod:
            copies = -(-(interval.end - hyperperiod) // hyperperiod)
            constants[interval.memory] = constants.get(interval.memory, 0) + copies * interval.size
            interval = replace(interval, end=hyperperiod)
        clipped.append(interval)
    return sweep_peaks(clipped, constants)


class SchedulingProblem:
    """An immutable instance shared by every search strategy."""

    def __init__(
        self,
        graph: TaskGraph,
        platform: PlatformDesc,
        constraints: ConstraintSet,
        objective: Objective = Objective(),
    ):
        graph.check_acyclic()
        graph.check_guarded_reads()
        self.graph = graph
        self.platform = platform
        self.constraints = constraints
        self.objective = objective
        self.hyperperiod = graph.hyperperiod
        self.period_cause = constraints.period_constraint_name()
        if objective.kind is ObjectiveKind.MIN_LATENCY:
            graph.resolve_sinks(objective.sinks or tuple(b.id for b in graph.sinks()))
        self.candidates: Dict[str, Tuple[str, ...]] = {}
        for task in graph.tasks:
            candidates = platform.candidate_processors(task.meta.available_patterns)
            if not candidates:
                raise Infeasible(COMPATIBILITY_CAUSE, f"no processor hosts a pattern of '{task.id}'")
            self.candidates[task.id] = candidates
        self.producers = {t.id: graph.same_period_producers(t.id) for t in graph.tasks}
        self.timed_inputs = {
            t.id: tuple(sorted({r.buffer for r in t.inputs if not r.optional and not r.delay})) for t in graph.tasks
        }
        self.order = graph.topological_order()
        self.rank = self._upward_ranks()
        self._compatible: Dict[tuple, Tuple[str, ...]] = {}
        self._merged: Dict[tuple, TaskGraph] = {}

    def _upward_ranks(self) -> Dict[str, int]:
        rank: Dict[str, int] = {}
        precedence = self.graph.precedence
        for task_id in reversed(self.order):
            tail = max((rank[s] for s in precedence.successors(task_id)), default=0)
            rank[task_id] = self.graph.task(task_id).runtime + tail
        return rank

    # ----------------------------------------------------------- patterns

    def produced_buffers(self) -> Tuple[str, ...]:
        return tuple(b.id for b in self.graph.buffers if not b.is_source)

    def homed_patterns(self, buffer_id: str, processor: str) -> Tuple[str, ...]:
        """Patterns a producer on `processor` may pick before its consumers are known."""
        buffer = self.graph.buffer(buffer_id)
        meta = self.graph.task(buffer.producer).meta
        return tuple(
            name
            for name in meta.available_patterns
            if self.platform.has_pattern(name)
            and self.platform.pattern(name).home_processor == processor
            and (not buffer.delay or self.platform.pattern(name).delay_capable)
        )

    def compatible(self, buffer_id: str, processors: Mapping[str, str]) -> Tuple[str, ...]:
        buffer = self.graph.buffer(buffer_id)
        producer = processors[buffer.producer]
        consumers = tuple(sorted({processors[c] for c in buffer.consumers}))
        key = (buffer_id, producer, consumers)
        if key not in self._compatible:
            try:
                patterns = self.platform.compatible_patterns(
                    self.graph.task(buffer.producer).meta.available_patterns, producer, consumers, buffer_id
                )
            except EmptyCompatibleSet:
                patterns = ()
            if buffer.delay:
                patterns = tuple(p for p in patterns if self.platform.pattern(p).delay_capable)
            self._compatible[key] = patterns
        return self._compatible[key]

    def repair(self, candidate: Candidate, tasks: Iterable[str]) -> None:
        """Re-pick patterns touching `tasks` that their processors can no longer use."""
        touched = set()
        for task_id in tasks:
            task = self.graph.task(task_id)
            touched.update(task.outputs)
            touched.update(r.buffer for r in task.inputs)
        for bid in sorted(touched):
            buffer = self.graph.buffer(bid)
            if buffer.is_source:
                continue
            allowed = self.compatible(bid, candidate.processors)
            if candidate.patterns.get(bid) not in allowed:
                candidate.patterns[bid] = allowed[0] if allowed else self._fallback_pattern(bid, candidate)

    def _fallback_pattern(self, buffer_id: str, candidate: Candidate) -> Optional[str]:
        producer = self.graph.buffer(buffer_id).producer
        homed = self.homed_patterns(buffer_id, candidate.processors[producer])
        return homed[0] if homed else None

    # --------------------------------------------------------- candidates

    def baseline_candidate(self) -> Candidate:
        """Topological order, round-robin over CPU candidates, first compatible pattern."""
        processors = {}
        counter = 0
        for task_id in self.order:
            candidates = self.candidates[task_id]
            cpus = [p for p in candidates if self.platform.processor(p).cls is ProcessorClass.CPU] or list(candidates)
            processors[task_id] = cpus[counter % len(cpus)]
            counter += 1
        candidate = Candidate(list(self.order), processors, {})
        self.repair(candidate, self.order)
        return candidate

    def ranked_candidate(self, rng) -> Candidate:
        """Upward-rank priority with random ties, random processors."""
        ties = {task_id: rng.random() for task_id in self.order}
        priority = sorted(self.order, key=lambda t: (-self.rank[t], ties[t], t))
        processors = {task_id: rng.choice(self.candidates[task_id]) for task_id in self.order}
        candidate = Candidate(priority, processors, {})
        self.repair(candidate, self.order)
        return candidate

    # ----------------------------------------------------------- decoding

    def decode(self, candidate: Candidate) -> TimelineBuilder:
        builder = TimelineBuilder(self)
        pending = list(candidate.priority)
        while pending:
            index = next((i for i, t in enumerate(pending) if builder.is_ready(t)), None)
            if index is None:
                raise RdslError("priority list has no ready task")
            task_id = pending.pop(index)
            builder.place(task_id, candidate.processors[task_id], candidate.patterns)
        return builder

    def merged_graph(self, patterns: Mapping[str, Optional[str]]) -> TaskGraph:
        key = tuple(
            (b.id, patterns.get(b.id)) for b in self.graph.buffers if b.sibling_group is not None
        )
        if not key:
            return self.graph
        if key not in self._merged:
            self._merged[key] = merge_redundant_siblings(self.graph, patterns)
        return self._merged[key]

    def to_schedule(self, builder: TimelineBuilder, witnesses: Optional[Mapping[str, int]] = None) -> Schedule:
        graph = self.graph
        members: Dict[str, List[str]] = {}
        for bid, rep in builder.representative.items():
            members.setdefault(rep, []).append(bid)
        records = []
        for rep in sorted(members):
            pattern = builder.patterns.get(rep)
            if pattern is None:
                continue
            buffer = graph.buffer(rep)
            records.append(
                BufferRecord(
                    rep,
                    pattern,
                    buffer.producer,
                    buffer.size_bytes,
                    builder.ready[rep],
                    builder.define_end[rep],
                    tuple(sorted(m for m in members[rep] if m != rep)),
                )
            )
        slots = tuple(sorted(builder.slots.values(), key=lambda s: (s.processor, s.start, s.task)))
        assignment = Assignment(
            {s.task: s.processor for s in slots},
            {r.id: r.pattern for r in records},
            dict(sorted((witnesses or {}).items())),
        )
        legs = tuple(sorted(builder.legs, key=lambda l: (l.buffer, l.index)))
        schedule = Schedule(assignment, slots, legs, tuple(records), self.objective, 0, self.hyperperiod)
        merged = self.merged_graph(builder.patterns)
        return replace(schedule, objective_value=score(schedule, self.objective, merged))

    # --------------------------------------------------------- evaluation

    def constraint_violations(self, schedule: Schedule, graph: TaskGraph) -> Tuple[Dict[str, int], List[ConstraintViolation]]:
        known = label_values(schedule, graph)
        witnesses = solve_witnesses(self.constraints, known)
        if witnesses is None:
            fallback = {name: 0 for name in self.constraints.free_variables()}
            violations = check_satisfaction(self.constraints, {**known, **fallback})
            return fallback, violations or [ConstraintViolation("constraints", "no witness value exists", 1)]
        return witnesses, check_satisfaction(self.constraints, {**known, **witnesses})

    def evaluate(self, candidate: Candidate) -> Evaluation:
        builder = self.decode(candidate)
        penalties: List[Penalty] = []
        for bid in self.produced_buffers():
            pattern = candidate.patterns.get(bid)
            if pattern is None or pattern not in self.compatible(bid, candidate.processors):
                penalties.append(Penalty(COMPATIBILITY_CAUSE, 1, bid))
        schedule = self.to_schedule(builder)
        merged = self.merged_graph(builder.patterns)
        if self.hyperperiod is not None and schedule.makespan > self.hyperperiod:
            penalties.append(
                Penalty(self.period_cause, schedule.makespan - self.hyperperiod, f"ends at {schedule.makespan}")
            )
        peaks = folded_peaks(memory_intervals(schedule, merged, self.platform), self.hyperperiod)
        for memory, (peak, at) in sorted(peaks.items()):
            capacity = self.platform.memory(memory).capacity
            if peak > capacity:
                penalties.append(Penalty(memory, peak - capacity, f"peak {peak} > {capacity} at clock {at}"))
        witnesses, violations = self.constraint_violations(schedule, merged)
        penalties.extend(Penalty(v.constraint, v.excess, v.detail) for v in violations)
        schedule = replace(schedule, assignment=replace(schedule.assignment, witnesses=dict(sorted(witnesses.items()))))
        return Evaluation(candidate, schedule, schedule.objective_value, tuple(penalties))

    def raise_infeasible(self, evaluation: Optional[Evaluation]) -> None:
        if evaluation is None or evaluation.feasible:
            raise Infeasible("search", "no candidate was evaluated")
        worst = evaluation.binding()
        raise Infeasible(worst.cause, worst.detail)
