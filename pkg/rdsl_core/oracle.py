"""
Oracle - Exhaustive branch-and-bound over the decoder's search space

Refuses anything larger than a desk-scale instance.
"""

import itertools
from typing import Dict, Optional, Set

from loguru import logger

from .constraints import ConstraintSet
from .errors import TooLarge
from .graph import TaskGraph
from .platform import PlatformDesc
from .schedule import Objective, ObjectiveKind, Schedule
from .timeline import Candidate, Evaluation, SchedulingProblem, TimelineBuilder

MAX_TASKS = 10
MAX_PROCESSORS = 3
MAX_PATTERNS = 4


def _check_size(graph: TaskGraph, platform: PlatformDesc, problem: SchedulingProblem) -> None:
    if len(graph.tasks) > MAX_TASKS:
        raise TooLarge("tasks", len(graph.tasks), MAX_TASKS)
    if len(platform.processors) > MAX_PROCESSORS:
        raise TooLarge("processors", len(platform.processors), MAX_PROCESSORS)
    for bid in problem.produced_buffers():
        producer = graph.buffer(bid).producer
        for processor in problem.candidates[producer]:
            count = len(problem.homed_patterns(bid, processor))
            if count > MAX_PATTERNS:
                raise TooLarge(f"patterns for '{bid}'", count, MAX_PATTERNS)


class _BranchAndBound:
    def __init__(self, problem: SchedulingProblem):
        self.problem = problem
        self.best: Optional[Evaluation] = None
        self.closest: Optional[Evaluation] = None
        self.visited: Set[tuple] = set()
        self.leaves = 0
        objective = problem.objective
        self.sink_ids = set(problem.graph.resolve_sinks(objective.sinks or tuple(b.id for b in problem.graph.sinks())))

    def offer(self, evaluation: Evaluation) -> None:
        if evaluation.feasible:
            if self.best is None or evaluation.score < self.best.score:
                self.best = evaluation
        elif self.closest is None or evaluation.energy < self.closest.energy:
            self.closest = evaluation

    def _state_key(self, builder: TimelineBuilder, patterns: Dict[str, str]) -> tuple:
        return (
            tuple(sorted((s.task, s.processor, s.start) for s in builder.slots.values())),
            tuple(sorted((l.buffer, l.index, l.start) for l in builder.legs)),
            tuple(sorted(patterns.items())),
        )

    def _partial(self, builder: TimelineBuilder) -> int:
        problem = self.problem
        if not builder.slots:
            return 0
        if problem.objective.kind is ObjectiveKind.MIN_ACTIVE_PERIOD:
            starts = [s.start for s in builder.slots.values()]
            ends = [s.finish for s in builder.slots.values()] + [l.end for l in builder.legs if l.end > l.start]
            first = min(starts + [l.start for l in builder.legs if l.end > l.start])
            partial = max(ends) - first
            for task_id in problem.order:
                if task_id not in builder.slots and builder.is_ready(task_id):
                    partial = max(partial, builder.earliest(task_id) + problem.rank[task_id] - first)
            return partial
        graph = problem.graph
        worst = 0
        for sink in graph.sinks():
            if sink.id in self.sink_ids and sink.producer in builder.slots:
                arrivals = [graph.buffer(s).arrival for s in graph.upstream_sources(sink.id)]
                worst = max(worst, builder.ready[sink.id] - min(arrivals, default=0))
        return worst

    def _consumable(self, task_id: str, processor: str, patterns: Dict[str, str]) -> bool:
        platform = self.problem.platform
        for ref in self.problem.graph.task(task_id).inputs:
            pattern = patterns.get(ref.buffer)
            if pattern is not None and not platform.can_consume(pattern, processor):
                return False
        return True

    def _output_options(self, task_id: str, processor: str, processors: Dict[str, str]):
        problem = self.problem
        platform = problem.platform
        options = []
        for bid in problem.graph.task(task_id).outputs:
            placed = [processors[c] for c in problem.graph.buffer(bid).consumers if c in processors]
            choices = [
                p for p in problem.homed_patterns(bid, processor) if all(platform.can_consume(p, c) for c in placed)
            ]
            if not choices:
                return None
            options.append([(bid, p) for p in choices])
        return options

    def descend(self, builder: TimelineBuilder, processors: Dict[str, str], patterns: Dict[str, str]) -> None:
        problem = self.problem
        if len(builder.slots) == len(problem.order):
            self.leaves += 1
            self.offer(problem.evaluate(Candidate(list(builder.order), dict(processors), dict(patterns))))
            return
        key = self._state_key(builder, patterns)
        if key in self.visited:
            return
        self.visited.add(key)
        if self.best is not None and self._partial(builder) >= self.best.score:
            return
        ready = sorted(t for t in problem.order if t not in builder.slots and builder.is_ready(t))
        for task_id in ready:
            for processor in problem.candidates[task_id]:
                if not self._consumable(task_id, processor, patterns):
                    continue
                with_task = {**processors, task_id: processor}
                options = self._output_options(task_id, processor, with_task)
                if options is None:
                    continue
                for combo in itertools.product(*options):
                    chosen = {**patterns, **dict(combo)}
                    child = builder.copy()
                    child.place(task_id, processor, chosen)
                    if problem.hyperperiod is not None and child.horizon > problem.hyperperiod:
                        continue
                    self.descend(child, with_task, chosen)


def brute_force(
    graph: TaskGraph,
    platform: PlatformDesc,
    constraints: ConstraintSet,
    objective: Objective = Objective(),
) -> Schedule:
    """Provably optimal schedule for small instances."""
    problem = SchedulingProblem(graph, platform, constraints, objective)
    _check_size(graph, platform, problem)
    search = _BranchAndBound(problem)
    baseline = problem.evaluate(problem.baseline_candidate())
    search.offer(baseline)
    search.descend(TimelineBuilder(problem), {}, {})
    logger.debug(f"[ORACLE] {search.leaves} complete placements, {len(search.visited)} states")
    if search.best is None:
        problem.raise_infeasible(search.closest or baseline)
    return search.best.schedule
