"""
Scheduler - Greedy baseline and simulated-annealing search

Both build on the priority-list decoder in timeline.py. The annealer runs
independent restarts, each from its own derived seed, and keeps only
states that pass every check.
"""

import math
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import List, Optional, Tuple

import psutil
from loguru import logger

from utils.colors import Colors

from .constraints import ConstraintSet
from .errors import RdslError
from .graph import TaskGraph
from .platform import PlatformDesc
from .schedule import Objective, Schedule, SolverConfig
from .timeline import Candidate, Evaluation, SchedulingProblem
from .verifier import verify

SEED_STRIDE = 1_000_003
MOVES = ("processor", "pattern", "swap", "shift")


def baseline_schedule(
    graph: TaskGraph,
    platform: PlatformDesc,
    constraints: ConstraintSet,
    objective: Objective = Objective(),
) -> Schedule:
    """Deterministic greedy list schedule used as the comparison anchor."""
    problem = SchedulingProblem(graph, platform, constraints, objective)
    evaluation = problem.evaluate(problem.baseline_candidate())
    if not evaluation.feasible:
        problem.raise_infeasible(evaluation)
    logger.info(f"[BASELINE] {objective.describe()} = {evaluation.score}")
    return evaluation.schedule


def _propose(problem: SchedulingProblem, current: Candidate, rng: random.Random) -> Optional[Candidate]:
    move = MOVES[rng.randrange(len(MOVES))]
    candidate = current.copy()
    tasks = candidate.priority
    if move == "processor":
        movable = [t for t in problem.order if len(problem.candidates[t]) > 1]
        if not movable:
            return None
        task_id = rng.choice(movable)
        choices = [p for p in problem.candidates[task_id] if p != candidate.processors[task_id]]
        candidate.processors[task_id] = rng.choice(choices)
        for bid in problem.graph.task(task_id).outputs:
            allowed = problem.compatible(bid, candidate.processors)
            if allowed:
                candidate.patterns[bid] = rng.choice(allowed)
        problem.repair(candidate, [task_id])
        return candidate
    if move == "pattern":
        choices = [
            bid for bid in problem.produced_buffers() if len(problem.compatible(bid, candidate.processors)) > 1
        ]
        if not choices:
            return None
        bid = rng.choice(choices)
        others = [p for p in problem.compatible(bid, candidate.processors) if p != candidate.patterns.get(bid)]
        candidate.patterns[bid] = rng.choice(others)
        return candidate
    if len(tasks) < 2:
        return None
    if move == "swap":
        i, j = rng.sample(range(len(tasks)), 2)
        tasks[i], tasks[j] = tasks[j], tasks[i]
        return candidate
    task_id = tasks.pop(rng.randrange(len(tasks)))
    tasks.insert(rng.randrange(len(tasks) + 1), task_id)
    return candidate


def _anneal(
    problem: SchedulingProblem, config: SolverConfig, restart: int, deadline: float
) -> Tuple[Optional[Evaluation], Evaluation]:
    """One restart; returns (best feasible, lowest-energy) evaluations."""
    rng = random.Random(config.seed * SEED_STRIDE + restart)
    start = problem.baseline_candidate() if restart == 0 else problem.ranked_candidate(rng)
    current = problem.evaluate(start)
    best = current if current.feasible else None
    closest = current
    temperature = config.initial_temperature
    logger.debug(f"[SOLVE] restart {restart} starts at {current.score} (feasible: {current.feasible})")
    for iteration in range(config.iterations):
        if time.monotonic() > deadline:
            logger.warning(
                f"{Colors.WARNING}[SOLVE] time budget hit in restart {restart} after {iteration} iterations{Colors.RESET}"
            )
            break
        proposal = _propose(problem, current.candidate, rng)
        if proposal is not None:
            evaluation = problem.evaluate(proposal)
            delta = evaluation.energy - current.energy
            if delta <= 0 or rng.random() < math.exp(-delta / temperature):
                current = evaluation
            if evaluation.feasible and (best is None or evaluation.score < best.score):
                best = evaluation
                logger.debug(f"[SOLVE] restart {restart} iteration {iteration}: new best {best.score}")
            if evaluation.energy < closest.energy:
                closest = evaluation
        temperature *= config.cooling
    logger.debug(f"[SOLVE] restart {restart} done, best {best.score if best else 'none'}")
    return best, closest


def _worker_count(config: SolverConfig) -> int:
    if config.workers:
        return min(config.workers, config.restarts)
    return max(1, min(psutil.cpu_count(logical=False) or 1, config.restarts))


def _post_check(schedule: Schedule, graph: TaskGraph, platform: PlatformDesc, constraints: ConstraintSet, seed: int) -> None:
    depth = max((b.delay for b in graph.buffers), default=0)
    report = verify(schedule, graph, platform, constraints, periods=depth + 2, seed=seed)
    if not report.passed:
        kinds = ", ".join(sorted({v.kind.value for v in report.violations}))
        raise RdslError(f"solver produced a schedule that fails verification: {kinds}")


def solve(
    graph: TaskGraph,
    platform: PlatformDesc,
    constraints: ConstraintSet,
    config: SolverConfig = SolverConfig(),
) -> Schedule:
    """Search for the best feasible schedule under `config.objective`."""
    problem = SchedulingProblem(graph, platform, constraints, config.objective)
    deadline = time.monotonic() + config.time_budget
    workers = _worker_count(config)
    logger.info(
        f"[SOLVE] {len(graph.tasks)} tasks, {config.restarts} restarts x {config.iterations} iterations, {workers} worker(s)"
    )
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results: List[Tuple[Optional[Evaluation], Evaluation]] = list(
            pool.map(lambda r: _anneal(problem, config, r, deadline), range(config.restarts))
        )
    feasible = [(best.score, restart, best) for restart, (best, _) in enumerate(results) if best is not None]
    if not feasible:
        closest = min((c for _, c in results), key=lambda e: e.energy)
        problem.raise_infeasible(closest)
    score, restart, best = min(feasible, key=lambda item: (item[0], item[1]))
    schedule = replace(best.schedule, seed=config.seed, solver=config.to_dict())
    _post_check(schedule, graph, platform, constraints, config.seed)
    logger.info(f"[SOLVE] {config.objective.describe()} = {score} (restart {restart})")
    return schedule
