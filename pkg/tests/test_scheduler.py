import pytest

from builders import CHAIN_SOURCE, build_instance
from rdsl_core.errors import Infeasible, RdslError, UnguardedRead
from rdsl_core.schedule import Objective, ObjectiveKind, SolverConfig, latency, score
from rdsl_core.scheduler import baseline_schedule, solve
from rdsl_core.timeline import earliest_fit, overlaps
from rdsl_core.verifier import verify

CHAIN_FUNCTIONS = {"f_0": (2, 64), "f_1": (3, 64), "f_2": (4, 64)}
QUICK = SolverConfig(seed=3, restarts=2, iterations=400, time_budget=30.0, workers=2)


def spans(schedule):
    return {s.task: (s.processor, s.start, s.finish) for s in schedule.slots}


class TestBaseline:
    def test_chain_runs_back_to_back(self, chain):
        schedule = baseline_schedule(*chain)
        assert spans(schedule) == {
            "stage_0": ("c_0", 0, 2),
            "stage_1": ("c_0", 2, 5),
            "stage_2": ("c_0", 5, 9),
        }
        assert schedule.legs == ()
        assert schedule.objective_value == 9
        assert schedule.active_window == (0, 9)

    def test_fork_round_robin(self, fork):
        schedule = baseline_schedule(*fork)
        assert spans(schedule) == {
            "job_0": ("c_0", 0, 5),
            "job_1": ("c_1", 0, 4),
            "job_2": ("c_0", 5, 8),
            "job_3": ("c_1", 4, 6),
        }
        assert schedule.objective_value == 8

    def test_patterns_follow_the_producer(self, fork):
        schedule = baseline_schedule(*fork)
        assert schedule.assignment.buffer_to_pattern["y[2]"] == "pipeline.c_1.L2_1"

    def test_latency_objective(self, chain):
        graph, platform, constraints = chain
        objective = Objective(ObjectiveKind.MIN_LATENCY, ("y",))
        schedule = baseline_schedule(graph, platform, constraints, objective)
        assert schedule.objective_value == 9
        assert latency(schedule, graph, ("y",)) == 9
        assert score(schedule, Objective(), graph) == 9

    def test_late_arrival_shifts_the_window(self):
        graph, platform, constraints = build_instance(CHAIN_SOURCE, "chain", CHAIN_FUNCTIONS, arrivals={"x": 3})
        schedule = baseline_schedule(graph, platform, constraints)
        assert schedule.start("stage_0") == 3
        assert schedule.active_window == (3, 12)
        assert latency(schedule, graph, ()) == 9

    def test_period_too_short(self):
        instance = build_instance(CHAIN_SOURCE, "chain", CHAIN_FUNCTIONS, period=8)
        with pytest.raises(Infeasible) as info:
            baseline_schedule(*instance)
        assert info.value.cause == "period"

    def test_roomy_period_is_recorded(self):
        graph, platform, constraints = build_instance(CHAIN_SOURCE, "chain", CHAIN_FUNCTIONS, period=20)
        schedule = baseline_schedule(graph, platform, constraints)
        assert schedule.hyperperiod == 20
        assert schedule.assignment.witnesses == {"modem_period": 20}


class TestSolve:
    def test_finds_the_better_split(self, fork):
        schedule = solve(*fork, QUICK)
        assert schedule.objective_value == 7
        assert schedule.seed == 3
        assert "workers" not in schedule.solver

    def test_never_worse_than_baseline(self, chain):
        assert solve(*chain, QUICK).objective_value == baseline_schedule(*chain).objective_value

    def test_same_seed_same_schedule(self, fork):
        first = solve(*fork, QUICK)
        second = solve(*fork, QUICK)
        assert first.slots == second.slots
        assert first.assignment == second.assignment

    def test_infeasible_everywhere(self):
        instance = build_instance(CHAIN_SOURCE, "chain", CHAIN_FUNCTIONS, period=8)
        with pytest.raises(Infeasible) as info:
            solve(*instance, QUICK)
        assert info.value.cause == "period"


class TestSolverConfig:
    @pytest.mark.parametrize(
        "changes",
        [
            {"restarts": 0},
            {"iterations": 0},
            {"initial_temperature": 0},
            {"cooling": 1.5},
            {"time_budget": -1},
            {"workers": 0},
        ],
    )
    def test_rejects_bad_values(self, changes):
        with pytest.raises(RdslError):
            SolverConfig(**changes)

    def test_objective_names(self):
        assert ObjectiveKind.parse("Latency") is ObjectiveKind.MIN_LATENCY
        assert ObjectiveKind.parse("min_active_period") is ObjectiveKind.MIN_ACTIVE_PERIOD
        assert Objective(ObjectiveKind.MIN_LATENCY, ("ul_tb",)).describe() == "MIN_LATENCY(ul_tb)"
        with pytest.raises(RdslError):
            ObjectiveKind.parse("speed")


class TestIntervals:
    def test_half_open_overlap(self):
        assert overlaps(0, 5, 4, 6)
        assert not overlaps(0, 5, 5, 6)

    def test_earliest_fit_skips_busy_spans(self):
        busy = {"p": [(2, 5), (7, 9)], "q": [(5, 6)]}
        assert earliest_fit(busy, ["p"], 0, 2) == 0
        assert earliest_fit(busy, ["p"], 0, 3) == 9
        assert earliest_fit(busy, ["p", "q"], 5, 1) == 6


PICK_SOURCE = """
flow top
  x : stream{type = in}
  y : stream{type = out}

  pick(x, y)

modifier pick(in src, out dst)
  guarded{first}{
    (src != EMPTY) : f_0(src, dst)
    TRUE : %s
  }
"""
PICK_FUNCTIONS = {"f_0": (2, 64), "f_1": (1, 64)}


class TestGuardedReads:
    def test_fallback_reading_the_tested_input(self):
        instance = build_instance(PICK_SOURCE % "f_1(src, dst)", "top", PICK_FUNCTIONS)
        with pytest.raises(UnguardedRead) as info:
            solve(*instance, QUICK)
        assert (info.value.task, info.value.param, info.value.arm) == ("pick", "src", 1)
        with pytest.raises(UnguardedRead):
            baseline_schedule(*instance)

    def test_guarded_fallback_solves_and_verifies(self):
        instance = build_instance(PICK_SOURCE % "dst = EMPTY", "top", PICK_FUNCTIONS)
        report = verify(solve(*instance, QUICK), *instance, periods=100, seed=5)
        assert report.passed
        assert all(count >= 1 for count in report.arm_counts("pick"))
        assert len(report.arm_counts("pick")) == 2
