import pytest

from builders import build_instance
from rdsl_core.errors import TooLarge
from rdsl_core.generator import generate_instance
from rdsl_core.oracle import MAX_TASKS, brute_force
from rdsl_core.schedule import Objective, ObjectiveKind
from rdsl_core.scheduler import baseline_schedule


def independent_jobs(count: int) -> str:
    lines = ["flow many", "  x : stream{type = in}", f"  y : stream[{count}]{{type = out}}", ""]
    lines += [f"  job(x, y[{i}])" for i in range(1, count + 1)]
    lines += ["", "modifier job(in src, out dst)", "  f(src, dst)", ""]
    return "\n".join(lines)


class TestBruteForce:
    def test_fork_optimum(self, fork):
        schedule = brute_force(*fork)
        assert schedule.objective_value == 7
        lanes = {p: sorted(s.task for s in slots) for p, slots in schedule.processors().items()}
        assert sorted(lanes.values()) == [["job_0", "job_3"], ["job_1", "job_2"]]

    def test_chain_cannot_improve(self, chain):
        assert brute_force(*chain).objective_value == 9

    def test_latency_objective(self, chain):
        objective = Objective(ObjectiveKind.MIN_LATENCY, ("y",))
        assert brute_force(*chain, objective).objective_value == 9

    def test_refuses_large_graphs(self):
        instance = build_instance(independent_jobs(MAX_TASKS + 1), "many", {"f": (1, 64)})
        with pytest.raises(TooLarge):
            brute_force(*instance)

    @pytest.mark.parametrize("seed", range(5))
    def test_never_worse_than_baseline(self, seed):
        graph, platform, constraints = generate_instance(seed, tasks=(3, 4), cores=(1, 2)).load()
        assert (
            brute_force(graph, platform, constraints).objective_value
            <= baseline_schedule(graph, platform, constraints).objective_value
        )
