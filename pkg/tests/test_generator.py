import pytest

from rdsl_core.frontend import parse_unit, validate_unit
from rdsl_core.generator import TOP_FLOW, generate_instance


class TestGenerator:
    def test_same_seed_same_text(self):
        assert generate_instance(11) == generate_instance(11)

    def test_seeds_vary_the_instance(self):
        assert len({generate_instance(seed).source for seed in range(6)}) > 1

    @pytest.mark.parametrize("seed", range(8))
    def test_instances_load(self, seed):
        instance = generate_instance(seed)
        assert [e for e in validate_unit(parse_unit(instance.source)) if e.severity == "error"] == []
        graph, platform, constraints = instance.load()
        assert 3 <= len(graph.tasks) <= 7
        assert 1 <= len(platform.processors) <= 3
        assert graph.hyperperiod == constraints.hyperperiod()
        graph.check_acyclic()

    def test_size_ranges_are_honoured(self):
        graph, platform, _ = generate_instance(5, tasks=(4, 4), cores=(2, 2)).load()
        assert len(graph.tasks) == 4
        assert [p.name for p in platform.processors] == ["c_0", "c_1"]

    def test_top_flow_name(self):
        assert parse_unit(generate_instance(0).source).flow(TOP_FLOW).name == TOP_FLOW
