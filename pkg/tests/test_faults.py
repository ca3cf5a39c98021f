import pytest

from rdsl_core.errors import RdslError
from rdsl_core.faults import INJECTED_CONSTRAINT, inject
from rdsl_core.scheduler import baseline_schedule
from rdsl_core.verifier import ViolationKind, verify

INJECTABLE = [
    ViolationKind.READ_BEFORE_DEFINE,
    ViolationKind.DOUBLE_DEFINE,
    ViolationKind.CAPACITY_OVERFLOW,
    ViolationKind.PROCESSOR_OVERLAP,
    ViolationKind.EXCLUSIVE_DEFINE_OVERLAP,
    ViolationKind.DEADLINE_MISS,
    ViolationKind.UNHANDLED_UNDEFINED_INPUT,
]


@pytest.fixture(scope="module")
def valid(mmimo):
    schedule = baseline_schedule(mmimo.graph, mmimo.platform, mmimo.constraints, mmimo.objective)
    return schedule, mmimo.graph, mmimo.platform, mmimo.constraints


class TestInject:
    @pytest.mark.parametrize("kind", INJECTABLE, ids=lambda k: k.value)
    def test_verifier_rejects(self, valid, kind):
        case = inject(kind, *valid)
        report = verify(case.schedule, case.graph, case.platform, case.constraints, periods=200, seed=1)
        assert not report.passed
        assert set(report.kinds()) == {kind}

    def test_late_source_is_the_only_finding(self, valid):
        case = inject(ViolationKind.READ_BEFORE_DEFINE, *valid)
        report = verify(case.schedule, case.graph, case.platform, case.constraints, periods=20)
        assert set(report.kinds()) == {ViolationKind.READ_BEFORE_DEFINE}

    def test_tightened_period_names_the_bound(self, valid):
        case = inject(ViolationKind.DEADLINE_MISS, *valid)
        report = verify(case.schedule, case.graph, case.platform, case.constraints, periods=20)
        assert [v.subjects for v in report.violations] == [(INJECTED_CONSTRAINT,)]

    def test_original_is_untouched(self, valid):
        inject(ViolationKind.CAPACITY_OVERFLOW, *valid)
        assert verify(*valid, periods=20).passed

    def test_no_transfers_to_cross(self, valid):
        with pytest.raises(RdslError, match="no place"):
            inject(ViolationKind.PORT_OVERLAP, *valid)

    def test_crossed_transfers(self, transfers):
        schedule = baseline_schedule(*transfers)
        assert {l.port for l in schedule.legs} == {"p_L2_0", "p_L2_1"}
        case = inject(ViolationKind.PORT_OVERLAP, schedule, *transfers)
        report = verify(case.schedule, case.graph, case.platform, case.constraints, periods=50, seed=1)
        assert set(report.kinds()) == {ViolationKind.PORT_OVERLAP}
        assert all(v.subjects[0] in ("p_L2_0", "p_L2_1") for v in report.violations)
        assert case.graph is transfers[0]
