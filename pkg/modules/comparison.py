"""
Before/after comparison of a baseline and an optimized schedule.
"""

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

import yaml

from rdsl_core.errors import ObjectiveMismatch
from rdsl_core.schedule import Objective, Schedule

HEADERS = ("KPI", "Before & After", "Impact")


def percent_improvement(baseline: int, optimized: int) -> Decimal:
    """100 * (baseline - optimized) / baseline, half-up to one decimal place."""
    if baseline == 0:
        return Decimal("0.0")
    value = Decimal(100 * (baseline - optimized)) / Decimal(baseline)
    return value.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP)


@dataclass(frozen=True)
class ComparisonReport:
    kpi: str
    objective: str
    baseline: int
    optimized: int

    @property
    def delta(self) -> int:
        return self.baseline - self.optimized

    @property
    def percent(self) -> Decimal:
        return percent_improvement(self.baseline, self.optimized)

    def to_dict(self) -> dict:
        return {
            "kpi": self.kpi,
            "objective": self.objective,
            "baseline": self.baseline,
            "optimized": self.optimized,
            "delta": self.delta,
            "improvement_percent": str(self.percent),
            "unit": "clock",
        }

    def key_values(self) -> dict:
        return {
            "kpi": self.kpi,
            "baseline": self.baseline,
            "optimized": self.optimized,
            "delta": self.delta,
            "improvement": f"{self.percent}%",
        }

    def table(self) -> str:
        direction = "improvement" if self.delta >= 0 else "regression"
        row = (
            self.kpi,
            f"{self.baseline} -> {self.optimized} clocks",
            f"{self.delta} clocks, {self.percent}% {direction}",
        )
        widths = [max(len(h), len(c)) for h, c in zip(HEADERS, row)]
        rule = "+-" + "-+-".join("-" * w for w in widths) + "-+"

        def line(cells):
            return "| " + " | ".join(c.ljust(w) for c, w in zip(cells, widths)) + " |"

        return "\n".join([rule, line(HEADERS), rule, line(row), rule]) + "\n"


def emit_comparison(baseline: Schedule, optimized: Schedule, objective: Objective) -> ComparisonReport:
    for schedule in (baseline, optimized):
        if schedule.objective != objective:
            raise ObjectiveMismatch(schedule.objective.describe(), objective.describe())
    return ComparisonReport(objective.kind.kpi, objective.describe(), baseline.objective_value, optimized.objective_value)


def serialize_comparison(report: ComparisonReport) -> str:
    return yaml.safe_dump(report.to_dict(), sort_keys=True)
