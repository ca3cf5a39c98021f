"""
Stream timing charts drawn from a simulated trace.

One lane per processor, then one per port, in sorted order. TEXT scales the
active window onto a fixed number of columns; SVG draws the same bars with
svgwrite and can add a memory occupancy track per memory.
"""

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import svgwrite

from config.data import GANTT_COLUMNS, SVG_CHART_WIDTH, SVG_LANE_HEIGHT
from rdsl_core.graph import TaskGraph
from rdsl_core.platform import PlatformDesc
from rdsl_core.schedule import Schedule
from rdsl_core.timeline import MemoryInterval, memory_intervals
from rdsl_core.verifier import EventKind, TraceEvent

LABEL_WIDTH = 12
SYMBOLS = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789"
LANE_COLORS = ("#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860", "#da8bc3", "#8c8c8c")
SVG_LEFT = 120
SVG_TOP = 30


class GanttFormat(str, Enum):
    SVG = "svg"
    TEXT = "text"


@dataclass(frozen=True)
class Bar:
    lane: str
    subject: str
    start: int
    end: int
    transfer: bool = False

    @property
    def duration(self) -> int:
        return self.end - self.start


def bars_from_trace(trace: Iterable[TraceEvent]) -> List[Bar]:
    """Pair start and finish events into bars; zero-length transfers are dropped."""
    opened: Dict[Tuple[str, str], int] = {}
    bars = []
    pairs = {
        EventKind.TASK_START: (EventKind.TASK_FINISH, False),
        EventKind.TRANSFER_START: (EventKind.TRANSFER_FINISH, True),
    }
    closers = {finish: (start, transfer) for start, (finish, transfer) in pairs.items()}
    for event in trace:
        if event.kind in pairs:
            opened[(event.kind.value, event.subject)] = event.clock
        elif event.kind in closers:
            start_kind, transfer = closers[event.kind]
            start = opened.pop((start_kind.value, event.subject), None)
            if start is None or (transfer and event.clock == start):
                continue
            bars.append(Bar(event.lane, event.subject, start, event.clock, transfer))
    return sorted(bars, key=lambda b: (b.transfer, b.lane, b.start, b.subject))


def _lanes(bars: Sequence[Bar]) -> List[str]:
    return list(dict.fromkeys(b.lane for b in sorted(bars, key=lambda b: (b.transfer, b.lane))))


def _window(bars: Sequence[Bar]) -> Tuple[int, int]:
    if not bars:
        return 0, 0
    return min(b.start for b in bars), max(b.end for b in bars)


def _column(clock: int, first: int, span: int, columns: int) -> int:
    return min(columns, (clock - first) * columns // span)


def render_text(bars: Sequence[Bar], columns: int = GANTT_COLUMNS) -> str:
    first, last = _window(bars)
    span = max(last - first, 1)
    per_column = (Decimal(span) / Decimal(columns)).quantize(Decimal("0.0001"), rounding=ROUND_HALF_UP)
    lines = [f"legend: {per_column} clocks per column, window {first}..{last}"]
    lines.append(f"{'':<{LABEL_WIDTH}}+{'-' * columns}+")
    symbols = {bar: SYMBOLS[i % len(SYMBOLS)] for i, bar in enumerate(bars)}
    for lane in _lanes(bars):
        row = [" "] * columns
        for bar in bars:
            if bar.lane != lane:
                continue
            lo = _column(bar.start, first, span, columns)
            hi = max(_column(bar.end, first, span, columns), lo + 1)
            for c in range(lo, min(hi, columns)):
                row[c] = symbols[bar]
        lines.append(f"{lane[:LABEL_WIDTH]:<{LABEL_WIDTH}}|{''.join(row)}|")
    lines.append(f"{'':<{LABEL_WIDTH}}+{'-' * columns}+")
    lines.append("bars:")
    for bar in bars:
        lines.append(f"  {symbols[bar]} {bar.lane} {bar.subject} start={bar.start} duration={bar.duration}")
    return "\n".join(lines) + "\n"


def occupancy_steps(intervals: Iterable[MemoryInterval]) -> Dict[str, List[Tuple[int, int]]]:
    """Occupancy level per memory after each change, as (clock, bytes) steps."""
    deltas: Dict[str, Dict[int, int]] = {}
    for interval in intervals:
        if interval.end <= interval.start:
            continue
        points = deltas.setdefault(interval.memory, {})
        points[interval.start] = points.get(interval.start, 0) + interval.size
        points[interval.end] = points.get(interval.end, 0) - interval.size
    steps = {}
    for memory in sorted(deltas):
        level, track = 0, []
        for clock in sorted(deltas[memory]):
            level += deltas[memory][clock]
            track.append((clock, level))
        steps[memory] = track
    return steps


def occupancy_track(schedule: Schedule, graph: TaskGraph, platform: PlatformDesc) -> Dict[str, List[Tuple[int, int]]]:
    return occupancy_steps(memory_intervals(schedule, graph, platform))


def _x(clock: int, first: int, span: int, width: int) -> float:
    return round(SVG_LEFT + (clock - first) * width / span, 2)


def render_svg(
    bars: Sequence[Bar],
    occupancy: Optional[Mapping[str, Sequence[Tuple[int, int]]]] = None,
    width: int = SVG_CHART_WIDTH,
    lane_height: int = SVG_LANE_HEIGHT,
) -> str:
    occupancy = occupancy or {}
    lanes = _lanes(bars)
    first, last = _window(bars)
    span = max(last - first, 1)
    rows = len(lanes) + len(occupancy)
    height = SVG_TOP + rows * lane_height + 20
    total = SVG_LEFT + width + 10
    dwg = svgwrite.Drawing(size=(total, height), debug=False)
    dwg.add(dwg.rect(insert=(0, 0), size=(total, height), fill="white", stroke="none"))

    # clock ruler
    dwg.add(dwg.line((SVG_LEFT, SVG_TOP - 8), (SVG_LEFT + width, SVG_TOP - 8), stroke="black", stroke_width=1))
    step = max(1, span // 10)
    for clock in range(first, last + 1, step):
        x = _x(clock, first, span, width)
        dwg.add(dwg.line((x, SVG_TOP - 12), (x, SVG_TOP - 8), stroke="black", stroke_width=1))
        dwg.add(dwg.text(str(clock), insert=(x, SVG_TOP - 14), font_size=9, text_anchor="middle"))

    for row, lane in enumerate(lanes):
        y = SVG_TOP + row * lane_height
        color = LANE_COLORS[row % len(LANE_COLORS)]
        dwg.add(dwg.text(lane, insert=(4, y + lane_height * 0.65), font_size=11))
        dwg.add(dwg.line((SVG_LEFT, y + lane_height), (SVG_LEFT + width, y + lane_height), stroke="#d3d3d3"))
        for bar in bars:
            if bar.lane != lane:
                continue
            x = _x(bar.start, first, span, width)
            room = round(SVG_LEFT + width - x, 2)
            w = min(max(round(bar.duration * width / span, 2), 0.5), room)
            dwg.add(
                dwg.rect(
                    insert=(x, y + 3),
                    size=(w, lane_height - 6),
                    fill=color,
                    stroke="black",
                    stroke_width=0.5,
                )
            )
            dwg.add(dwg.text(bar.subject, insert=(x + 2, y + lane_height * 0.65), font_size=8, fill="white"))

    for index, memory in enumerate(sorted(occupancy)):
        y = SVG_TOP + (len(lanes) + index) * lane_height
        track = occupancy[memory]
        peak = max((level for _, level in track), default=0) or 1
        dwg.add(dwg.text(memory, insert=(4, y + lane_height * 0.65), font_size=11))
        points = [(SVG_LEFT, y + lane_height)]
        level = 0
        for clock, new_level in track:
            x = _x(min(max(clock, first), last), first, span, width)
            points.append((x, round(y + lane_height - level * (lane_height - 4) / peak, 2)))
            level = new_level
            points.append((x, round(y + lane_height - level * (lane_height - 4) / peak, 2)))
        dwg.add(dwg.polyline(points, fill="none", stroke="#444444", stroke_width=1))
    return dwg.tostring() + "\n"


def emit_gantt(
    trace: Iterable[TraceEvent],
    fmt: GanttFormat = GanttFormat.TEXT,
    occupancy: Optional[Mapping[str, Sequence[Tuple[int, int]]]] = None,
) -> str:
    bars = bars_from_trace(trace)
    if GanttFormat(fmt) is GanttFormat.SVG:
        return render_svg(bars, occupancy)
    return render_text(bars)
