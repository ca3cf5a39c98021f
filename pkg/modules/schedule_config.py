"""
Schedule configuration file: the deployment artifact the solver hands over.

`emit_schedule_config` writes configVersion 1 YAML; `parse_schedule_config`
reads it back into an identical Schedule.
"""

from typing import List

import yaml

from config.data import APP_NAME, TOOL_VERSION
from rdsl_core.errors import ScheduleMismatch
from rdsl_core.schedule import (
    Assignment,
    BufferRecord,
    LegSlot,
    Objective,
    ObjectiveKind,
    Schedule,
    TaskSlot,
)

CONFIG_VERSION = 1


def schedule_to_dict(schedule: Schedule) -> dict:
    processors = {
        name: [{"task": s.task, "start": s.start, "finish": s.finish} for s in slots]
        for name, slots in schedule.processors().items()
    }
    buffers = {}
    for record in sorted(schedule.buffers, key=lambda r: r.id):
        buffers[record.id] = {
            "pattern": record.pattern,
            "producer": record.producer,
            "size": record.size,
            "ready": record.ready,
            "define_end": record.define_end,
            "siblings": list(record.siblings),
            "legs": [
                {
                    "index": leg.index,
                    "source": leg.source,
                    "target": leg.target,
                    "port": leg.port,
                    "start": leg.start,
                    "end": leg.end,
                    "resources": list(leg.resources),
                }
                for leg in schedule.legs_of(record.id)
            ],
        }
    return {
        "configVersion": CONFIG_VERSION,
        "tool": {"name": APP_NAME, "version": TOOL_VERSION},
        "seed": schedule.seed,
        "objective": {
            "kind": schedule.objective.kind.value,
            "value": schedule.objective_value,
            "sinks": list(schedule.objective.sinks),
        },
        "hyperperiod": schedule.hyperperiod,
        "active_window": list(schedule.active_window),
        "processors": processors,
        "buffers": buffers,
        "witnesses": dict(sorted(schedule.assignment.witnesses.items())),
        "solver": dict(schedule.solver),
    }


def emit_schedule_config(schedule: Schedule) -> str:
    return yaml.safe_dump(schedule_to_dict(schedule), sort_keys=True, default_flow_style=False)


def _field(data: dict, key: str, where: str):
    if not isinstance(data, dict) or key not in data:
        raise ScheduleMismatch(f"schedule file lacks '{where}{key}'")
    return data[key]


def parse_schedule_config(text: str) -> Schedule:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ScheduleMismatch(f"schedule file is not YAML: {e}") from None
    version = _field(data, "configVersion", "")
    if version != CONFIG_VERSION:
        raise ScheduleMismatch(f"unsupported configVersion {version}")
    objective_doc = _field(data, "objective", "")
    objective = Objective(
        ObjectiveKind.parse(_field(objective_doc, "kind", "objective.")),
        tuple(objective_doc.get("sinks") or ()),
    )
    try:
        slots: List[TaskSlot] = [
            TaskSlot(str(row["task"]), str(processor), int(row["start"]), int(row["finish"]))
            for processor, rows in (_field(data, "processors", "") or {}).items()
            for row in rows
        ]
        records: List[BufferRecord] = []
        legs: List[LegSlot] = []
        for bid, doc in (_field(data, "buffers", "") or {}).items():
            records.append(
                BufferRecord(
                    str(bid),
                    str(doc["pattern"]),
                    str(doc["producer"]),
                    int(doc["size"]),
                    int(doc["ready"]),
                    int(doc["define_end"]),
                    tuple(doc.get("siblings") or ()),
                )
            )
            for leg in doc.get("legs") or ():
                legs.append(
                    LegSlot(
                        str(bid),
                        int(leg["index"]),
                        str(leg["source"]),
                        str(leg["target"]),
                        str(leg["port"]),
                        int(leg["start"]),
                        int(leg["end"]),
                        tuple(leg.get("resources") or (leg["port"],)),
                    )
                )
    except (KeyError, TypeError, ValueError) as e:
        raise ScheduleMismatch(f"malformed schedule entry: {e}") from None

    slots.sort(key=lambda s: (s.processor, s.start, s.task))
    records.sort(key=lambda r: r.id)
    legs.sort(key=lambda l: (l.buffer, l.index))
    assignment = Assignment(
        {s.task: s.processor for s in slots},
        {r.id: r.pattern for r in records},
        {str(k): int(v) for k, v in (data.get("witnesses") or {}).items()},
    )
    hyperperiod = data.get("hyperperiod")
    return Schedule(
        assignment,
        tuple(slots),
        tuple(legs),
        tuple(records),
        objective,
        int(_field(objective_doc, "value", "objective.")),
        None if hyperperiod is None else int(hyperperiod),
        int(data.get("seed") or 0),
        dict(data.get("solver") or {}),
    )
