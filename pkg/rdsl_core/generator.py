"""
Generator - Seeded random instances small enough for the exhaustive oracle

An instance is a layered DAG written as RDSL source, SDK metadata for one
function per task, a platform of up to three cores around a shared L3 and
a DDR backing store, and a period constraint roomy enough for the greedy
baseline. Some tasks guard an optional second input, some read a stream
produced in the previous period.
"""

import random
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import yaml

from .constraints import API_VERSION, TIMING_EQUALITY, ConstraintSet, parse_constraints, resolve_references
from .elaborator import elaborate, expand_siblings
from .frontend import parse_unit
from .graph import TaskGraph
from .platform import PlatformDesc, platform_from_dict
from .sdk import SDK_KIND, SdkCatalog, parse_sdk_meta
from .symbols import SymbolTable

TOP_FLOW = "generated"
PERIOD_VARIABLE = "modem_period"
LOCAL_CAPACITY = 1 << 20
SHARED_CAPACITY = 1 << 22
BANDWIDTH = (64, 1)
BASE_CLOCKS = 1


@dataclass(frozen=True)
class Instance:
    """The four inputs of one generated problem, as text and parsed."""

    seed: int
    source: str
    sdk: str
    platform: Dict
    constraints: str

    def load(self) -> Tuple[TaskGraph, PlatformDesc, ConstraintSet]:
        platform = platform_from_dict(self.platform)
        symbols = SymbolTable()
        catalog = SdkCatalog.ground(parse_sdk_meta(self.sdk, symbols, platform), symbols)
        graph = elaborate(parse_unit(self.source), TOP_FLOW, symbols, catalog)
        graph = expand_siblings(graph, platform)
        constraints = resolve_references(parse_constraints(self.constraints), symbols, graph.labels, PERIOD_VARIABLE)
        return graph.with_hyperperiod(constraints.hyperperiod()), platform, constraints


def _platform(cores: int) -> Tuple[Dict, List[str]]:
    processors, memories, ports, patterns = [], [], [], []
    for i in range(cores):
        local = f"L2_{i}"
        processors.append({"name": f"c_{i}", "class": "CPU", "memories": [local, "L3_0"], "local_memory": local})
        memories.append({"name": local, "capacity": LOCAL_CAPACITY})
        ports.append({"name": f"p_{local}", "connects": [local, "L3_0"], "bandwidth": list(BANDWIDTH)})
        patterns += [
            {"name": f"pipeline.c_{i}.{local}"},
            {"name": f"pipeline.c_{i}.{local}.L3_0"},
            {"name": f"big_delay.c_{i}.{local}.L3_0.DDR_0.L3_0"},
        ]
    memories += [{"name": "L3_0", "capacity": SHARED_CAPACITY}, {"name": "DDR_0", "capacity": SHARED_CAPACITY}]
    ports.append({"name": "p_DDR_0", "connects": ["L3_0", "DDR_0"], "bandwidth": list(BANDWIDTH)})
    data = {
        "base_clocks": BASE_CLOCKS,
        "processors": processors,
        "memories": memories,
        "ports": ports,
        "patterns": patterns,
    }
    return data, [p["name"] for p in patterns]


def _modifier(index: int, inputs: List[str], guarded: bool) -> str:
    params = ", ".join([f"in x{k}" for k in range(len(inputs))] + ["out y"])
    args = ", ".join([f"x{k}" for k in range(len(inputs))] + ["y"])
    lines = [f"modifier m_{index}({params})"]
    if guarded:
        last = f"x{len(inputs) - 1}"
        fallback = ", ".join([f"x{k}" for k in range(len(inputs) - 1)] + ["y"])
        lines += [
            "  guarded {first} {",
            f"    ({last} != EMPTY): f_{index}({args})",
            f"    TRUE: f_{index}({fallback})",
            "  }",
        ]
    else:
        lines.append(f"  f_{index}({args})")
    return "\n".join(lines)


def generate_instance(
    seed: int,
    tasks: Optional[Tuple[int, int]] = (3, 7),
    cores: Optional[Tuple[int, int]] = (1, 3),
    guard_rate: float = 0.25,
    delay_rate: float = 0.15,
) -> Instance:
    """Build one random instance; the same seed always gives the same text."""
    rng = random.Random(seed)
    n = rng.randint(*tasks)
    core_count = rng.randint(*cores)
    platform, pattern_names = _platform(core_count)
    source_count = rng.randint(1, 2)
    sources = [f"src_{j}" for j in range(source_count)]

    reads: List[List[str]] = []
    guarded: List[bool] = []
    consumed = set()
    for i in range(n):
        earlier = sources + [f"s_{j}" for j in range(i)]
        picks = rng.sample(earlier, min(len(earlier), rng.randint(1, 2)))
        if i and f"s_{i - 1}" not in picks and rng.random() < 0.5:
            picks[-1] = f"s_{i - 1}"
        if n > 1 and rng.random() < delay_rate:
            later = [j for j in range(n) if j != i and f"s_{j}" not in picks]
            if later:
                picks.append(f"s_{rng.choice(later)}@-1")
        picks = list(dict.fromkeys(picks))
        consumed.update(p.split("@")[0] for p in picks)
        reads.append(picks)
        guarded.append(len(picks) > 1 and "@" not in picks[-1] and rng.random() < guard_rate)

    lines = [f"flow {TOP_FLOW}"]
    for name in sources:
        lines.append(f"  {name}: stream {{type = in}}")
    for i in range(n):
        stream = f"s_{i}"
        lines.append(f"  {stream}: stream {{type = out}}" if stream not in consumed else f"  {stream}: stream")
    for i in range(n):
        lines.append(f"  m_{i}({', '.join(reads[i] + [f's_{i}'])})")
    body = "\n".join(lines)
    modifiers = "\n\n".join(_modifier(i, reads[i], guarded[i]) for i in range(n))
    source = f"{body}\n\n{modifiers}\n"

    runtimes = [rng.randint(1, 9) for _ in range(n)]
    sizes = [64 * rng.randint(1, 8) for _ in range(n)]
    sdk_docs = [
        {
            "apiVersion": API_VERSION,
            "kind": SDK_KIND,
            "metadata": {"name": f"f_{i}"},
            "spec": {
                "available patterns": list(pattern_names),
                "elementsize": sizes[i],
                "internalsize": 0,
                "runtime": runtimes[i],
            },
        }
        for i in range(n)
    ]
    # every leg is at most BASE_CLOCKS + 8 clocks and a pattern has at most three
    period = 2 * (sum(runtimes) + n * 3 * (BASE_CLOCKS + 8)) + 10
    constraint = {
        "apiVersion": API_VERSION,
        "kind": TIMING_EQUALITY,
        "metadata": {"name": "period"},
        "spec": {"constraint": "equal", "variable_name": PERIOD_VARIABLE, "value": period, "unit": "clock"},
    }
    return Instance(
        seed,
        source,
        yaml.safe_dump_all(sdk_docs, sort_keys=True),
        platform,
        yaml.safe_dump(constraint, sort_keys=True),
    )
