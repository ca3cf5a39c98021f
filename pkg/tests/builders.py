"""Small inline instances for tests that do not need a scenario on disk."""

from pathlib import Path
from typing import Dict, Mapping, Optional, Tuple

import yaml

from rdsl_core.constraints import API_VERSION, TIMING_EQUALITY, empty_constraints, parse_constraints, resolve_references
from rdsl_core.elaborator import elaborate, expand_siblings
from rdsl_core.frontend import parse_unit
from rdsl_core.platform import platform_from_dict
from rdsl_core.sdk import SDK_KIND, SdkCatalog, parse_sdk_meta
from rdsl_core.symbols import SymbolTable

ROOT = Path(__file__).resolve().parent.parent
SCENARIOS = ROOT / "scenarios"

BIG = 1 << 24

CHAIN_SOURCE = """
flow chain
  x : stream{type = in}
  a : stream
  b : stream
  y : stream{type = out}

  stage_0(x, a)
  stage_1(a, b)
  stage_2(b, y)

modifier stage_0(in src, out dst)
  f_0(src, dst)

modifier stage_1(in src, out dst)
  f_1(src, dst)

modifier stage_2(in src, out dst)
  f_2(src, dst)
"""

FORK_SOURCE = """
flow fork
  x : stream{type = in}
  y : stream[4]{type = out}

  job_0(x, y[1])
  job_1(x, y[2])
  job_2(x, y[3])
  job_3(x, y[4])

modifier job_0(in src, out dst)
  f_0(src, dst)

modifier job_1(in src, out dst)
  f_1(src, dst)

modifier job_2(in src, out dst)
  f_2(src, dst)

modifier job_3(in src, out dst)
  f_3(src, dst)
"""


def small_platform(cores: int = 1, bandwidth: Tuple[int, int] = (64, 1), base_clocks: int = 0) -> dict:
    """`cores` CPUs with a private L2 each, one shared L3 behind a port per core."""
    processors, memories, ports, patterns = [], [], [], []
    for i in range(cores):
        local = f"L2_{i}"
        processors.append({"name": f"c_{i}", "class": "CPU", "memories": ["L3_0"], "local_memory": local})
        memories.append({"name": local, "capacity": BIG})
        ports.append({"name": f"p_{local}", "connects": [local, "L3_0"], "bandwidth": list(bandwidth)})
        patterns += [{"name": f"pipeline.c_{i}.{local}"}, {"name": f"L2toL3.c_{i}.{local}.L3_0"}]
    memories.append({"name": "L3_0", "capacity": BIG})
    return {
        "base_clocks": base_clocks,
        "processors": processors,
        "memories": memories,
        "ports": ports,
        "patterns": patterns,
    }


def transfer_platform(cores: int = 2) -> dict:
    """Like `small_platform`, but every buffer has to cross its core's port to L3."""
    data = small_platform(cores)
    data["patterns"] = [p for p in data["patterns"] if p["name"].startswith("L2toL3.")]
    return data


def sdk_text(functions: Mapping[str, Tuple[int, int]], platform: dict) -> str:
    """One SDK document per function; every pipeline pattern first, then the L3 ones."""
    names = [p["name"] for p in platform["patterns"]]
    ordered = [n for n in names if n.startswith("pipeline.")] + [n for n in names if not n.startswith("pipeline.")]
    docs = [
        {
            "apiVersion": API_VERSION,
            "kind": SDK_KIND,
            "metadata": {"name": name},
            "spec": {"available patterns": ordered, "elementsize": size, "internalsize": 0, "runtime": runtime},
        }
        for name, (runtime, size) in functions.items()
    ]
    return yaml.safe_dump_all(docs, sort_keys=True)


def period_text(value: int, name: str = "period") -> str:
    return yaml.safe_dump(
        {
            "apiVersion": API_VERSION,
            "kind": TIMING_EQUALITY,
            "metadata": {"name": name},
            "spec": {"constraint": "equal", "variable_name": "modem_period", "value": value, "unit": "clock"},
        }
    )


def build_instance(
    source: str,
    top: str,
    functions: Mapping[str, Tuple[int, int]],
    cores: int = 1,
    period: Optional[int] = None,
    arrivals: Optional[Dict[str, int]] = None,
    platform_data: Optional[dict] = None,
):
    """(graph, platform, constraints) for an inline source, the way a scenario compiles."""
    data = platform_data or small_platform(cores)
    platform = platform_from_dict(data)
    symbols = SymbolTable()
    catalog = SdkCatalog.ground(parse_sdk_meta(sdk_text(functions, data), symbols, platform), symbols)
    graph = expand_siblings(elaborate(parse_unit(source), top, symbols, catalog, arrivals), platform)
    if period is None:
        constraints = empty_constraints()
    else:
        constraints = resolve_references(parse_constraints(period_text(period)), symbols, graph.labels)
    return graph.with_hyperperiod(constraints.hyperperiod()), platform, constraints




