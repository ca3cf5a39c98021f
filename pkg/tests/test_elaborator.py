import pytest
import yaml

from builders import small_platform, sdk_text
from rdsl_core.constraints import API_VERSION
from rdsl_core.elaborator import elaborate, expand_siblings, lower_guards, merge_redundant_siblings
from rdsl_core.errors import (
    CallDepthExceeded,
    CyclicDependency,
    DanglingConsumer,
    DoubleDefine,
    RecursiveFlow,
    ShapeMismatch,
    UnboundDimension,
    UnknownCallee,
    UnknownFunction,
    UnknownSink,
)
from rdsl_core.frontend import parse_unit
from rdsl_core.graph import External, InputRef
from rdsl_core.platform import platform_from_dict
from rdsl_core.sdk import SDK_KIND, SdkCatalog, parse_sdk_meta
from rdsl_core.symbols import SymbolTable, symbols_from_mapping

FUNCTIONS = {"f": (5, 64), "g": (7, 32)}


def catalog_for(functions=FUNCTIONS, cores=1):
    data = small_platform(cores)
    symbols = SymbolTable()
    return SdkCatalog.ground(parse_sdk_meta(sdk_text(functions, data), symbols, platform_from_dict(data)), symbols)


def run(source, top="top", symbols=None, arrivals=None, **kwargs):
    return elaborate(parse_unit(source), top, symbols or SymbolTable(), catalog_for(), arrivals, **kwargs)


MODS = """
modifier m(in src, out dst)
  f(src, dst)

modifier join(in lhs, in rhs, out dst)
  g(lhs, rhs, dst)
"""


class TestInstances:
    def test_mmimo_task_ids(self, mmimo):
        assert mmimo.graph.task_ids() == (
            "frontEnd_fft",
            "ldpc_decode",
            "mimo_equalize",
            "puschDmrs_chest_perSymbol[1][1]/chestCompensation:1",
            "puschDmrs_chest_perSymbol[1][1]/chestCompensation:2",
            "puschDmrs_chest_perSymbol[1][1]/chestCompensation:3",
            "puschDmrs_chest_perSymbol[1][1]/chestCompensation:4",
        )
        equalize = mmimo.graph.task("mimo_equalize")
        assert equalize.hard_inputs == ("antenna_samples", "chest[1]", "chest[2]", "chest[3]", "chest[4]")
        assert [b.id for b in mmimo.graph.sinks()] == ["ul_tb"]
        assert {b.id for b in mmimo.graph.sources()} == {"antenna_samples", "chest_info"}

    def test_low_doppler_index_arguments(self, mmimo_low):
        task = mmimo_low.graph.task("puschDmrs_chest_perSymbol[1][1]/chestCompensation")
        assert task.index_args == (1,)
        assert len(task.outputs) == 14
        assert len(mmimo_low.graph.tasks) == 4

    def test_ranges_expand(self):
        graph = run("flow top\n  x : stream[3]{type = in}\n  y : stream[3]{type = out}\n  m(i = 1:3, x[i], y[i])\n" + MODS)
        assert graph.task_ids() == ("m[1]", "m[2]", "m[3]")
        assert graph.task("m[2]").hard_inputs == ("x[2]",)
        assert graph.task("m[2]").outputs == ("y[2]",)
        assert [b.id for b in graph.sinks()] == ["y[1]", "y[2]", "y[3]"]

    def test_repeated_callees_are_numbered(self):
        graph = run("flow top\n  x : stream{type = in}\n  a : stream\n  y : stream{type = out}\n  m(x, a)\n  m(a, y)\n" + MODS)
        assert graph.task_ids() == ("m:1", "m:2")
        assert graph.buffer("a").producer == "m:1"
        assert graph.buffer("a").consumers == ("m:2",)
        assert graph.topological_order() == ["m:1", "m:2"]

    def test_nested_flows_prefix_paths(self):
        source = (
            "flow top\n  x : stream{type = in}\n  y : stream{type = out}\n  inner(src = x, dst = y)\n\n"
            "flow inner\n  src : stream{type = in}\n  dst : stream{type = out}\n  t : stream\n  m(src, t)\n  m(t, dst)\n"
            + MODS
        )
        graph = run(source)
        assert graph.task_ids() == ("inner/m:1", "inner/m:2")
        assert graph.has_buffer("inner/t")
        assert graph.task("inner/m:2").outputs == ("y",)

    def test_whole_stream_reads_every_written_key(self):
        source = (
            "flow top\n  x : stream[2]{type = in}\n  a : stream[2]\n  y : stream{type = out}\n"
            "  m(i = 1:2, x[i], a[i])\n  join(a[1], a, y)\n" + MODS
        )
        task = run(source).task("join")
        assert task.hard_inputs == ("a[1]", "a[2]")
        assert task.param_buffers("rhs") == ("a[1]", "a[2]")

    def test_arrivals_and_labels(self):
        source = "flow top\n  x : stream{type = in, label = t_in}\n  y : stream{type = out}\n  m(x, y)\n" + MODS
        graph = run(source, arrivals={"x": 7})
        assert graph.buffer("x").arrival == 7
        assert graph.labels == {"t_in": ("x",)}

    def test_unconsumed_buffers_become_sinks(self):
        source = "flow top\n  x : stream{type = in}\n  a : stream\n  y : stream{type = out}\n  m(x, y)\n  m(x, a)\n" + MODS
        assert run(source).buffer("a").external is External.SINK

    def test_sinks_resolve_by_stream_name(self):
        graph = run("flow top\n  x : stream[2]{type = in}\n  y : stream[2]{type = out}\n  m(i = 1:2, x[i], y[i])\n" + MODS)
        assert graph.resolve_sinks(["y"]) == ("y[1]", "y[2]")
        with pytest.raises(UnknownSink):
            graph.resolve_sinks(["z"])


class TestDelays:
    SOURCE = (
        "flow top\n  x : stream{type = in}\n  y : stream{type = out}\n  acc(x, yREF, y)\n\n"
        "modifier acc(in src, in prev, out dst)\n  g(src, prev, dst)\n"
    )

    def test_delayed_self_reference(self):
        graph = run(self.SOURCE.replace("REF", "@-1"))
        task = graph.task("acc")
        assert InputRef("y", 1) in task.inputs
        assert graph.buffer("y").delay == 1
        assert graph.same_period_producers("acc") == ()

    def test_undelayed_self_reference_is_a_cycle(self):
        with pytest.raises(CyclicDependency):
            run(self.SOURCE.replace("REF", ""))


class TestGuards:
    SOURCE = """
flow top
  x : stream{type = in}
  opt : stream{type = in}
  y : stream{type = out}
  e : stream{type = out}
  pick(x, opt, y, e)

modifier pick(in src, in maybe, out dst, out err)
  guarded{first}{
    (maybe != EMPTY) :
      g(src, maybe, dst)
    TRUE :
      error_message(err, "nothing")
      dst = EMPTY
  }
"""

    def test_worst_case_runtime_over_arms(self):
        unit = parse_unit(self.SOURCE)
        lowering = lower_guards(unit.modifier("pick"), catalog_for())
        assert lowering.arm_costs == (7, 20)
        assert lowering.runtime == 20
        assert lowering.optional_params == frozenset({"maybe"})
        assert lowering.meta.elementsize == 32

    def test_optional_inputs_are_marked(self):
        task = run(self.SOURCE).task("pick")
        assert task.optional_inputs == ("opt",)
        assert task.hard_inputs == ("x",)
        assert task.outputs == ("e", "y")

    def test_unknown_function(self):
        with pytest.raises(UnknownFunction):
            run("flow top\n  x : stream{type = in}\n  y : stream{type = out}\n  n(x, y)\n\nmodifier n(in a, out b)\n  h(a, b)\n")


class TestErrors:
    def test_double_define(self):
        with pytest.raises(DoubleDefine) as info:
            run("flow top\n  x : stream{type = in}\n  y : stream{type = out}\n  m(x, y)\n  m(x, y)\n" + MODS)
        assert info.value.producers == ("m:1", "m:2")

    def test_writing_a_source(self):
        with pytest.raises(DoubleDefine) as info:
            run("flow top\n  x : stream{type = in}\n  y : stream{type = in}\n  m(x, y)\n" + MODS)
        assert info.value.producers[0] == "SOURCE"

    def test_overlapping_prefix_writes(self):
        with pytest.raises(DoubleDefine):
            run("flow top\n  x : stream{type = in}\n  y : stream[2]{type = out}\n  m(x, y)\n  m(x, y[2])\n" + MODS)

    def test_dangling_consumer(self):
        with pytest.raises(DanglingConsumer):
            run("flow top\n  a : stream\n  y : stream{type = out}\n  m(a, y)\n" + MODS)

    def test_unknown_callee(self):
        with pytest.raises(UnknownCallee):
            run("flow top\n  x : stream{type = in}\n  nowhere(x)\n")

    def test_recursive_flow(self):
        with pytest.raises(RecursiveFlow) as info:
            run("flow top\n  x : stream{type = in}\n  top(x)\n")
        assert info.value.chain == ("top", "top")

    def test_call_depth(self):
        source = "flow top\n  x : stream{type = in}\n  y : stream{type = out}\n  inner(x, y)\n\nflow inner\n  a : stream{type = in}\n  b : stream{type = out}\n  m(a, b)\n" + MODS
        with pytest.raises(CallDepthExceeded):
            run(source, max_depth=1)

    def test_index_out_of_range(self):
        with pytest.raises(ShapeMismatch):
            run("flow top\n  x : stream{type = in}\n  y : stream[2]{type = out}\n  m(x, y[3])\n" + MODS)

    def test_unbound_dimension(self):
        with pytest.raises(UnboundDimension):
            run("flow top\n  x : stream[N]{type = in}\n  y : stream{type = out}\n  m(x, y)\n" + MODS)

    @pytest.mark.parametrize("size", [0, -2])
    def test_empty_dimension(self, size):
        with pytest.raises(UnboundDimension, match="'x'") as info:
            run(
                "flow top\n  x : stream[N]{type = in}\n  y : stream{type = out}\n  m(x, y)\n" + MODS,
                symbols=symbols_from_mapping({"N": size}, "symbols.yaml"),
            )
        assert info.value.stream == "x"

    def test_symbols_ground_dimensions(self):
        graph = run(
            "flow top\n  x : stream[N]{type = in}\n  y : stream[N]{type = out}\n  m(i = 1:N, x[i], y[i])\n" + MODS,
            symbols=symbols_from_mapping({"N": 2}, "symbols.yaml"),
        )
        assert graph.task_ids() == ("m[1]", "m[2]")


def split_catalog(platform_data):
    """`left` runs only on c_0, `right` only on c_1, `make` on either."""
    c0 = ["pipeline.c_0.L2_0", "L2toL3.c_0.L2_0.L3_0"]
    c1 = ["pipeline.c_1.L2_1", "L2toL3.c_1.L2_1.L3_0"]
    docs = [
        {
            "apiVersion": API_VERSION,
            "kind": SDK_KIND,
            "metadata": {"name": name},
            "spec": {"available patterns": patterns, "elementsize": 64, "internalsize": 0, "runtime": 3},
        }
        for name, patterns in (("make", c0 + c1), ("left", c0), ("right", c1))
    ]
    symbols = SymbolTable()
    platform = platform_from_dict(platform_data)
    return SdkCatalog.ground(parse_sdk_meta(yaml.safe_dump_all(docs), symbols, platform), symbols), platform


class TestSiblings:
    SOURCE = """
flow top
  x : stream{type = in}
  a : stream
  l : stream{type = out}
  r : stream{type = out}
  mk(x, a)
  lt(a, l)
  rt(a, r)

modifier mk(in src, out dst)
  make(src, dst)

modifier lt(in src, out dst)
  left(src, dst)

modifier rt(in src, out dst)
  right(src, dst)
"""

    @pytest.fixture
    def split(self):
        catalog, platform = split_catalog(small_platform(2))
        graph = elaborate(parse_unit(self.SOURCE), "top", SymbolTable(), catalog)
        return expand_siblings(graph, platform)

    def test_one_sibling_per_processor_group(self, split):
        assert not split.has_buffer("a")
        assert split.buffer("a~1").consumers == ("lt",)
        assert split.buffer("a~2").consumers == ("rt",)
        assert split.buffer("a~1").sibling_group == "a"
        assert split.task("mk").outputs == ("a~1", "a~2")
        assert split.task("rt").hard_inputs == ("a~2",)
        assert split.resolve_sinks(["l"]) == ("l",)

    def test_siblings_with_one_pattern_merge(self, split):
        merged = merge_redundant_siblings(split, {"a~1": "L2toL3.c_0.L2_0.L3_0", "a~2": "L2toL3.c_0.L2_0.L3_0"})
        assert merged.has_buffer("a~1") and not merged.has_buffer("a~2")
        assert merged.buffer("a~1").consumers == ("lt", "rt")
        assert merged.task("mk").outputs == ("a~1",)

    def test_distinct_patterns_stay_split(self, split):
        kept = merge_redundant_siblings(split, {"a~1": "L2toL3.c_0.L2_0.L3_0", "a~2": "pipeline.c_0.L2_0"})
        assert kept is split
