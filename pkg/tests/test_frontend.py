import pytest

from builders import SCENARIOS
from rdsl_core.errors import DuplicateName, IllegalCharacter, MissingTrueArm, RdslError, RdslSyntaxError
from rdsl_core.expr import Num, Var
from rdsl_core.frontend import (
    AssignEmpty,
    Direction,
    ErrorMessage,
    FunctionCall,
    GuardKind,
    IndexRange,
    StreamRef,
    callee_interface,
    parse_sources,
    parse_unit,
    pretty_print,
    tokenize,
    validate_unit,
)


def read(*parts: str) -> str:
    return SCENARIOS.joinpath(*parts).read_text(encoding="utf-8")


def codes(diagnostics, severity="error"):
    return sorted(d.code for d in diagnostics if d.severity == severity)


class TestTokenize:
    def test_keywords_and_punctuation(self):
        kinds = [t.kind for t in tokenize("modifier m(in a, out b)")]
        assert kinds == ["kw-modifier", "ident", "lparen", "kw-in", "ident", "comma", "kw-out", "ident", "rparen"]

    def test_flow_keyword_is_case_insensitive(self):
        tokens = tokenize("Flow puschDmrs_chest_perSymbol\nflow x")
        assert [t.kind for t in tokens] == ["kw-flow", "ident", "kw-flow", "ident"]
        assert tokens[2].line == 2

    def test_comments_and_banners_are_skipped(self):
        text = "*******************\n% note\nflow f % trailing\n"
        assert [t.text for t in tokenize(text)] == ["flow", "f"]

    def test_identifiers_starting_with_flow(self):
        assert [t.kind for t in tokenize("flow flow_a")] == ["kw-flow", "ident"]

    def test_illegal_character(self):
        with pytest.raises(IllegalCharacter) as info:
            parse_unit("flow f\n  x : stream $")
        assert info.value.char == "$"
        assert info.value.pos.line == 2


class TestParseFigures:
    def test_ue_specific_flow(self):
        unit = parse_unit(read("srs_chest", "srs_chest_ue_specific.rdsl"))
        flow = unit.flow("srsChest_ueSpecific")
        assert [d.name for d in flow.streams] == [
            "srsIOSymbols",
            "ueSpecific_srsInfo",
            "error_streams_type1",
            "error_streams_type2",
            "perUE_srsChest",
        ]
        info = flow.stream("ueSpecific_srsInfo")
        assert info.direction is Direction.IN
        assert info.dims == (Var("AVG_NUM_SRS_UE"),)
        assert info.comment == "Maximum Number of UEs in a given SRS bandwidth"
        assert flow.stream("error_streams_type1").dims == (Var("AVG_NUM_SRS_UE"), Var("MAX_NUM_RX_ANT"), Num(3))
        assert flow.stream("perUE_srsChest").direction is Direction.INTERNAL
        assert [d.name for d in flow.interface] == ["srsIOSymbols", "ueSpecific_srsInfo"]

        per_antenna, to_mac = flow.body
        assert per_antenna.callee == "srsChestProc_perUE_perRxAnt_flow"
        assert per_antenna.ranges == (
            IndexRange("i", Num(1), Var("AVG_NUM_SRS_UE")),
            IndexRange("j", Num(1), Var("MAX_NUM_RX_ANT")),
        )
        assert [b.formal for b in per_antenna.bindings] == [
            "srsIOSymbols_perRxAnt_in",
            "perUE_srsInfo_in",
            "perUE_srsChest_out",
            "error_s",
        ]
        assert per_antenna.bindings[2].ref.indices == (Var("i"), Var("j"))
        assert [r.var for r in to_mac.ranges] == ["i"]

    def test_guarded_parameter_generator(self):
        modifier = parse_unit(read("srs_chest", "srs_param_gen.rdsl")).modifier("srs_perUEBW_paramGen")
        assert [(p.direction, p.name) for p in modifier.params] == [
            (Direction.IN, "perUE_srsInfo_in"),
            (Direction.OUT, "srs_perUEBW_param"),
            (Direction.OUT, "error_s"),
        ]
        defined, fallback = modifier.arms
        assert defined.condition.kind is GuardKind.DEFINED
        assert defined.condition.stream == "perUE_srsInfo_in"
        assert defined.actions == (
            FunctionCall("srs_perUEBW_paramsGen_cfunc", (StreamRef("perUE_srsInfo_in"), StreamRef("srs_perUEBW_param"))),
        )
        assert fallback.condition.kind is GuardKind.TRUE
        assert isinstance(fallback.actions[0], ErrorMessage)
        assert fallback.actions[0].target == "error_s"
        assert fallback.actions[0].message.startswith("perUE_srsInfo empty")
        assert fallback.actions[1] == AssignEmpty("srs_perUEBW_param")

    def test_high_doppler_variant(self):
        flow = parse_unit(read("mmimo", "chest_high_doppler.rdsl")).flow("puschDmrs_chest_perSymbol")
        assert flow.formals == ()
        assert flow.stream("perUEGrp_ChEst_info_in").direction is Direction.IN
        assert flow.stream("perUEGrp_ChEst_out").dims == (Var("NUM_SYMBOLS_IN_SLOT"),)
        assert [c.callee for c in flow.body] == ["chestCompensation"] * 4
        assert flow.body[3].positional[2].indices == (Num(4),)

    def test_low_doppler_variant(self):
        flow = parse_unit(read("mmimo", "chest_low_doppler.rdsl")).flow("puschDmrs_chest_perSymbol")
        assert flow.formals == ("i", "j")
        assert flow.stream("perUEGrp_ChEst_out").dims == ()
        assert flow.stream("perUEGrp_ChEst_out").direction is Direction.OUT
        assert len(flow.body) == 1

    def test_callee_interface_skips_internal_streams(self):
        unit = parse_unit(read("srs_chest", "srs_chest_proc.rdsl"))
        assert callee_interface(unit, "srsChestProc_perUE_perRxAnt_flow") == (
            "srsIOSymbols_perRxAnt_in",
            "perUE_srsInfo_in",
            "perUE_srsChest_out",
            "error_s",
        )
        assert callee_interface(unit, "srs_report_send") == ("compressed", "status")
        assert callee_interface(unit, "nowhere") is None


class TestPrettyPrint:
    @pytest.mark.parametrize(
        "parts",
        [
            ("srs_chest", "srs_chest_ue_specific.rdsl"),
            ("srs_chest", "srs_param_gen.rdsl"),
            ("srs_chest", "srs_chest_proc.rdsl"),
            ("mmimo", "chest_high_doppler.rdsl"),
            ("mmimo", "chest_low_doppler.rdsl"),
            ("mmimo", "mmimo_uplink.rdsl"),
            ("quad_cell", "quad_cell_dl.rdsl"),
        ],
    )
    def test_reparses_to_the_same_unit(self, parts):
        unit = parse_unit(read(*parts))
        printed = pretty_print(unit)
        assert parse_unit(printed) == unit
        assert pretty_print(parse_unit(printed)) == printed

    def test_empty_unit(self):
        assert pretty_print(parse_unit("% nothing here\n")) == ""


class TestParseErrors:
    def test_missing_true_arm(self):
        text = "modifier m(in a, out b)\n  guarded{first}{\n    (a != EMPTY) : f(a, b)\n  }"
        with pytest.raises(MissingTrueArm) as info:
            parse_unit(text)
        assert info.value.modifier == "m"

    def test_unknown_guard_policy(self):
        with pytest.raises(RdslSyntaxError):
            parse_unit("modifier m(in a, out b)\n  guarded{last}{\n    TRUE : f(a, b)\n  }")

    def test_zero_delay_is_rejected(self):
        with pytest.raises(RdslSyntaxError):
            parse_unit("flow f\n  a : stream\n  g(a@-0)")

    def test_unexpected_token_reports_position(self):
        with pytest.raises(RdslSyntaxError) as info:
            parse_unit("flow f\n  x : stream[\n")
        assert info.value.pos.line >= 2

    def test_duplicate_definitions_across_files(self):
        with pytest.raises(DuplicateName):
            parse_sources({"a.rdsl": "flow f\n", "b.rdsl": "modifier f(in a)\n  g(a)\n"})

    def test_error_message_needs_a_string(self):
        with pytest.raises(RdslError):
            parse_unit("modifier m(out e)\n  error_message(e)")


class TestValidate:
    def test_bundled_sources_have_no_errors(self):
        unit = parse_sources(
            {
                name: read("srs_chest", name)
                for name in ("srs_chest_ue_specific.rdsl", "srs_chest_proc.rdsl", "srs_param_gen.rdsl")
            }
        )
        diagnostics = validate_unit(unit)
        assert codes(diagnostics) == []
        assert "UnassignedOutput" in codes(diagnostics, "warning")

    def test_flow_errors(self):
        unit = parse_unit(
            """
flow top
  a : stream{type = in}
  a : stream
  b : stream{type = out}
  m(a, missing)
  m(a)
  m(src = a, nope = b)

modifier m(in src, out dst)
  f(src, dst)
"""
        )
        assert codes(validate_unit(unit)) == [
            "ArityMismatch",
            "DuplicateName",
            "UndeclaredStream",
            "UnknownFormal",
        ]

    def test_modifier_errors(self):
        unit = parse_unit(
            """
modifier m(in a, out b)
  guarded{first}{
    (b != EMPTY) : f(a, b)
    TRUE : a = EMPTY
  }
"""
        )
        found = codes(validate_unit(unit))
        assert "GuardOnNonInput" in found
        assert "AssignToNonOutput" in found

    def test_unguarded_optional_read_is_a_warning(self):
        unit = parse_unit(
            """
modifier m(in a, in opt, out b)
  guarded{first}{
    (opt != EMPTY) : f(a, opt, b)
    TRUE : f(a, opt, b)
  }
"""
        )
        diagnostics = validate_unit(unit)
        assert codes(diagnostics) == []
        assert codes(diagnostics, "warning") == ["UnguardedOptionalRead"]
