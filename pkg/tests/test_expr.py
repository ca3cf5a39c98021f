import pytest

from rdsl_core.errors import ConflictingBinding, DivisionByZero, RdslError, UnboundSymbol
from rdsl_core.expr import (
    BinOp,
    Chain,
    Num,
    Var,
    eval_expr,
    expr_from_value,
    format_expr,
    free_names,
    parse_expr,
    substitute,
    truncating_div,
)
from rdsl_core.symbols import SymbolTable, symbols_from_mapping


class TestExpressions:
    def test_precedence(self):
        assert eval_expr(parse_expr("2 + 3 * 4"), {}) == 14
        assert eval_expr(parse_expr("(2 + 3) * 4"), {}) == 20
        assert eval_expr(parse_expr("-3 * 2"), {}) == -6
        assert eval_expr(parse_expr("10 - 4 - 3"), {}) == 3

    def test_division_truncates_toward_zero(self):
        assert truncating_div(7, 2) == 3
        assert truncating_div(-7, 2) == -3
        assert truncating_div(7, -2) == -3
        assert eval_expr(parse_expr("0 - 7 / 2"), {}) == -3

    def test_division_by_zero(self):
        with pytest.raises(DivisionByZero):
            eval_expr(parse_expr("4 / (2 - 2)"), {})

    def test_symbols_resolve(self):
        table = symbols_from_mapping({"NUM_PRB": 20, "LLR_BYTES": 128}, "symbols.yaml")
        assert eval_expr(parse_expr("NUM_PRB * 12 * LLR_BYTES"), table) == 30720

    def test_unbound_symbol(self):
        with pytest.raises(UnboundSymbol) as info:
            eval_expr(parse_expr("NUM_PRB + 1"), SymbolTable())
        assert info.value.name == "NUM_PRB"

    def test_comparison_chain(self):
        chain = parse_expr("C <= A*370 + B < 500")
        assert isinstance(chain, Chain)
        assert chain.relations == ("<=", "<")
        assert free_names(chain) == {"A", "B", "C"}
        assert eval_expr(chain, {"A": 1, "B": 0, "C": 300}) is True
        assert eval_expr(chain, {"A": 1, "B": 130, "C": 300}) is False

    def test_substitute_renames_letters(self):
        chain = substitute(parse_expr("C <= A*370 + B"), {"A": "num_ue1", "C": "grid_period"})
        assert free_names(chain) == {"num_ue1", "B", "grid_period"}

    def test_format_keeps_needed_parentheses(self):
        for text in ("(a + b) * c", "a - (b - c)", "a - b - c", "a / (b * c)", "C <= A * 370 + B < 500"):
            assert format_expr(parse_expr(text)) == text
        assert format_expr(BinOp("*", Var("a"), BinOp("+", Num(1), Num(2)))) == "a * (1 + 2)"

    def test_expr_from_value(self):
        assert expr_from_value(5) == Num(5)
        assert expr_from_value("NUM_PRB * 25") == BinOp("*", Var("NUM_PRB"), Num(25))
        with pytest.raises(RdslError):
            expr_from_value("1 < 2")
        with pytest.raises(RdslError):
            expr_from_value(True)

    def test_syntax_error_has_position(self):
        with pytest.raises(RdslError) as info:
            parse_expr("3 * * 4")
        assert info.value.pos is not None


class TestSymbolTable:
    def test_bind_returns_new_table(self):
        empty = SymbolTable()
        table = empty.bind([("MAX_NUM_RX_ANT", 2, "symbols.yaml")])
        assert len(empty) == 0
        assert table.lookup("MAX_NUM_RX_ANT") == 2
        assert table.provenance("MAX_NUM_RX_ANT") == "symbols.yaml"

    def test_rebinding_same_value_is_allowed(self):
        table = SymbolTable().bind([("N", 4, "a")]).bind([("N", 4, "b")])
        assert table.lookup("N") == 4
        assert table.provenance("N") == "a"

    def test_conflicting_binding(self):
        table = SymbolTable().bind([("N", 4, "manifest")])
        with pytest.raises(ConflictingBinding) as info:
            table.bind([("N", 5, "cli")])
        assert info.value.provenances == ("manifest", "cli")

    def test_unbound_placeholder_can_be_filled(self):
        table = SymbolTable().bind([("gp_base", None, "constraints")])
        assert "gp_base" in table
        assert not table.is_bound("gp_base")
        assert table.get("gp_base", -1) == -1
        assert table.bind([("gp_base", 7, "witness")]).lookup("gp_base") == 7

    def test_rejects_bad_names_and_values(self):
        with pytest.raises(RdslError):
            SymbolTable().bind([("9lives", 1, "x")])
        with pytest.raises(RdslError):
            SymbolTable().bind([("flag", True, "x")])
