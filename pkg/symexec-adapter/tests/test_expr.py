"""Bitvector expression construction and evaluation.

The folding constructors must never change meaning: whatever mk_*
simplifies away, evaluation under any assignment has to agree with the
unfolded node. Hypothesis drives that equivalence over random small
expression trees; the targeted cases pin the folds the machine relies
on (reflexive compares, xor/sub self-cancellation, extract of concat).
"""

import pytest
from hypothesis import given, strategies as st

from symexec.expr import (
    FALSE,
    TRUE,
    BinOp,
    BoolConst,
    Cmp,
    Const,
    Var,
    evaluate,
    evaluate_bool,
    mk_binop,
    mk_cmp,
    mk_concat,
    mk_const,
    mk_extract,
    mk_ite,
    mk_not,
    mk_sext,
    mk_zext,
    variables,
)

_BINOPS = ("add", "sub", "mul", "and", "or", "xor", "shl", "lshr", "ashr")
_CMPS = ("eq", "ne", "ult", "ule", "ugt", "uge", "slt", "sle", "sgt", "sge")


def test_const_masks_to_width():
    assert mk_const(0x1FF, 8).value == 0xFF
    assert mk_const(-1, 8).value == 0xFF


def test_const_folding_binop():
    out = mk_binop("add", mk_const(200, 8), mk_const(100, 8))
    assert isinstance(out, Const) and out.value == (300 & 0xFF)


def test_self_cancellation_folds():
    v = Var("x", 8)
    assert mk_binop("xor", v, v) == mk_const(0, 8)
    assert mk_binop("sub", v, v) == mk_const(0, 8)
    assert mk_binop("and", v, v) is v
    assert mk_binop("or", v, v) is v


def test_reflexive_compares_fold():
    v = Var("x", 8)
    assert mk_cmp("eq", v, v) is TRUE
    assert mk_cmp("ne", v, v) is FALSE
    assert mk_cmp("ule", v, v) is TRUE
    assert mk_cmp("ult", v, v) is FALSE


def test_structurally_equal_loads_fold():
    # The dead-branch fixture's x != x guard: two loads of the same
    # byte build equal exprs, so the compare folds without a solver.
    load1 = mk_zext(Var("stdin_0", 8), 32)
    load2 = mk_zext(Var("stdin_0", 8), 32)
    assert mk_cmp("ne", load1, load2) is FALSE


def test_extract_of_concat_picks_part():
    lo, hi = Var("a", 8), Var("b", 8)
    word = mk_concat((lo, hi))
    assert mk_extract(word, 0, 8) is lo
    assert mk_extract(word, 8, 8) is hi


def test_concat_single_part_is_identity():
    v = Var("a", 8)
    assert mk_concat((v,)) is v


def test_zext_of_zext_collapses():
    v = Var("a", 8)
    out = mk_zext(mk_zext(v, 32), 64)
    assert evaluate(out, {"a": 0xAB}) == 0xAB
    assert out.bits == 64


def test_sext_sign_behavior():
    v = Var("a", 8)
    assert evaluate(mk_sext(v, 32), {"a": 0x80}) == 0xFFFFFF80
    assert evaluate(mk_sext(v, 32), {"a": 0x7F}) == 0x7F


def test_mk_not_flips_compare():
    a, b = Var("a", 8), Var("b", 8)
    flipped = mk_not(mk_cmp("ult", a, b))
    assert isinstance(flipped, Cmp) and flipped.op == "uge"


def test_ite_folds_on_const_condition():
    then, orelse = mk_const(1, 8), mk_const(2, 8)
    assert mk_ite(TRUE, then, orelse) is then
    assert mk_ite(FALSE, then, orelse) is orelse


def test_width_mismatch_rejected():
    with pytest.raises(ValueError):
        mk_binop("add", Var("a", 8), Var("b", 16))
    with pytest.raises(ValueError):
        mk_cmp("eq", Var("a", 8), Var("b", 16))


def test_variables_collects_names():
    expr = mk_binop("add", Var("a", 8), mk_binop("xor", Var("b", 8), mk_const(3, 8)))
    assert variables(expr) == {"a", "b"}


# -- folding preserves meaning -------------------------------------------------

_byte = st.integers(min_value=0, max_value=255)


@st.composite
def _expr_and_env(draw, depth: int = 3):
    """A random 8-bit expression tree plus an assignment for its variables."""
    env = {"a": draw(_byte), "b": draw(_byte)}

    def leaf():
        return draw(st.sampled_from((Var("a", 8), Var("b", 8), Const(draw(_byte), 8))))

    def tree(level: int):
        if level == 0 or draw(st.booleans()):
            return leaf()
        return mk_binop(draw(st.sampled_from(_BINOPS)), tree(level - 1), tree(level - 1))

    return tree(depth), env


@given(_expr_and_env())
def test_folded_binop_matches_raw_semantics(pair):
    expr, env = pair
    # Rebuild one more operation both ways: constructor vs raw node.
    for op in _BINOPS:
        folded = mk_binop(op, expr, expr)
        raw = BinOp(op, expr, expr, expr.bits)
        assert evaluate(folded, env) == evaluate(raw, env)


@given(_expr_and_env(), st.sampled_from(_CMPS))
def test_folded_compare_matches_raw_semantics(pair, op):
    expr, env = pair
    folded = mk_cmp(op, expr, expr)
    raw = Cmp(op, expr, expr)
    assert evaluate_bool(folded, env) == evaluate_bool(raw, env)


@given(_expr_and_env(), st.sampled_from(_CMPS))
def test_mk_not_is_negation(pair, op):
    expr, env = pair
    other = mk_binop("xor", expr, mk_const(0x55, 8))
    cond = mk_cmp(op, expr, other)
    assert evaluate_bool(mk_not(cond), env) == (not evaluate_bool(cond, env))


@given(st.lists(_byte, min_size=1, max_size=8))
def test_concat_extract_roundtrip(values):
    parts = [mk_const(v, 8) for v in values]
    word = mk_concat(parts)
    for i, v in enumerate(values):
        got = mk_extract(word, i * 8, 8)
        assert isinstance(got, Const) and got.value == v
