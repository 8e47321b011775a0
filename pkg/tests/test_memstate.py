from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from lincheck.memstate import (
    KEY, NXT, Const, D, Deref, EvalError, FieldAddr, FieldVal, MemState, Perm, R, Universe, Var, W,
    accessed, binop, ctr, deref, eval_expr, hc2_check, interferes, perm_class, ptr, read_all_locs,
    value_of,
)
from lincheck.values import NULL, UNDEF, PtrCtr

TOP, NODE_X = 1, 20
AA, BB = 101, 102

# Top points at node X, whose key is aa and whose nxt points at Y
HEAP = Universe(("v", TOP, NODE_X, NODE_X + 1, 30, 31), ("p", "q"))
SIGMA = MemState.build(HEAP, {TOP: PtrCtr(NODE_X, 14), NODE_X: AA, NODE_X + 1: 30, 30: BB, 31: NULL, "v": 5})


def _with_perm(frac, loc="v", p="p") -> MemState:
    return MemState.build(HEAP, {}, {loc: {p: frac}})


# -- evaluation ---------------------------------------------------------------

@pytest.mark.parametrize("expr, expected", [
    (Const(5), 5),
    (FieldVal(ptr(deref(TOP)), KEY), AA),
    (FieldAddr(ptr(deref(TOP)), NXT), NODE_X + 1),
    (FieldVal(FieldVal(ptr(deref(TOP)), NXT), KEY), BB),
    (ctr(deref(TOP)), 14),
    (binop("+", "v", 1), 6),
    (binop("==", deref(FieldAddr(Const(30), NXT)), NULL), True),
])
def test_eval(expr, expected):
    assert eval_expr(expr, SIGMA) == expected


def test_field_value_normalises_to_a_dereference():
    e = FieldVal(Var("a"), KEY)
    assert e == Deref(FieldAddr(Var("a"), KEY))


@pytest.mark.parametrize("expr", [
    deref("v"),                      # 5 is not in the universe
    deref(Const(NULL)),
    Var("missing"),
])
def test_eval_errors(expr):
    with pytest.raises(EvalError):
        eval_expr(expr, SIGMA)


def test_value_of_is_total():
    assert value_of(deref(Const(NULL)), SIGMA) is UNDEF


# -- accessed locations -------------------------------------------------------

@pytest.mark.parametrize("expr, expected", [
    (Const(5), frozenset()),
    (Var("v"), {"v"}),
    (Deref(binop("+", Const(NODE_X), Const(1))), {NODE_X + 1}),
    (FieldVal(ptr(deref(TOP)), KEY), {TOP, NODE_X}),
    (FieldAddr(ptr(deref(TOP)), NXT), {TOP}),
])
def test_accessed(expr, expected):
    assert accessed(expr, SIGMA) == frozenset(expected)


def test_lenient_accessed_skips_bad_dereferences():
    e = deref("v")
    with pytest.raises(EvalError):
        accessed(e, SIGMA)
    assert accessed(e, SIGMA, strict=False) == {"v"}


# -- permissions --------------------------------------------------------------

@pytest.mark.parametrize("frac, cls", [
    (Fraction(1), Perm.WRITE),
    (Fraction(1, 2), Perm.READ),
    (Fraction(0), Perm.DENIED),
    (Fraction(1, 3), Perm.READ),
])
def test_perm_class(frac, cls):
    assert perm_class(_with_perm(frac), "v", "p") is cls


def test_interferes():
    sigma = MemState.build(HEAP, {}, {"v": {"q": 1}})
    assert not interferes(sigma, {"v"}, {"p", "q"})
    assert not interferes(sigma, set(), {"p"})
    assert interferes(sigma, {"v"}, {"p"})


@pytest.mark.parametrize("expr, frac, expected", [
    (Const(3), Fraction(0), True),
    (Var("v"), Fraction(1, 2), True),
    (Var("v"), Fraction(0), False),
])
def test_read_all_locs(expr, frac, expected):
    assert read_all_locs(expr, "p", _with_perm(frac)) is expected


@pytest.mark.parametrize("row, expected", [
    ({}, True),
    ({"p": 1, "q": 0}, True),
    ({"p": 1, "q": Fraction(1, 2)}, False),
    ({"p": Fraction(1, 2), "q": Fraction(1, 2)}, True),
])
def test_hc2_check(row, expected):
    assert hc2_check(MemState.build(HEAP, {}, {"v": row})) is expected


def test_permissions_are_exact_fractions():
    sigma = MemState.build(HEAP, {}, {"v": {"p": Fraction(1, 3), "q": Fraction(2, 3)}})
    assert hc2_check(sigma)
    assert sum(sigma.perms[0]) == 1


def test_write_pairs_lists_full_permissions_only():
    sigma = MemState.build(HEAP, {}, {"v": {"p": 1}, TOP: {"q": Fraction(1, 2)}})
    assert sigma.write_pairs == {("v", "p")}


def test_state_updates_are_persistent():
    s2 = SIGMA.updated({"v": 6})
    assert SIGMA["v"] == 5 and s2["v"] == 6
    assert s2.perms is SIGMA.perms


def test_render_mentions_values_and_permission_letters():
    text = MemState.build(HEAP, {"v": 3}, {"v": {"p": 1, "q": 0}}).render()
    assert "v=3[W-]" in text


def test_universe_rejects_duplicates():
    with pytest.raises(ValueError):
        Universe(("v", "v"), ("p",))


# -- invariants -----------------------------------------------------------------

fractions = st.fractions(min_value=0, max_value=1, max_denominator=6)


@given(fractions)
def test_perm_class_partitions_the_unit_interval(f):
    sigma = _with_perm(f)
    flags = [W(sigma, "v", "p"), R(sigma, "v", "p"), D(sigma, "v", "p")]
    assert sum(flags) == 1


@given(fractions, fractions)
def test_healthy_read_excludes_write(a, b):
    sigma = MemState.build(HEAP, {}, {"v": {"p": a, "q": b}})
    if hc2_check(sigma):
        if R(sigma, "v", "p") or R(sigma, "v", "q"):
            assert not (W(sigma, "v", "p") or W(sigma, "v", "q"))


addresses = st.sampled_from([TOP, NODE_X, NODE_X + 1, 30, 31, 7, NULL])


@given(addresses, st.sampled_from([KEY, NXT]))
def test_field_value_equals_deref_of_field_address(a, f):
    sigma = SIGMA.updated({"v": a})
    lhs = value_of(FieldVal(Var("v"), f), sigma)
    rhs = value_of(Deref(FieldAddr(Var("v"), f)), sigma)
    assert lhs is rhs or lhs == rhs


@given(addresses)
def test_accessed_stays_inside_the_universe(a):
    sigma = SIGMA.updated({"v": a})
    e = FieldVal(Var("v"), KEY)
    try:
        eval_expr(e, sigma)
    except EvalError:
        return
    assert accessed(e, sigma) <= set(HEAP.locations)
