"""Stream generation, satisfaction and bounded refinement verdicts."""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lincheck.commands import (
    AssignVar, Choice, Context, Enf, Guard, Idle, Init, Par, Seq, beh, eval_pred,
)
from lincheck.executor import (
    COUNTEREXAMPLE, HOLDS, CapError, Generator, GeneratorError, Mode, Verdict, check_behaviour_refinement,
    check_data_refinement, check_link, enumerate_streams, execution_interval, extract_history,
    parallel_map, satisfies,
)
from lincheck.histories import History, HistoryError
from lincheck.intervals import EMPTY_INTERVAL, FALSE, TRUE, Evaluator, Interval, Stream, all_intervals
from lincheck.memstate import W, Const, MemState, Universe, Var, binop, hc2_check

INC_X = AssignVar("x", binop("+", "x", 1))
INC_Y = AssignVar("y", binop("+", "y", 1))


def _times(d: Interval) -> range:
    return range(d.lo, d.hi + 1)


# -- generation --------------------------------------------------------------

def test_idle_streams_never_write_the_context():
    ss = enumerate_streams(Idle(), ["p"], {"x"}, 3, (0, 1))
    assert ss
    for s in ss:
        assert all(not W(s.at(t), "x", "p") for t in _times(s.window))


def test_assignment_ends_in_a_written_suffix():
    ss = enumerate_streams(AssignVar("x", Const(1)), ["p"], {"x"}, 4, (0, 1))
    assert ss
    for s in ss:
        last = s.at(s.end)
        assert last["x"] == 1 and W(last, "x", "p")


def test_disjoint_increments_can_write_at_the_same_time():
    C = Par((("p", Context({"x"}, INC_X)), ("q", Context({"y"}, INC_Y))))
    ss = enumerate_streams(C, ["p", "q"], set(), 4, (0, 1))
    both = [s for s in ss
            if any(W(s.at(t), "x", "p") and W(s.at(t), "y", "q") for t in _times(execution_interval(s)))]
    assert both


def test_shared_increments_never_write_together():
    C = Par((("p", INC_X), ("q", INC_X)))
    for s in enumerate_streams(C, ["p", "q"], {"x"}, 6, (0, 1, 2)):
        for sigma in s.states:
            assert hc2_check(sigma)
            assert not (W(sigma, "x", "p") and W(sigma, "x", "q"))


def test_horizon_must_leave_room_for_a_step():
    with pytest.raises(GeneratorError):
        enumerate_streams(Idle(), ["p"], set(), 1, (0,))


def test_processes_must_match_the_parallel_branches():
    with pytest.raises(GeneratorError):
        enumerate_streams(Par((("p", Idle()),)), ["p", "q"], set(), 3, (0,))
    with pytest.raises(GeneratorError):
        enumerate_streams(Idle(), ["p", "q"], set(), 3, (0,))


def test_cap_error_names_the_cap():
    C = Par((("p", Seq(INC_X, INC_X)), ("q", Seq(INC_X, INC_X))))
    with pytest.raises(CapError, match="50"):
        enumerate_streams(C, ["p", "q"], {"x"}, 12, (0, 1, 2), cap=50)


def test_mode_validation():
    assert Mode.of("random", 3, 7) == Mode("random", 3, 7)
    with pytest.raises(ValueError):
        Mode("sometimes")


@pytest.mark.parametrize("seed", [0, 1, 17])
def test_random_walks_are_reproducible(seed):
    C = Par((("p", INC_X), ("q", INC_X)))
    a = enumerate_streams(C, ["p", "q"], {"x"}, 8, (0, 1, 2), "random", seed=seed, count=20)
    b = enumerate_streams(C, ["p", "q"], {"x"}, 8, (0, 1, 2), "random", seed=seed, count=20)
    assert [s.states for s in a] == [s.states for s in b]


def test_random_walks_are_a_subset_of_exhaustive():
    C = Par((("p", INC_X), ("q", INC_X)))
    full = {s.states for s in enumerate_streams(C, ["p", "q"], {"x"}, 6, (0, 1, 2))}
    some = enumerate_streams(C, ["p", "q"], {"x"}, 6, (0, 1, 2), "random", seed=4, count=30)
    assert some and {s.states for s in some} <= full


def test_attempt_budget_is_reported():
    g = Generator(Par((("p", INC_X), ("q", INC_X))), ["p", "q"], {"x"}, 6, (0, 1, 2))
    g.random_walks(seed=1, count=5, max_attempts=3)
    assert g.last_attempts <= 3


# -- generator soundness -----------------------------------------------------

PROGRAMS = {
    "idle": (Idle(), ("p",), {"x"}, 4),
    "inc": (INC_X, ("p",), {"x"}, 4),
    "guarded": (Seq(Guard(binop("==", "x", 0)), AssignVar("x", Const(2))), ("p",), {"x"}, 5),
    "choice": (Choice(INC_X, AssignVar("x", Const(0))), ("p",), {"x"}, 4),
    "par": (Par((("p", INC_X), ("q", INC_X))), ("p", "q"), {"x"}, 6),
    "par-local": (Par((("p", Context({"x"}, INC_X)), ("q", Context({"y"}, INC_Y)))), ("p", "q"), set(), 5),
    "init": (Init(lambda sg: sg["x"] == 1, INC_X, {"x": 1}), ("p",), {"x"}, 4),
}


@pytest.mark.parametrize("name", sorted(PROGRAMS))
def test_generated_streams_satisfy_their_behaviour(name):
    C, P, Z, H = PROGRAMS[name]
    ss = enumerate_streams(C, P, Z, H, (0, 1, 2))
    assert ss
    for s in ss:
        assert satisfies(C, P, Z, s, execution_interval(s))
        assert all(hc2_check(sigma) for sigma in s.states)


def test_perturbed_stream_breaks_an_enforced_condition():
    C = INC_X
    s = enumerate_streams(C, ["p"], {"x"}, 4, (0, 1, 2))[0]
    d = execution_interval(s)
    assert satisfies(C, ["p"], {"x"}, s, d)
    assert satisfies(Enf(TRUE, C), ["p"], {"x"}, s, d)
    assert not satisfies(Enf(FALSE, C), ["p"], {"x"}, s, d)
    # overwrite the final value so the increment's update no longer matches
    last = s.states[-1].updated({"x": 2 if s.states[-1]["x"] != 2 else 0})
    bad = Stream(s.start, s.states[:-1] + (last,))
    assert not satisfies(C, ["p"], {"x"}, bad, d)


def test_idle_on_empty_interval():
    s = enumerate_streams(Idle(), ["p"], {"x"}, 3, (0,))[0]
    assert satisfies(Idle(), ["p"], {"x"}, s, EMPTY_INTERVAL)


# -- behaviour refinement ----------------------------------------------------

def test_refinement_is_reflexive():
    v = check_behaviour_refinement(INC_X, INC_X, ["p"], {"x"}, {"x"}, 5, (0, 1, 2))
    assert v.holds and v.outcome == HOLDS and v.checked > 0


def test_enforcing_false_is_refuted_by_any_stream():
    v = check_behaviour_refinement(Enf(FALSE, INC_X), INC_X, ["p"], {"x"}, {"x"}, 5, (0, 1, 2))
    assert v.outcome == COUNTEREXAMPLE
    s, d = v.witness
    assert satisfies(INC_X, ["p"], {"x"}, s, d) and not satisfies(Enf(FALSE, INC_X), ["p"], {"x"}, s, d)


def test_stronger_guard_refines_weaker_guard():
    strong = Guard(binop("==", "x", 1))
    weak = Guard(binop("<=", "x", 1))
    assert check_behaviour_refinement(weak, strong, ["p"], {"y"}, {"y"}, 4, (0, 1, 2)).holds
    assert not check_behaviour_refinement(strong, weak, ["p"], {"y"}, {"y"}, 4, (0, 1, 2)).holds


def test_execution_interval_mode():
    v = check_behaviour_refinement(INC_X, INC_X, ["p"], {"x"}, {"x"}, 5, (0, 1, 2), intervals="execution")
    assert v.holds


def test_counterexample_persists_at_longer_horizons():
    A, C = Guard(binop("==", "x", 1)), Guard(binop("<=", "x", 1))
    short = check_behaviour_refinement(A, C, ["p"], {"y"}, {"y"}, 3, (0, 1, 2))
    longer = check_behaviour_refinement(A, C, ["p"], {"y"}, {"y"}, 5, (0, 1, 2))
    assert not short.holds and not longer.holds
    s, d = short.witness
    assert not Evaluator(s).holds(beh(["p"], {"y"}, A), d)


def test_parallel_workers_give_the_same_verdict():
    kw = dict(P=["p", "q"], Y={"x"}, Z={"x"}, horizon=6, valdom=(0, 1, 2))
    C = Par((("p", INC_X), ("q", INC_X)))
    one = check_behaviour_refinement(C, C, workers=1, **kw)
    two = check_behaviour_refinement(C, C, workers=2, **kw)
    assert one.holds == two.holds and one.checked == two.checked


def test_parallel_map_keeps_order():
    assert parallel_map(lambda i: i * i, 5, workers=2) == [0, 1, 4, 9, 16]


# -- verdicts ------------------------------------------------------------------

def test_verdict_json_shape():
    v = check_behaviour_refinement(Enf(FALSE, INC_X), INC_X, ["p"], {"x"}, {"x"}, 4, (0, 1))
    obj = json.loads(json.dumps(v.to_json()))
    assert obj["outcome"] == "counterexample"
    assert isinstance(obj["witness_trace"], list) and len(obj["witness_interval"]) == 2
    assert Verdict(HOLDS).to_json() == {"outcome": HOLDS, "witness_trace": None, "witness_interval": None}


def test_nested_verdict_parts_serialise():
    v = Verdict(HOLDS, parts={"a": Verdict(HOLDS)}, note="n")
    assert v.to_json()["parts"]["a"]["outcome"] == HOLDS and v.to_json()["note"] == "n"


# -- link and data refinement ------------------------------------------------

def _some_streams():
    return enumerate_streams(INC_X, ["p"], {"x"}, 4, (0, 1))


def test_link_with_true_simulation_holds():
    assert check_link(TRUE, lambda a, c: True, set(), _some_streams()).holds


def test_link_under_false_is_vacuous():
    assert check_link(FALSE, lambda a, c: False, set(), _some_streams()).holds


def test_link_detects_a_missing_abstract_state():
    # no abstract state pairs once x reaches 1
    sim = lambda a, c: c["x"] == 0  # noqa: E731
    v = check_link(TRUE, sim, set(), [s for s in _some_streams() if s.states[0]["x"] == 0])
    assert v.outcome == COUNTEREXAMPLE


def test_data_refinement_of_a_command_by_itself():
    C = Init(lambda sg: sg["x"] == 0, INC_X, {"x": 0})
    start = [MemState.build(Universe(("x",), ("p",)), {"x": 0})]
    v = check_data_refinement(C, C, lambda a, c: True, ["p"], set(), {"x"}, 4, (0, 1),
                              abstract_states=lambda: start, witness=lambda s: s)
    assert v.holds and set(v.parts) == {"refinit", "ref1", "ref2"}


def test_false_simulation_fails_initialisation():
    V = Universe(("a",), ("p",))
    C = Init(lambda sg: sg["x"] == 0, INC_X, {"x": 0})
    A = Init(lambda sg: sg["a"] == 1, Idle())
    abstract = [MemState.build(V, {"a": 0})]
    v = check_data_refinement(A, C, lambda a, c: True, ["p"], {"a"}, {"x"}, 4, (0, 1),
                              abstract_states=lambda: abstract)
    assert not v.parts["refinit"].holds


def test_missing_witness_is_reported():
    C = Init(lambda sg: sg["x"] == 0, INC_X, {"x": 0})
    v = check_data_refinement(C, C, lambda a, c: True, ["p"], set(), {"x"}, 4, (0, 1),
                              witness=lambda s: None)
    assert not v.parts["ref2"].holds and v.parts["ref2"].note == "no abstract witness"


# -- histories -----------------------------------------------------------------

def test_extract_history_from_the_final_state():
    V = Universe(("H",), ("p",))
    s = Stream(0, [MemState.build(V, {"H": ()})])
    assert extract_history(s, "H") == History()
    with pytest.raises(HistoryError):
        extract_history(Stream(0, [MemState.build(V, {"H": 3})]), "H")


# -- properties ----------------------------------------------------------------

@settings(max_examples=25, deadline=None)
@given(st.sampled_from(sorted(PROGRAMS)), st.integers(0, 10 ** 6))
def test_random_streams_satisfy_their_behaviour(name, seed):
    C, P, Z, H = PROGRAMS[name]
    for s in enumerate_streams(C, P, Z, H, (0, 1, 2), "random", seed=seed, count=5):
        assert satisfies(C, P, Z, s, execution_interval(s))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2), st.integers(0, 2))
def test_guard_refinement_follows_implication(a, b):
    strong = Guard(binop("==", "x", a))
    weak = Guard(binop("or", binop("==", "x", a), binop("==", "x", b)))
    assert check_behaviour_refinement(weak, strong, ["p"], set(), set(), 4, (0, 1, 2)).holds


def test_every_interval_of_a_generated_stream_is_checked():
    s = _some_streams()[0]
    ev = Evaluator(s)
    g = beh(["p"], {"x"}, INC_X)
    assert any(ev.holds(g, d) for d in all_intervals(s))
    assert not ev.holds(eval_pred("p", {"x"}, Var("x"), 7), execution_interval(s))
