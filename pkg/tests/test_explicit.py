import pytest

from conftest import spec
from topoinv.explicit import check_invariant_explicit, explicit_reach
from topoinv.invariant import AshcroftInvariant, InvariantEntry
from topoinv.logic import TRUE, LogicError
from topoinv.symmetry import enumerate_qf_types


def test_single_token_ring_visits_one_state_per_square():
    # one token circulates: it sits on exactly one of the n squares
    for n in (3, 4, 5):
        res = explicit_reach(spec("ring_token").instance(n))
        assert res.status == "safe" and res.states == n


def test_star_lock_reachable_states():
    # lock free and nobody inside, or lock held by exactly one process
    res = explicit_reach(spec("star_lock").instance(2))
    assert res.safe and res.states == 3


def test_bug_gives_a_trace_from_an_initial_state():
    P = spec("ring_token_bug").instance(3)
    res = explicit_reach(P)
    assert res.status == "unsafe"
    actor, first = res.trace[0]
    assert actor is None
    assert [st["tok"] for name, st in sorted(first.items()) if name.startswith("s")] == [True, False, False]
    assert all(a is not None for a, _ in res.trace[1:])
    last = res.trace[-1][1]
    assert sum(st.get("tok", False) for st in last.values()) >= 2


def test_star_mutex_bug_is_unsafe_with_two_processes():
    res = explicit_reach(spec("star_mutex_bug").instance(2))
    assert res.status == "unsafe" and len(res.trace) == 3


def test_bounds_report_bound_exceeded():
    P = spec("ring_token").instance(5)
    assert explicit_reach(P, max_states=2).status == "bound-exceeded"
    assert explicit_reach(P, depth=1).status == "bound-exceeded"
    assert explicit_reach(P, depth=10).status == "safe"


def test_integer_programs_are_rejected():
    with pytest.raises(LogicError):
        explicit_reach(spec("ring_swap").instance(3))


def test_slot_budget():
    with pytest.raises(LogicError):
        explicit_reach(spec("ring_token").instance(5), limit=4)


def test_trivial_invariant_fails_safety_explicitly():
    sp = spec("star_mutex")
    T = enumerate_qf_types(sp.family, 2)
    inv = AshcroftInvariant(2, "star", {t.id: InvariantEntry(t.id, t.rep_terms, t.alpha, TRUE) for t in T})
    rep = check_invariant_explicit(inv, sp.instance(2))
    assert not rep.ok and rep.condition == "safe"
