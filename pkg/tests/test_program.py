import pytest

from conftest import spec
from topoinv.families import star
from topoinv.logic import BOOL, FALSE, INT, LogicError, Mu, Op, TRUE, eval_data, mu_atoms, state_lookup
from topoinv.program import (
    SpecError,
    check_extensible,
    global_transition,
    parse_spec,
    subprogram,
    validate_symmetry,
)

STAR_HEAD = """
(family star)
(fields (res (lock bool)) (proc (cs bool)))
"""


def test_fields_follow_selectors():
    sp = spec("simple_pipeline")
    L = sp.family.instantiate(3)
    assert sp.fields_of(L, L.node("s0")) == (("data", INT), ("ready", BOOL))
    assert sp.fields_of(L, L.node("v1")) == ()


def test_kinds_resolve_by_local_type():
    sp = spec("simple_pipeline")
    L = sp.family.instantiate(5)
    assert sp.kind_of(L, L.node("v4")).name == "stage"
    assert sp.kind_of(L, L.node("s3")).name == "buffer"
    assert sp.kind_of(L, L.node("s5")).name == "sink"


def test_global_transition_frames_other_nodes():
    P = spec("star_lock").instance(2)
    t = global_transition(P, 1)
    primed = {(m.node, m.field) for m in mu_atoms(t) if m.primed}
    assert primed == {(0, "lock"), (1, "cs"), (2, "cs")}
    pre = {0: {"lock": False}, 1: {"cs": False}, 2: {"cs": True}}
    ok = {0: {"lock": True}, 1: {"cs": True}, 2: {"cs": True}}
    moved = {0: {"lock": True}, 1: {"cs": True}, 2: {"cs": False}}
    assert eval_data(t, state_lookup(pre, ok))
    assert not eval_data(t, state_lookup(pre, moved))


def test_global_transition_rejects_resources():
    with pytest.raises(LogicError):
        global_transition(spec("star_lock").instance(2), 0)


def test_subprogram_of_star3_is_star2():
    P3 = spec("star_lock").instance(3)
    P2 = spec("star_lock").instance(2)
    sub = subprogram(P3, {0, 1, 2})
    assert sub.structure.universe == P2.structure.universe
    assert sub.procs == P2.procs
    assert sub.init == P2.init


def test_subprogram_requires_closed_sets():
    with pytest.raises(LogicError):
        subprogram(spec("star_lock").instance(3), {1, 2})


def test_error_formula_grounds_per_tuple():
    P = spec("ring_token").instance(3)
    S = P.structure
    c0, c1 = S.node("c0"), S.node("c1")
    e = P.error((c0, c1))
    assert {m.node for m in mu_atoms(e)} == {S.node("s0"), S.node("s1")}
    assert P.error((c0, c0)) == FALSE


def test_validate_symmetry_on_benchmarks():
    for name in ("star_lock", "ring_token", "simple_pipeline"):
        sp = spec(name)
        assert validate_symmetry([sp.instance(i) for i in sp.family.bounds(1)]).ok


def test_validate_symmetry_catches_asymmetric_programs():
    P = spec("star_lock").instance(2)
    P.trans = dict(P.trans)
    P.trans[2] = FALSE
    assert not validate_symmetry([P]).ok


def test_extensibility_of_independent_init():
    rep = check_extensible(spec("ring_token"), [3, 4])
    assert rep.ok


def test_extensibility_fails_for_conflicting_init():
    text = STAR_HEAD + """
    (kind worker (2 1) (init (mu g lock)))
    (kind global (2 0) (init (not (mu nu lock))))
    """
    rep = check_extensible(parse_spec(text), [1, 2])
    assert not rep.ok and rep.violations


@pytest.mark.parametrize("text,needle", [
    ("(family nowhere)", "unknown family"),
    ("(family star) (bogus)", "unknown section"),
    (STAR_HEAD + "(kind (2 1) (trans (mu nu missing)))", "undeclared field"),
    (STAR_HEAD + "(kind (2 1) (trans (+ (mu nu cs) 1)))", ""),
    (STAR_HEAD + "(kind (2 1) (init (mu' nu cs)))", "mu'"),
    (STAR_HEAD + "(kind (2 0) (trans (mu' nu lock)))", "resource"),
    (STAR_HEAD + "(error 2 (mu nu3 cs))", "out of range"),
    ("(family star) (width 0)", "width"),
    ("(family star", ""),
])
def test_spec_errors(text, needle):
    with pytest.raises(SpecError) as e:
        parse_spec(text)
    assert needle in str(e.value)


def test_uncovered_process_type_is_reported():
    sp = parse_spec(STAR_HEAD + "(kind (2 0))")
    with pytest.raises(LogicError):
        sp.instance(2)


def test_selector_sugar():
    sp = parse_spec("(family ring-start) (fields ((pred start) (flag bool)) (all (x int)))")
    R = sp.family.instantiate(3)
    assert sp.fields_of(R, R.node("s0")) == (("flag", BOOL), ("x", INT))
    assert sp.fields_of(R, R.node("s1")) == (("x", INT),)
