"""Property suites: isomorphism invariance, clause accounting, symmetry
reduction and subprogram composition.  Each property runs 1000 cases."""

import itertools

from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from strategies import node_formulas, programs, relabelled, structures
from topoinv.chc import Options, canonical_clause, encode_family, encode_single, symmetry_reduce
from topoinv.logic import BOOL, Mu, NConst, NPred, Var, eval_node_formula
from topoinv.program import ErrorSpec, parse_spec, subprogram
from topoinv.symmetry import canonical_key, closure, enumerate_qf_types, types_from_instances

CASES = settings(max_examples=1000, deadline=None,
                 suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large])


@st.composite
def structure_with_copy(draw, width=2):
    S = draw(structures())
    S2, f = draw(relabelled(S))
    tup = tuple(draw(st.sampled_from(list(S.universe))) for _ in range(width))
    return S, S2, f, tup


@CASES
@given(structure_with_copy(), node_formulas(2))
def test_evaluation_is_isomorphism_invariant(case, phi):
    S, S2, f, tup = case
    assert eval_node_formula(S, phi, tup) == eval_node_formula(S2, phi, tuple(f[u] for u in tup))


@CASES
@given(structure_with_copy(), structure_with_copy())
def test_canonical_key_is_a_complete_invariant(case, other):
    S, S2, f, tup = case
    assert canonical_key(S, tup) == canonical_key(S2, tuple(f[u] for u in tup))
    # equal keys only for isomorphic marked neighbourhoods: compare by
    # evaluating the defining formula of one tuple on the other
    T = types_from_instances([(0, S)], 2)
    R, _, _, tup_r = other
    same = canonical_key(S, tup) == canonical_key(R, tup_r)
    alpha = T.type_of(S, tup).alpha
    assert same == (eval_node_formula(R, alpha, tup_r) and len(closure(R, tup_r)) == len(closure(S, tup)))


# --- clause accounting -----------------------------------------------------


def with_error(P, draw):
    """Attach a unary error on ``x`` to a random program."""
    guard = draw(st.sampled_from([NConst(True), NPred("P", (Var(0),))]))
    P.errors = [ErrorSpec(1, guard, Mu(Var(0), "x", BOOL))]
    return P


@st.composite
def single_programs(draw):
    S = draw(structures(max_nodes=4))
    P = with_error(draw(programs(S)), draw)
    k = draw(st.integers(1, 2))
    return P, k, types_from_instances([(0, S)], k)


@CASES
@given(single_programs())
def test_single_program_clause_accounting(case):
    P, k, T = case
    raw = encode_single(P, k, T, Options(simplify=False))
    n = len(P.nodes)
    assert len(raw.clauses) == n ** k + len(P.procs) * n ** k + n
    assert set(raw.predicates) == {T.type_of(P.structure, t).id for t in itertools.product(P.nodes, repeat=k)}
    simp = encode_single(P, k, T)
    assert len(simp.clauses) <= len(raw.clauses)
    assert set(simp.predicates) == set(raw.predicates)


TRANS = ["(mu' g lock)", "(not (mu' g lock))", "(= (mu' g lock) (mu g lock))",
         "(mu' nu cs)", "(not (mu' nu cs))", "(= (mu' nu cs) (mu nu cs))",
         "(mu g lock)", "(not (mu g lock))", "(mu nu cs)", "(not (mu nu cs))"]
INIT = ["true", "(mu nu cs)", "(not (mu nu cs))"]
ERRORS = ["(error (guard (isProc nu1)) (mu nu1 cs))",
          "(error 2 (guard (and (distinct nu1 nu2) (isProc nu1) (isProc nu2))) (and (mu nu1 cs) (mu nu2 cs)))",
          "(error (guard (isProc nu1)) (and (mu nu1 cs) (not (mu g lock))))"]


@st.composite
def star_specs(draw):
    k = draw(st.integers(1, 2))
    trans = draw(st.lists(st.sampled_from(TRANS), min_size=1, max_size=4))
    init = draw(st.sampled_from(INIT))
    lock = draw(st.sampled_from(["true", "(mu nu lock)", "(not (mu nu lock))"]))
    errors = draw(st.lists(st.sampled_from(ERRORS[:1] + ERRORS[2:] if k == 1 else ERRORS), min_size=1, max_size=2))
    text = f"""
    (family star)
    (fields (res (lock bool)) (proc (cs bool)))
    (kind (2 1) (trans (and {' '.join(trans)})) (init {init}))
    (kind (2 0) (init {lock}))
    {' '.join(errors)}
    """
    opts = Options(opn=draw(st.booleans()), dpg=draw(st.booleans()), sym=draw(st.booleans()), simplify=False)
    return parse_spec(text), k, opts


_TYPES = {}


def types(fam, k):
    if (fam.name, k) not in _TYPES:
        _TYPES[fam.name, k] = enumerate_qf_types(fam, k)
    return _TYPES[fam.name, k]


@CASES
@given(star_specs())
def test_family_clause_accounting(case):
    sp, k, opts = case
    T, T1 = types(sp.family, k), types(sp.family, k + 1)
    sys_ = encode_family(sp, k, opts, T, T1)
    selected = {r for r, on in sys_.chi.items() if on}
    assert set(sys_.predicates) == selected
    if not (opts.opn or opts.dpg):
        assert len(sys_.predicates) == len(T)
    inits = [c for c in sys_.clauses if c.origin.startswith("init")]
    steps = [c for c in sys_.clauses if c.origin.startswith("step")]
    assert len(inits) == len(selected)
    expected_steps = sum(1 for t in T1 if t.structure.holds("isProc", (t.witness[0],))
                         and sys_.chi[T.type_of(t.structure, t.witness[1:]).id])
    assert len(steps) == expected_steps
    if not opts.dpg:
        errs = [c for c in sys_.clauses if c.head is None]
        assert len(errs) == sum(len(types(sp.family, m)) for m in sp.error_arities)


# --- symmetry reduction ------------------------------------------------------


@st.composite
def star_systems(draw):
    sp, k, opts = draw(star_specs())
    opts = Options(opn=opts.opn, dpg=opts.dpg, simplify=draw(st.booleans()))
    return encode_family(sp, k, opts, types(sp.family, k), types(sp.family, k + 1))


def keys(system):
    return sorted(map(repr, map(canonical_clause, system.clauses)))


@CASES
@given(st.one_of(star_systems(), single_programs().map(lambda c: encode_single(*c))))
def test_symmetry_reduce_is_idempotent(system):
    once = symmetry_reduce(system)
    twice = symmetry_reduce(once)
    assert keys(once) == keys(twice)
    assert len(once.clauses) <= len(system.clauses)
    assert once.predicates == system.predicates


# --- subprogram composition -------------------------------------------------------


@st.composite
def nested_closed_sets(draw):
    S = draw(structures(max_nodes=6))
    P = draw(programs(S))
    nodes = list(S.universe)
    inner = closure(S, draw(st.lists(st.sampled_from(nodes), min_size=1, max_size=2)))
    outer = closure(S, set(inner) | set(draw(st.lists(st.sampled_from(nodes), max_size=2))))
    return P, outer, inner


@CASES
@given(nested_closed_sets())
def test_subprogram_composition(case):
    P, outer, inner = case
    via = subprogram(subprogram(P, outer), inner)
    direct = subprogram(P, inner)
    assert via.structure.universe == direct.structure.universe
    assert via == direct
    assert subprogram(P, P.structure.universe) == P
