"""Hypothesis strategies for small random structures, formulas and programs."""

import itertools

from hypothesis import strategies as st

from topoinv.logic import (
    BOOL,
    FALSE,
    TRUE,
    App,
    Mu,
    NAnd,
    NEq,
    NNot,
    NOr,
    NPred,
    Op,
    Structure,
    Var,
    Vocabulary,
    conj,
)
from topoinv.program import ConcreteProgram
from topoinv.symmetry import closure

VOCAB = Vocabulary(functions=(("f", 1), ("c", 0)), predicates=(("P", 1), ("R", 2)))


@st.composite
def structures(draw, max_nodes=5, vocab=VOCAB):
    n = draw(st.integers(1, max_nodes))
    nodes = list(range(n))
    node = st.sampled_from(nodes)
    fns = {}
    for name, arity in vocab.functions:
        fns[name] = {args: draw(node) for args in itertools.product(nodes, repeat=arity)}
    preds = {}
    for name, arity in vocab.predicates:
        tuples = list(itertools.product(nodes, repeat=arity))
        preds[name] = {t for t in tuples if draw(st.booleans())}
    return Structure(vocab, nodes, fns, preds)


@st.composite
def relabelled(draw, S):
    """``(S2, f)`` with ``S2`` an isomorphic copy of ``S`` under the bijection ``f``."""
    perm = draw(st.permutations(list(S.universe)))
    offset = draw(st.integers(0, 50))
    f = {u: perm[i] + offset for i, u in enumerate(S.universe)}
    fns = {name: {tuple(f[a] for a in args): f[out] for args, out in S.function_table(name).items()}
           for name, _ in S.vocab.functions}
    preds = {name: {tuple(f[a] for a in t) for t in S.relation(name)} for name, _ in S.vocab.predicates}
    return Structure(S.vocab, [f[u] for u in S.universe], fns, preds), f


def terms(width):
    leaves = st.sampled_from([Var(i) for i in range(width)] + [App("c")])
    return st.recursive(leaves, lambda t: t.map(lambda a: App("f", (a,))), max_leaves=3)


def node_formulas(width):
    t = terms(width)
    atoms = st.one_of(
        st.builds(NEq, t, t),
        st.builds(lambda a: NPred("P", (a,)), t),
        st.builds(lambda a, b: NPred("R", (a, b)), t, t),
    )
    return st.recursive(atoms, lambda sub: st.one_of(
        sub.map(NNot),
        st.lists(sub, min_size=1, max_size=3).map(lambda xs: NAnd(tuple(xs))),
        st.lists(sub, min_size=1, max_size=3).map(lambda xs: NOr(tuple(xs))),
    ), max_leaves=6)


@st.composite
def programs(draw, S):
    """A boolean program on ``S``: one field per node, random local transitions."""
    fields = {u: (("x", BOOL),) for u in S.universe}
    procs = {u for u in S.universe if draw(st.booleans())}
    trans, init = {}, {}
    for u in S.universe:
        local = sorted(closure(S, (u,)))
        if u in procs:
            lits = []
            for v in local:
                a, b = Mu(v, "x", BOOL, True), Mu(v, "x", BOOL)
                choice = draw(st.sampled_from(["keep", "flip", "set", "clear"]))
                lits.append({"keep": Op("=", (a, b)), "flip": Op("not", (Op("=", (a, b)),)),
                             "set": a, "clear": Op("not", (a,))}[choice])
            trans[u] = conj(lits)
        else:
            trans[u] = FALSE
        init[u] = draw(st.sampled_from([TRUE, Mu(u, "x", BOOL), Op("not", (Mu(u, "x", BOOL),))]))
    return ConcreteProgram(S, fields, trans, init, {u: [] for u in S.universe}, [], procs)
