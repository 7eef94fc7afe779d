"""Neighbourhoods, local isomorphisms, canonical labeling and k-types.

Canonical labeling is colour refinement over the incidence structure of the
function graphs and predicate relations, followed by exhaustive
individualization.  The minimal certificate over all leaves of the search
tree is the canonical key; comparing leaf certificates also yields the
automorphism group.  Neighbourhoods in the supported families are small, so
the search tree is never pruned.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .logic import (
    App,
    LogicError,
    NAnd,
    NConst,
    NEq,
    NNot,
    NPred,
    Structure,
    Var,
    eval_node_formula,
    eval_node_term,
    term_height,
)


# ---------------------------------------------------------------------------
# neighbourhoods


def closure(S: Structure, seeds) -> frozenset:
    """Node set of the substructure generated by ``seeds`` (constants included)."""
    seeds = frozenset(seeds)
    cache = S._cache.setdefault("closure", {})
    if seeds in cache:
        return cache[seeds]
    bad = seeds - set(S.universe)
    if bad:
        raise LogicError(f"seeds {sorted(bad)} not in the universe")
    out = set(seeds)
    for c in S.vocab.constants:
        out.add(S.apply(c))
    changed = True
    while changed:
        changed = False
        for name, arity in S.vocab.functions:
            if arity == 0:
                continue
            for args in itertools.product(sorted(out), repeat=arity):
                y = S.apply(name, args)
                if y not in out:
                    out.add(y)
                    changed = True
    result = frozenset(out)
    cache[seeds] = result
    return result


def generated_substructure(S: Structure, seeds) -> Structure:
    nodes = closure(S, seeds)
    cache = S._cache.setdefault("gensub", {})
    if nodes not in cache:
        cache[nodes] = S if len(nodes) == len(S.universe) else S.restrict(nodes)
    return cache[nodes]


# ---------------------------------------------------------------------------
# embeddings


@dataclass(frozen=True)
class Embedding:
    source: Structure
    target: Structure
    mapping: tuple  # sorted ((src, dst), ...)

    @classmethod
    def of(cls, source, target, mapping: dict):
        return cls(source, target, tuple(sorted(mapping.items())))

    def __call__(self, u):
        return dict(self.mapping)[u]

    def as_dict(self):
        return dict(self.mapping)

    def check(self) -> bool:
        """Exhaustively confirm that the map preserves and reflects everything."""
        m = self.as_dict()
        if set(m) != set(self.source.universe) or len(set(m.values())) != len(m):
            return False
        if not set(m.values()) <= set(self.target.universe):
            return False
        for name, arity in self.source.vocab.functions:
            for args in itertools.product(self.source.universe, repeat=arity):
                if m[self.source.apply(name, args)] != self.target.apply(name, [m[a] for a in args]):
                    return False
        for name, arity in self.source.vocab.predicates:
            for args in itertools.product(self.source.universe, repeat=arity):
                if self.source.holds(name, args) != self.target.holds(name, [m[a] for a in args]):
                    return False
        return True


def find_local_isomorphism(S, u, S2, v) -> Optional[Embedding]:
    """Isomorphism ``N(u) -> N(v)`` sending ``u`` to ``v`` component-wise, if any.

    Every node of ``N(u)`` is named by a term over ``u``, so the map is forced:
    propagate along terms and check the result.
    """
    u, v = tuple(u), tuple(v)
    if len(u) != len(v):
        raise LogicError("tuples of different length")
    if S.vocab != S2.vocab:
        return None
    m = {}
    for a, b in zip(u, v):
        if m.get(a, b) != b:
            return None
        m[a] = b
    for c in S.vocab.constants:
        a, b = S.apply(c), S2.apply(c)
        if m.get(a, b) != b:
            return None
        m[a] = b
    changed = True
    while changed:
        changed = False
        for name, arity in S.vocab.functions:
            if arity == 0:
                continue
            for args in itertools.product(sorted(m), repeat=arity):
                a = S.apply(name, args)
                b = S2.apply(name, [m[x] for x in args])
                if a in m:
                    if m[a] != b:
                        return None
                else:
                    m[a] = b
                    changed = True
    if len(set(m.values())) != len(m):
        return None
    src = generated_substructure(S, u)
    dst = generated_substructure(S2, v)
    if set(m) != set(src.universe) or set(m.values()) != set(dst.universe):
        return None
    emb = Embedding.of(src, dst, m)
    return emb if emb.check() else None


# ---------------------------------------------------------------------------
# canonical labeling


def _facts(S):
    facts = S._cache.get("facts")
    if facts is None:
        facts = []
        for name, arity in S.vocab.functions:
            for args, out in S.function_table(name).items():
                facts.append((name, args + (out,)))
        for name, _ in S.vocab.predicates:
            for t in S.relation(name):
                facts.append((name, t))
        S._cache["facts"] = facts
    return facts


def _rank(keys: dict) -> dict:
    order = {k: i for i, k in enumerate(sorted(set(keys.values())))}
    return {u: order[k] for u, k in keys.items()}


def _refine(S, colour):
    facts = _facts(S)
    ncol = len(set(colour.values()))
    while True:
        sig = {u: [] for u in S.universe}
        for name, nodes in facts:
            cols = tuple(colour[x] for x in nodes)
            for x in set(nodes):
                pos = tuple(i for i, y in enumerate(nodes) if y == x)
                sig[x].append((name, pos, cols))
        colour = _rank({u: (colour[u], tuple(sorted(sig[u]))) for u in S.universe})
        n = len(set(colour.values()))
        if n == ncol:
            return colour
        ncol = n


def _certificate(S, order, pinned):
    idx = {u: i for i, u in enumerate(order)}
    fns = tuple(
        (name, tuple(sorted((tuple(idx[a] for a in args), idx[out])
                            for args, out in S.function_table(name).items())))
        for name, _ in sorted(S.vocab.functions)
    )
    preds = tuple(
        (name, tuple(sorted(tuple(idx[a] for a in t) for t in S.relation(name))))
        for name, _ in sorted(S.vocab.predicates)
    )
    return (len(order), tuple(idx[p] for p in pinned), fns, preds)


def _leaves(S, colour):
    colour = _refine(S, colour)
    cells = {}
    for u, c in colour.items():
        cells.setdefault(c, []).append(u)
    target = min((c for c, us in cells.items() if len(us) > 1), default=None)
    if target is None:
        yield sorted(S.universe, key=colour.__getitem__)
        return
    for u in sorted(cells[target]):
        c2 = _rank({x: (colour[x], 0 if x == u else 1) for x in S.universe})
        yield from _leaves(S, c2)


def _labelings(S, pinned):
    """All ``(certificate, order)`` leaves for ``S`` with ``pinned`` coloured."""
    cache = S._cache.setdefault("leaves", {})
    if pinned not in cache:
        # marked nodes take the lowest colours, in tuple order
        init = _rank({u: (0,) + tuple(i for i, x in enumerate(pinned) if x == u) if u in pinned else (1,)
                      for u in S.universe})
        cache[pinned] = [(_certificate(S, o, pinned), o) for o in _leaves(S, init)]
    return cache[pinned]


def canonical_form(S: Structure, pinned=()):
    """``(key, order)``: canonical key of ``S`` with ``pinned`` marked, plus the
    node order realising it (position ``i`` of ``order`` is canonical node ``i``)."""
    pinned = tuple(pinned)
    cert, order = min(_labelings(S, pinned), key=lambda co: co[0])
    return repr(cert).encode(), tuple(order)


def structure_key(S: Structure, pinned=()) -> bytes:
    return canonical_form(S, pinned)[0]


def canonical_key(S: Structure, tup) -> bytes:
    """Key of the marked neighbourhood ``(N(tup), tup)``."""
    tup = tuple(tup)
    cache = S._cache.setdefault("ckey", {})
    if tup not in cache:
        cache[tup] = structure_key(generated_substructure(S, tup), tup)
    return cache[tup]


def isomorphism(S, S2, pinned=(), pinned2=()) -> Optional[dict]:
    """An isomorphism ``S -> S2`` sending ``pinned`` to ``pinned2``, if any."""
    k1, o1 = canonical_form(S, pinned)
    k2, o2 = canonical_form(S2, pinned2)
    if k1 != k2:
        return None
    return dict(zip(o1, o2))


def automorphisms(S: Structure, fixed=()) -> list:
    """All automorphisms of ``S`` fixing ``fixed`` point-wise, as dicts."""
    leaves = _labelings(S, tuple(fixed))
    cert0, o0 = min(leaves, key=lambda co: co[0])
    seen, out = set(), []
    for cert, o in leaves:
        if cert != cert0:
            continue
        m = dict(zip(o0, o))
        key = tuple(sorted(m.items()))
        if key not in seen:
            seen.add(key)
            out.append(m)
    out.sort(key=lambda m: tuple(m[u] for u in S.universe))
    return out


# ---------------------------------------------------------------------------
# representative terms and defining formulas


def term_key(t):
    """Order on terms: height, then variables before constants, then lexicographic."""
    if isinstance(t, Var):
        return (0, 0, t.index)
    return (term_height(t), 1, t.fn, tuple(term_key(a) for a in t.args))


def representative_terms(S: Structure, tup) -> tuple:
    """Representative terms for the neighbourhood of ``tup``.

    Each node gets its least term under :func:`term_key`; the list starts with
    the distinct nodes of ``tup`` (in order of first occurrence) and continues
    with the remaining nodes sorted by their terms.
    """
    tup = tuple(tup)
    best = {}
    for i, u in enumerate(tup):
        best.setdefault(u, Var(i))
    for c in S.vocab.constants:
        u = S.apply(c)
        t = App(c)
        if u not in best or term_key(t) < term_key(best[u]):
            best[u] = t
    changed = True
    while changed:
        changed = False
        known = sorted(best)
        for name, arity in S.vocab.functions:
            if arity == 0:
                continue
            for args in itertools.product(known, repeat=arity):
                u = S.apply(name, args)
                t = App(name, tuple(best[a] for a in args))
                if u not in best or term_key(t) < term_key(best[u]):
                    best[u] = t
                    changed = True
    if set(best) != closure(S, tup):
        raise LogicError("representative terms do not cover the neighbourhood")
    head = list(dict.fromkeys(tup))
    rest = sorted((u for u in best if u not in head), key=lambda u: term_key(best[u]))
    return tuple(best[u] for u in head + rest)


def defining_formula(S: Structure, tup, terms=None):
    """Defining formula of the k-type of ``tup`` from its representative terms."""
    tup = tuple(tup)
    if terms is None:
        terms = representative_terms(S, tup)
    nodes = [eval_node_term(S, t, tup) for t in terms]
    rep = dict(zip(nodes, terms))
    parts = []
    for i, u in enumerate(tup):
        if rep[u] != Var(i):
            parts.append(NEq(rep[u], Var(i)))
    for a, b in itertools.combinations(terms, 2):
        parts.append(NNot(NEq(a, b)))
    for name, arity in S.vocab.predicates:
        for args in itertools.product(nodes, repeat=arity):
            atom = NPred(name, tuple(rep[a] for a in args))
            parts.append(atom if S.holds(name, args) else NNot(atom))
    for name, arity in S.vocab.functions:
        for args in itertools.product(nodes, repeat=arity):
            lhs = App(name, tuple(rep[a] for a in args))
            rhs = rep[S.apply(name, args)]
            if lhs != rhs:
                parts.append(NEq(lhs, rhs))
    if not parts:
        return NConst(True)
    return NAnd(tuple(parts))


# ---------------------------------------------------------------------------
# k-types


@dataclass
class QfType:
    id: int
    width: int
    instance: object  # family index of the witness structure
    structure: Structure
    witness: tuple
    key: bytes
    rep_terms: tuple
    alpha: object
    neighbourhood: Structure = field(repr=False, default=None)

    @property
    def size(self):
        return len(self.rep_terms)

    def nodes(self, S, tup):
        """``U(tup)``: neighbourhood of ``tup`` listed in representative-term order."""
        return tuple(eval_node_term(S, t, tup) for t in self.rep_terms)

    def describe(self):
        names = [self.structure.names[u] for u in self.witness]
        return f"T{self.id} witness {self.instance}:({', '.join(names)})"


class TypeTable:
    """The k-types of a family, indexed by canonical key.

    ``types`` are sorted by key; ids are 1-based positions in that order.
    """

    def __init__(self, width, types):
        self.width = width
        self.types = list(types)
        self._by_key = {t.key: t for t in self.types}

    def __iter__(self):
        return iter(self.types)

    def __len__(self):
        return len(self.types)

    def __getitem__(self, r) -> QfType:
        return self.types[r - 1]

    @property
    def ids(self):
        return [t.id for t in self.types]

    def lookup(self, S, tup) -> Optional[QfType]:
        return self._by_key.get(canonical_key(S, tup))

    def type_of(self, S, tup) -> QfType:
        t = self.lookup(S, tup)
        if t is None:
            raise LogicError(
                f"tuple {tuple(S.names[u] for u in tup)} has no enumerated {self.width}-type;"
                " the family's enumeration bound is too small"
            )
        return t

    def keys(self):
        return set(self._by_key)


def types_from_instances(instances, k) -> TypeTable:
    """Enumerate all k-tuples of ``[(index, Structure), ...]`` and deduplicate."""
    if k < 1:
        raise LogicError("width must be >= 1")
    found = {}
    for index, S in instances:
        for tup in itertools.product(S.universe, repeat=k):
            key = canonical_key(S, tup)
            if key not in found:
                found[key] = (index, S, tup)
    types = []
    for i, key in enumerate(sorted(found), start=1):
        index, S, tup = found[key]
        terms = representative_terms(S, tup)
        types.append(QfType(
            id=i, width=k, instance=index, structure=S, witness=tup, key=key,
            rep_terms=terms, alpha=defining_formula(S, tup, terms),
            neighbourhood=generated_substructure(S, tup),
        ))
    return TypeTable(k, types)


def enumerate_qf_types(family, k, indices=None) -> TypeTable:
    """k-types realised in the family's declared enumeration bound for ``k``."""
    if indices is None:
        indices = family.bounds(k)
    if not indices:
        raise LogicError(f"family {family.name} declares no enumeration bound for k={k}")
    return types_from_instances([(i, family.instantiate(i)) for i in indices], k)


def classify_node_formula(phi, types: Iterable[QfType]) -> set:
    """Ids of the types whose witnesses satisfy ``phi``."""
    return {t.id for t in types if eval_node_formula(t.structure, phi, t.witness)}


def tuple_orbits(S: Structure, tuples, fixed=()):
    """Group ``tuples`` into orbits of the automorphism group of ``S``."""
    autos = automorphisms(S, fixed)
    seen, reps = set(), []
    for tup in tuples:
        tup = tuple(tup)
        if tup in seen:
            continue
        reps.append(tup)
        for m in autos:
            seen.add(tuple(m[u] for u in tup))
    return reps
