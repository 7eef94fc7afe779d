"""Generalized Ashcroft invariants: assembly from a CHC model, export, and
validation by Hoare triples on basis substructures.

An invariant assigns to every k-type ``T_r`` a data formula ``phi_r`` whose
``mu`` atoms are indexed by the type's representative terms.  At a tuple of a
concrete program the type is recognised by evaluating the defining formulas
``alpha_r`` (not by canonical keys), so the checker shares no classification
code with the encoder.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

from . import sexpr
from .backend import SolverConfig, Validity, check_valid_batch, param
from .chc import ChcSystem, closure_members, dpg_members, type_permutations
from .logic import (
    FALSE,
    TRUE,
    LogicError,
    Mu,
    conj,
    eval_data,
    eval_node_formula,
    ground,
    implies,
    mu_atoms,
    neg,
    prime,
    simplify,
    subst_mu,
    state_lookup,
    substitute,
    to_sexpr,
)
from .program import ConcreteProgram, ProgramSpec, _Ctx, global_transition, subprogram
from .symmetry import (
    canonical_key,
    closure,
    enumerate_qf_types,
    generated_substructure,
    structure_key,
    tuple_orbits,
)


@dataclass
class InvariantEntry:
    type_id: int
    rep_terms: tuple
    alpha: object  # node formula over nu1..nuk
    phi: object  # data formula over (mu <rep term> <field>)
    origin: str = "model"  # model | opn:<r> | dpg | sym


@dataclass
class AshcroftInvariant:
    k: int
    family: str
    entries: dict  # type id -> InvariantEntry
    options: str = ""
    _cache: dict = field(default_factory=dict, repr=False)

    def entry_for(self, S, tup) -> InvariantEntry:
        key = (id(S), tuple(tup))
        hit = self._cache.get(key)
        if hit is None:
            hits = [e for e in self.entries.values() if eval_node_formula(S, e.alpha, tup)]
            if len(hits) != 1:
                names = tuple(S.names[u] for u in tup)
                raise LogicError(f"tuple {names} matches {len(hits)} type formulas (expected exactly one)")
            hit = self._cache[key] = (S, hits[0])
        return hit[1]

    def at(self, S, tup):
        """``phi_r[U(tup)]`` as a grounded formula (concrete node ids)."""
        return ground(self.entry_for(S, tup).phi, S, tuple(tup))

    def conjuncts(self, S, nodes=None) -> list:
        """Distinct non-trivial ``phi[v]`` for ``v`` ranging over ``nodes^k``."""
        nodes = sorted(S.universe if nodes is None else nodes)
        out = {}
        for v in itertools.product(nodes, repeat=self.k):
            f = self.at(S, v)
            if f != TRUE:
                out.setdefault(f, None)
        return list(out)

    def holds(self, S, state) -> bool:
        look = state_lookup(state)
        return all(eval_data(f, look) for f in self.conjuncts(S))

    def render(self) -> str:
        lines = [f"Ashcroft invariant, family {self.family}, width {self.k}"
                 + (f", options {self.options}" if self.options else "")]
        for r in sorted(self.entries):
            e = self.entries[r]
            terms = ", ".join(map(str, e.rep_terms))
            lines.append(f"  T{r} [{e.origin}] U = ({terms})")
            lines.append(f"    alpha: {e.alpha}")
            lines.append(f"    phi:   {to_sexpr(e.phi)}")
        return "\n".join(lines) + "\n"


def _fields_by_position(spec: ProgramSpec, T):
    S = T.structure
    return [spec.fields_of(S, u) for u in T.nodes(S, T.witness)]


def _template(phi, T, fields, perm=None):
    """Replace model parameters by ``mu`` atoms over the rep terms of ``T``.

    ``perm[j]`` is the position in ``T`` playing position ``j`` of the type the
    model formula was solved for (identity when ``None``).
    """
    repl, i = {}, 0
    for j in range(len(fields)):
        pos = j if perm is None else perm[j]
        for f, s in fields[pos]:
            repl[param(i, s)] = Mu(T.rep_terms[pos], f, s)
            i += 1
    return substitute(phi, repl)


def assemble_invariant(system: ChcSystem, model: dict, spec: ProgramSpec) -> AshcroftInvariant:
    """Build ``Phi`` from a CHC model.

    Selected types take the model formula (symmetrised over the type's
    neighbourhood automorphisms when the system was symmetry-reduced),
    OPN-dropped types inherit from their representative through the
    neighbourhood isomorphism, and the remaining types get ``true``.
    """
    types = system.types
    entries = {}
    for T in types:
        r = T.id
        if r in system.predicates:
            fields = _fields_by_position(spec, T)
            phi = _template(model[r], T, fields)
            origin = "model"
            if system.options.sym:
                perms = type_permutations(T)
                # perm maps position j to the position whose values it takes
                phi = conj(list(dict.fromkeys(_template(model[r], T, fields, p) for p in perms)))
                origin = "model+sym"
        elif r in system.opn_map:
            rep, perm = system.opn_map[r]
            R = types[rep]
            phi = _template(model[rep], T, _fields_by_position(spec, T), perm)
            if system.options.sym:
                perms = type_permutations(R)
                phi = conj(list(dict.fromkeys(
                    _template(model[rep], T, _fields_by_position(spec, T), tuple(perm[j] for j in p))
                    for p in perms)))
            origin = f"opn:{rep}"
        else:
            phi, origin = TRUE, "dpg"
        entries[r] = InvariantEntry(r, T.rep_terms, T.alpha, phi, origin)
    return AshcroftInvariant(system.k, system.meta.get("family", ""), entries, system.options.label)


# ---------------------------------------------------------------------------
# export / import


def export_invariant(inv: AshcroftInvariant) -> str:
    lines = [f"(invariant (family {inv.family}) (width {inv.k})"
             + (f' (options "{inv.options}")' if inv.options else "")]
    for r in sorted(inv.entries):
        e = inv.entries[r]
        terms = " ".join(map(str, e.rep_terms))
        lines.append(f"  (type {r} (origin {e.origin})")
        lines.append(f"    (terms {terms})")
        lines.append(f"    (alpha {e.alpha})")
        lines.append(f"    (phi {to_sexpr(e.phi)}))")
    lines[-1] += ")"
    return "\n".join(lines) + "\n"


def import_invariant(text: str, spec: ProgramSpec) -> AshcroftInvariant:
    forms = sexpr.parse(text)
    if len(forms) != 1 or not isinstance(forms[0], list) or forms[0][:1] != ["invariant"]:
        raise sexpr.SExprError("expected a single (invariant ...) form")
    head = {str(x[0]): x[1:] for x in forms[0][1:] if isinstance(x, list) and x and x[0] != "type"}
    k = int(head["width"][0])
    fam = str(head["family"][0])
    if fam != spec.family.name:
        raise LogicError(f"invariant is for family {fam}, spec is for {spec.family.name}")
    sorts = {f: s for d in spec.fields for f, s in d.fields}
    ctx = _Ctx(spec.family, sorts, k)
    entries = {}
    for x in forms[0][1:]:
        if not (isinstance(x, list) and x and x[0] == "type"):
            continue
        r = int(x[1])
        parts = {str(p[0]): p[1:] for p in x[2:]}
        terms = tuple(ctx.term(t) for t in parts["terms"])
        alpha = ctx.node_formula(parts["alpha"][0])
        phi = ctx.data(parts["phi"][0])
        origin = str(parts["origin"][0]) if "origin" in parts else "model"
        entries[r] = InvariantEntry(r, terms, alpha, phi, origin)
    opts = head.get("options", [""])[0]
    return AshcroftInvariant(k, fam, entries, str(opts))


# ---------------------------------------------------------------------------
# Hoare triples


@dataclass
class HoareTriple:
    kind: str  # init | cont | safe
    post_tuple: tuple
    pre: object  # grounded data formula
    post: object  # grounded data formula
    actor: Optional[int] = None  # acting node for cont triples

    def describe(self, S) -> str:
        names = ", ".join(S.names[u] for u in self.post_tuple)
        if self.kind == "cont":
            return f"cont [{S.names[self.actor]}] ({names})"
        return f"{self.kind} ({names})"


def hoare_triples(P: ConcreteProgram, inv: AshcroftInvariant, posts=None, actors=None, errors=None) -> list:
    """The init, continuation and safety triples of ``inv`` on ``P``.

    By default every k-tuple is a post tuple, every node an actor (non-process
    actors give triples that hold trivially) and every tuple of every error
    arity an error tuple.
    """
    S = P.structure
    nodes = sorted(S.universe)
    posts = list(itertools.product(nodes, repeat=inv.k)) if posts is None else posts
    actors = nodes if actors is None else actors
    if errors is None:
        errors = [w for m in (P.error_arities() or [1]) for w in itertools.product(nodes, repeat=m)]
    pre = conj(inv.conjuncts(S))
    init = conj([P.init[u] for u in nodes])
    out = []
    for w in posts:
        out.append(HoareTriple("init", tuple(w), init, inv.at(S, w)))
    for v0 in actors:
        for w in posts:
            out.append(HoareTriple("cont", tuple(w), pre, inv.at(S, w), v0))
    for w in errors:
        out.append(HoareTriple("safe", tuple(w), pre, neg(P.error(w))))
    return out


def triple_formula(t: HoareTriple, P: ConcreteProgram):
    """Pure validity formula for ``t`` (``Mu`` atoms renamed to variables)."""
    if t.kind == "cont":
        if not P.is_process(t.actor):
            return TRUE
        phi = implies(conj([t.pre, global_transition(P, t.actor)]), prime(t.post))
    else:
        phi = implies(t.pre, t.post)
    return subst_mu(phi)[0]


def _trivial(t: HoareTriple, P: ConcreteProgram) -> bool:
    if t.post == TRUE:
        return True
    if t.kind == "cont":
        if not P.is_process(t.actor):
            return True
        S = P.structure
        # frame: post unchanged by the actor and already a conjunct of pre
        touched = closure(S, (t.actor,))
        if not any(m.node in touched for m in mu_atoms(t.post)):
            return True
    if t.kind == "safe" and t.post == neg(FALSE):
        return True
    return False


def check_triple(t: HoareTriple, P: ConcreteProgram, cfg: Optional[SolverConfig] = None) -> Validity:
    if _trivial(t, P):
        return Validity("valid", note="trivial")
    return check_valid_batch([triple_formula(t, P)], cfg)[0]


# ---------------------------------------------------------------------------
# family-level check


@dataclass
class Failure:
    member: str
    triple: str
    status: str
    countermodel: Optional[dict] = None


@dataclass
class CheckReport:
    verdict: str  # invariant | not-invariant | undetermined
    checked: int = 0
    trivial: int = 0
    failures: list = field(default_factory=list)
    mode: str = "closure"

    def summary(self) -> str:
        s = f"{self.verdict}: {self.checked} triples checked, {self.trivial} trivial (mode {self.mode})"
        for f in self.failures[:10]:
            s += f"\n  {f.status}: {f.triple} on {f.member}"
        return s


def _basis_jobs(inv, spec: ProgramSpec, mode, indices):
    """``(program, posts, actors, errors, label)`` per basis member.

    ``closure``: one member per (k+1)-type witness ``t`` (generated by ``t``;
    post ``t[1:]``, actor ``t[0]``), per k-type witness (init) and per m-type
    witness (safety).  ``dpg``: the same over tuples of distinct processes.
    ``instances``: whole instances with automorphism-orbit dedupe.
    """
    fam = spec.family
    k = inv.k
    arities = spec.error_arities
    if mode == "instances":
        for i in indices or fam.bounds(k + 1):
            P = spec.instance(i)
            S = P.structure
            nodes = sorted(S.universe)
            pairs = tuple_orbits(S, itertools.product(nodes, repeat=k + 1))
            posts = tuple_orbits(S, itertools.product(nodes, repeat=k))
            errs = [w for m in arities for w in tuple_orbits(S, itertools.product(nodes, repeat=m))]
            yield P, posts, None, errs, f"{fam.name}({i})", pairs
        return
    progs = {}

    def prog(i, S):
        if i not in progs:
            progs[i] = spec.attach(S)
        return progs[i]

    if mode == "closure":
        for T in enumerate_qf_types(fam, k + 1, indices):
            S, t = T.structure, T.witness
            P = prog(T.instance, S)
            if not P.is_process(t[0]):
                continue
            sub = subprogram(P, closure(S, t))
            yield sub, [t[1:]], [t[0]], [], f"{fam.name}({T.instance}) cont T{T.id}", None
        for m in sorted(set(arities) | {k}):
            for T in enumerate_qf_types(fam, m, indices):
                S, w = T.structure, T.witness
                sub = subprogram(prog(T.instance, S), closure(S, w))
                posts = [w] if m == k else []
                errs = [w] if m in arities else []
                yield sub, posts, [], errs, f"{fam.name}({T.instance}) T{T.id}/{m}", None
        return
    if mode == "dpg":
        idx = indices or fam.bounds(k + 1)
        seen = set()
        for i, S, nodes in dpg_members(fam, k + 1, idx) + dpg_members(fam, k, idx):
            P = prog(i, S)
            sub = subprogram(P, nodes)
            SS = sub.structure
            procs = [u for u in sorted(nodes) if P.is_process(u)]
            for t in itertools.permutations(procs, k + 1):
                key = ("c", canonical_key(SS, t))
                if key not in seen and closure(S, t) == nodes:
                    seen.add(key)
                    yield sub, [t[1:]], [t[0]], [], f"{fam.name}({i}) cont", None
            for w in itertools.permutations(procs, k):
                key = ("i", canonical_key(SS, w))
                if key not in seen and closure(S, w) == nodes:
                    seen.add(key)
                    yield sub, [w], [], [], f"{fam.name}({i}) init", None
            for m in arities:
                for w in itertools.product(sorted(nodes), repeat=m):
                    key = ("e", structure_key(generated_substructure(S, nodes), w))
                    if key not in seen:
                        seen.add(key)
                        yield sub, [], [], [w], f"{fam.name}({i}) safe", None
        return
    raise ValueError(f"unknown check mode {mode!r}")


def check_family(inv: AshcroftInvariant, spec: ProgramSpec, mode="closure", indices=None,
                 cfg: Optional[SolverConfig] = None) -> CheckReport:
    """Validate ``inv`` by its Hoare triples on the basis substructures."""
    queries, meta = [], []
    trivial = 0
    for P, posts, actors, errs, label, pairs in _basis_jobs(inv, spec, mode, indices):
        triples = []
        if pairs is not None:
            triples = [t for t in hoare_triples(P, inv, posts, [], errs)]
            pre = conj(inv.conjuncts(P.structure))
            for p in pairs:
                triples.append(HoareTriple("cont", tuple(p[1:]), pre, inv.at(P.structure, p[1:]), p[0]))
        else:
            # closure/dpg jobs: init only where no actor is given
            triples = hoare_triples(P, inv, posts, actors, errs)
            if actors:
                triples = [t for t in triples if t.kind == "cont"]
        for t in triples:
            if _trivial(t, P):
                trivial += 1
                continue
            queries.append(simplify(triple_formula(t, P)))
            meta.append((label, t.describe(P.structure)))
    results = check_valid_batch(queries, cfg) if queries else []
    rep = CheckReport("invariant", checked=len(queries), trivial=trivial, mode=mode)
    for (label, desc), v in zip(meta, results):
        if v.status != "valid":
            rep.failures.append(Failure(label, desc, v.status, v.countermodel))
    if any(f.status == "invalid" for f in rep.failures):
        rep.verdict = "not-invariant"
    elif rep.failures:
        rep.verdict = "undetermined"
    return rep
