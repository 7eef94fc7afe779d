"""CHC encodings of the invariant-existence problem.

``encode_single`` emits the three clause families (Init, Cont, Safe) for one
concrete program over its whole topology.  ``encode_family`` emits the
downward-closure encoding: init clauses per k-type witness, step clauses per
(k+1)-type witness, error clauses per m-type witness, optionally restricted by
an indicator vector (OPN, DPG) and followed by symmetry reduction.

Clause variables are named ``x_<i>_<field>`` / ``xp_<i>_<field>`` where ``i``
is the position of the node in the representative-term order of the tuple
that generates the clause (for single programs, the node id itself).
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field, replace
from typing import Optional

from .logic import (
    FALSE,
    TRUE,
    DVar,
    Lit,
    LogicError,
    Mu,
    Op,
    conj,
    leaves,
    neg,
    simplify,
    subst_mu,
    substitute,
    to_sexpr,
    transform,
    var_name,
)
from .program import (
    ConcreteProgram,
    ProgramSpec,
    check_modeling_rules,
    global_transition,
)
from .logic import eval_node_term
from .symmetry import (
    QfType,
    TypeTable,
    automorphisms,
    closure,
    enumerate_qf_types,
    generated_substructure,
    isomorphism,
    representative_terms,
    structure_key,
)


class EncodingError(ValueError):
    pass


@dataclass(frozen=True)
class Atom:
    pred: int
    args: tuple  # DVar per (node, field) in representative-term order

    def __str__(self):
        return f"(Inv_{self.pred} {' '.join(a.name for a in self.args)})"


@dataclass(frozen=True)
class Clause:
    body: tuple
    constraint: object
    head: Optional[Atom]
    origin: str = field(default="", compare=False)

    def variables(self):
        out = {}
        for a in self.body + ((self.head,) if self.head else ()):
            for v in a.args:
                out.setdefault(v.name, v)
        for x in leaves(self.constraint):
            if isinstance(x, DVar):
                out.setdefault(x.name, x)
        return [out[n] for n in sorted(out, key=natural_key)]

    def __str__(self):
        parts = [str(a) for a in self.body]
        if self.constraint != TRUE:
            parts.append(to_sexpr(self.constraint))
        lhs = " /\\ ".join(parts) if parts else "true"
        return f"{lhs} => {self.head if self.head else 'false'}"


@dataclass
class Options:
    opn: bool = False
    dpg: bool = False
    sym: bool = False
    simplify: bool = True

    @property
    def label(self):
        flags = [n for n in ("opn", "dpg", "sym") if getattr(self, n)]
        return "+".join(flags) if flags else "baseline"


@dataclass
class ChcSystem:
    predicates: dict  # type id -> tuple of sorts
    clauses: list
    types: Optional[TypeTable] = None
    chi: dict = field(default_factory=dict)
    options: Options = field(default_factory=Options)
    opn_map: dict = field(default_factory=dict)  # dropped id -> (rep id, node permutation)
    k: int = 1
    meta: dict = field(default_factory=dict)
    layout: dict = field(default_factory=dict)  # type id -> fields per representative node

    @property
    def stats(self):
        return f"{len(self.predicates)}/{len(self.clauses)}"

    def dump(self) -> str:
        """Human-readable clause listing with the type table as a header."""
        lines = [f"; k={self.k} options={self.options.label} size={self.stats}"]
        if self.types is not None:
            for t in self.types:
                mark = "*" if self.chi.get(t.id, True) else " "
                terms = " ".join(str(x) for x in t.rep_terms)
                lines.append(f"; {mark} T{t.id} n={t.size} terms=({terms}) {t.describe()}")
        lines.extend(str(c) for c in self.clauses)
        return "\n".join(lines) + "\n"


def natural_key(name):
    return tuple(int(p) if p.isdigit() else p for p in re.split(r"(\d+)", name))


# ---------------------------------------------------------------------------
# clause construction helpers


def _node_vars(P, u, label, primed):
    return [DVar(var_name(label, f, primed), s) for f, s in P.fields[u]]


def _atom(P, T: QfType, S, tup, naming, primed_nodes=frozenset()):
    args = []
    for u in T.nodes(S, tup):
        args.extend(_node_vars(P, u, naming[u], u in primed_nodes))
    return Atom(T.id, tuple(args))


def _naming(S, tup):
    order = [eval_node_term(S, t, tup) for t in representative_terms(S, tup)]
    return {u: i for i, u in enumerate(order)}


def _eliminate_frame(constraint, head):
    """Drop top-level ``xp = x`` conjuncts and use ``x`` in the head instead.

    Only primed variables that occur nowhere else in the constraint are
    eliminated, so the result is equisatisfiable with the input clause.
    """
    conjuncts = constraint.args if isinstance(constraint, Op) and constraint.op == "and" else (constraint,)
    cands, keep = {}, []
    for c in conjuncts:
        if (isinstance(c, Op) and c.op == "=" and len(c.args) == 2
                and all(isinstance(a, DVar) for a in c.args)):
            a, b = c.args
            if a.name.startswith("xp_") and b.name == "x_" + a.name[3:] and a not in cands:
                cands[a] = (b, c)
                continue
        keep.append(c)
    used = {x for c in keep for x in leaves(c) if isinstance(x, DVar)}
    ren = {}
    for a, (b, c) in cands.items():
        if a in used:
            keep.append(c)
        else:
            ren[a] = b
    if head is not None:
        head = Atom(head.pred, tuple(ren.get(a, a) for a in head.args))
    return conj(keep), head


def _finish(clauses, body, constraint, head, opts, origin):
    constraint = simplify(constraint) if opts.simplify else constraint
    if opts.simplify:
        if constraint == FALSE:
            return  # vacuous: no transition, or an error that cannot hold
        if head is not None:
            constraint, head = _eliminate_frame(constraint, head)
        body = tuple(dict.fromkeys(body))
        if head is not None and head in body:
            return
    clauses.append(Clause(tuple(body), constraint, head, origin))


def dedup_clauses(clauses):
    seen, out = set(), []
    for c in clauses:
        key = canonical_clause(c)
        if key not in seen:
            seen.add(key)
            out.append(c)
    return out


def canonical_clause(c: Clause):
    """Rename variables by first occurrence (head, sorted body, constraint)."""
    cur = c
    for _ in range(3):
        order = {}
        for a in ([cur.head] if cur.head else []) + sorted(cur.body, key=lambda a: (a.pred, str(a))):
            for v in a.args:
                order.setdefault(v.name, len(order))
        for x in leaves(cur.constraint):
            if isinstance(x, DVar):
                order.setdefault(x.name, len(order))
        ren = {n: f"v{i}" for n, i in order.items()}
        cur = _rename(cur, ren)
    body = tuple(sorted(cur.body, key=lambda a: (a.pred, str(a))))
    return (body, cur.constraint, cur.head)


def _rename(c, ren):
    def rv(v):
        return DVar(ren.get(v.name, v.name), v.sort)

    body = tuple(Atom(a.pred, tuple(rv(v) for v in a.args)) for a in c.body)
    head = Atom(c.head.pred, tuple(rv(v) for v in c.head.args)) if c.head else None
    con = transform(c.constraint, lambda x: rv(x) if isinstance(x, DVar) else x)
    return Clause(body, con, head, c.origin)


# ---------------------------------------------------------------------------
# single program: init, step and error clauses over the whole topology


def encode_single(P: ConcreteProgram, k: int, types: TypeTable, options=None) -> ChcSystem:
    opts = options or Options()
    S = P.structure
    naming = {u: u for u in S.universe}
    tuples = list(itertools.product(S.universe, repeat=k))
    typed = {t: types.type_of(S, t) for t in tuples}
    chi = {t.id: True for t in types}
    preds, layout = {}, {}
    for t in tuples:
        T = typed[t]
        preds.setdefault(T.id, tuple(v.sort for v in _atom(P, T, S, t, naming).args))
        layout.setdefault(T.id, tuple(len(P.fields[u]) for u in T.nodes(S, t)))
    body = tuple(_atom(P, typed[t], S, t, naming) for t in tuples)
    init = conj([subst_mu(P.init[u])[0] for u in S.universe])
    clauses = []
    for w in tuples:
        _finish(clauses, (), init, _atom(P, typed[w], S, w, naming), opts, f"init {w}")
    for v0 in S.universe:
        if not P.is_process(v0):
            continue
        step = subst_mu(global_transition(P, v0))[0]
        for w in tuples:
            head = _atom(P, typed[w], S, w, naming, frozenset(S.universe))
            _finish(clauses, body, step, head, opts, f"step {v0} {w}")
    for m in P.error_arities() or [1]:
        for w in itertools.product(S.universe, repeat=m):
            err = subst_mu(P.error(w))[0]
            _finish(clauses, body, err, None, opts, f"error {w}")
    if opts.simplify:
        clauses = dedup_clauses(clauses)
    chi = {r: r in preds for r in chi}
    system = ChcSystem(preds, clauses, types, chi, opts, k=k, layout=layout)
    return symmetry_reduce(system) if opts.sym else system


# ---------------------------------------------------------------------------
# indicator vectors


def opt_opn(types: TypeTable):
    """One selected type per isomorphism class of (unmarked) neighbourhoods.

    Returns ``(chi, opn_map)`` where ``opn_map[s] = (r, perm)`` for each
    dropped type ``s``: ``perm[j]`` is the position in ``U_s`` of the node that
    plays the role of position ``j`` of ``U_r``.
    """
    chi, opn_map, reps = {}, {}, {}
    for T in types:
        key = structure_key(T.neighbourhood)
        if key not in reps:
            reps[key] = T
            chi[T.id] = True
            continue
        R = reps[key]
        chi[T.id] = False
        iso = isomorphism(R.neighbourhood, T.neighbourhood)
        u_r = R.nodes(R.structure, R.witness)
        u_s = T.nodes(T.structure, T.witness)
        pos_s = {u: i for i, u in enumerate(u_s)}
        opn_map[T.id] = (R.id, tuple(pos_s[iso[u]] for u in u_r))
    return chi, opn_map


def opt_dpg(types: TypeTable, fam, chi=None):
    """Deselect types whose witness has a resource node or a repeated node."""
    chi = dict(chi) if chi else {T.id: True for T in types}
    for T in types:
        S, w = T.structure, T.witness
        if len(set(w)) != len(w) or not all(fam.is_proc(S, u) for u in w):
            chi[T.id] = False
    return chi


def dpg_members(fam, k, indices=None):
    """Substructures generated by k distinct process nodes, up to isomorphism.

    Returns ``[(index, S, nodes)]`` with ``nodes`` the generated node set.
    """
    out, seen = [], set()
    for i in (fam.bounds(k) if indices is None else indices):
        S = fam.instantiate(i)
        procs = [u for u in S.universe if fam.is_proc(S, u)]
        for tup in itertools.permutations(procs, k):
            nodes = closure(S, tup)
            key = structure_key(generated_substructure(S, nodes))
            if key not in seen:
                seen.add(key)
                out.append((i, S, nodes))
    return out


def closure_members(fam, k, types_k1=None):
    """Substructures generated by (k+1)-type witnesses, up to isomorphism."""
    types_k1 = types_k1 or enumerate_qf_types(fam, k + 1)
    out, seen = [], set()
    for T in types_k1:
        nodes = closure(T.structure, T.witness)
        key = structure_key(generated_substructure(T.structure, nodes))
        if key not in seen:
            seen.add(key)
            out.append((T.instance, T.structure, nodes))
    return out


def maximal_members(members, width):
    """Members that embed into no other member (up to isomorphism).

    ``A`` embeds into ``B`` iff some ``width``-tuple of ``B`` generates a copy
    of ``A``; the image of a generated structure is generated by the image of
    its generators.
    """
    subs = [generated_substructure(S, nodes) for _, S, nodes in members]
    keys = [structure_key(s) for s in subs]
    inside = []
    for B in subs:
        inside.append({structure_key(generated_substructure(B, closure(B, u)))
                       for u in itertools.product(B.universe, repeat=width)})
    return [m for i, m in enumerate(members)
            if not any(keys[j] != keys[i] and keys[i] in inside[j] for j in range(len(subs)))]


def validate_chi(chi, types: TypeTable, fam, k, members=None) -> bool:
    """Every k-tuple of every member lies in the neighbourhood of a selected tuple."""
    if members is None:
        members = [(i, fam.instantiate(i), None) for i in fam.bounds(k + 1)]
        members += closure_members(fam, k)
    for _, S, nodes in members:
        nodes = sorted(S.universe if nodes is None else nodes)
        covers = []
        for b in itertools.product(nodes, repeat=k):
            T = types.lookup(S, b)
            if T is None:
                return False
            if chi.get(T.id, False):
                covers.append(closure(S, b))
        for v in itertools.product(nodes, repeat=k):
            if not any(set(v) <= c for c in covers):
                return False
    return True


# ---------------------------------------------------------------------------
# family encoding (downward closure)


class _Programs:
    def __init__(self, spec):
        self.spec = spec
        self._by_id = {}

    def of(self, S) -> ConcreteProgram:
        key = id(S)
        if key not in self._by_id:
            self._by_id[key] = (S, self.spec.attach(S))
        return self._by_id[key][1]


def encode_family(spec: ProgramSpec, k: int, options=None, types=None, types_k1=None) -> ChcSystem:
    opts = options or Options()
    fam = spec.family
    if k < 1:
        raise EncodingError("width k must be >= 1")
    if not fam.bounds(k) or not fam.bounds(k + 1):
        raise EncodingError(f"family {fam.name} declares no enumeration bounds for k={k} and k+1")
    types = types or enumerate_qf_types(fam, k)
    types_k1 = types_k1 or enumerate_qf_types(fam, k + 1)
    progs = _Programs(spec)

    chi = {T.id: True for T in types}
    opn_map = {}
    if opts.opn:
        chi, opn_map = opt_opn(types)
    if opts.dpg:
        rules = check_modeling_rules(fam, fam.bounds(k + 1))
        if not rules.ok:
            raise EncodingError("DPG needs the process/resource modeling rules: " + "; ".join(rules.violations))
        dropped = opt_dpg(types, fam)
        chi = {r: chi[r] and dropped[r] for r in chi}
        # OPN representatives may have been dropped by DPG; such collapsed
        # types fall back to true
        opn_map = {s: (r, p) for s, (r, p) in opn_map.items() if chi[r]}
    if opts.opn or opts.dpg:
        members = None
        if opts.dpg:
            members = dpg_members(fam, k + 1, fam.bounds(k + 1)) + dpg_members(fam, k, fam.bounds(k + 1))
        if not validate_chi(chi, types, fam, k, members):
            raise EncodingError("indicator vector does not select a basis; refusing an incomplete encoding")

    preds, layout = {}, {}
    for T in types:
        if chi[T.id]:
            S, w = T.structure, T.witness
            P = progs.of(S)
            preds[T.id] = tuple(v.sort for v in _atom(P, T, S, w, _naming(S, w)).args)
            layout[T.id] = tuple(len(P.fields[u]) for u in T.nodes(S, w))

    def body_atoms(P, S, nodes, naming):
        atoms = []
        for v in itertools.product(sorted(nodes), repeat=k):
            T = types.type_of(S, v)
            if chi[T.id]:
                atoms.append(_atom(P, T, S, v, naming))
        return tuple(atoms)

    clauses = []
    # init clauses: one per k-type witness, over N(w)
    for T in types:
        if not chi[T.id]:
            continue
        S, w = T.structure, T.witness
        P = progs.of(S)
        naming = _naming(S, w)
        nodes = closure(S, w)
        init = conj([subst_mu(P.init[u], naming=naming)[0] for u in sorted(nodes)])
        _finish(clauses, (), init, _atom(P, T, S, w, naming), opts, f"init T{T.id}")

    # step clauses: one per (k+1)-type witness (v0, w)
    for T1 in types_k1:
        S, tup = T1.structure, T1.witness
        v0, w = tup[0], tup[1:]
        P = progs.of(S)
        if not P.is_process(v0):
            continue
        Tw = types.type_of(S, w)
        if not chi[Tw.id]:
            continue
        naming = _naming(S, tup)
        scope = closure(S, tup)
        step = subst_mu(global_transition(P, v0, scope), naming=naming)[0]
        head = _atom(P, Tw, S, w, naming, frozenset(scope))
        _finish(clauses, body_atoms(P, S, scope, naming), step, head, opts, f"step T{T1.id}")

    # error clauses
    for m in spec.error_arities:
        if m > k:
            raise EncodingError(f"error arity {m} exceeds width {k}")
        if opts.dpg:
            _check_error_cover(fam, k, m)
            seen = set()
            for i, S, nodes in dpg_members(fam, k, fam.bounds(k)):
                P = progs.of(S)
                sub = generated_substructure(S, nodes)
                for w in itertools.product(sorted(nodes), repeat=m):
                    key = structure_key(sub, w)
                    if key in seen:
                        continue
                    seen.add(key)
                    err = P.error(w)
                    naming = _member_naming(S, nodes, w)
                    _finish(clauses, body_atoms(P, S, nodes, naming), subst_mu(err, naming=naming)[0],
                            None, opts, f"error dpg {i}")
        else:
            types_m = types if m == k else enumerate_qf_types(fam, m)
            for Tm in types_m:
                S, w = Tm.structure, Tm.witness
                P = progs.of(S)
                naming = _naming(S, w)
                err = subst_mu(P.error(w), naming=naming)[0]
                _finish(clauses, body_atoms(P, S, closure(S, w), naming), err, None, opts, f"error T{Tm.id}/{m}")

    if opts.simplify:
        clauses = dedup_clauses(clauses)
    system = ChcSystem(preds, clauses, types, chi, opts, opn_map, k,
                       meta={"family": fam.name, "types_k1": len(types_k1)}, layout=layout)
    if opts.sym:
        system = symmetry_reduce(system)
    return system


def _check_error_cover(fam, k, m):
    """Every m-tuple of a bound instance must sit inside some DPG member."""
    for i in fam.bounds(k):
        S = fam.instantiate(i)
        procs = [u for u in S.universe if fam.is_proc(S, u)]
        covers = {frozenset(closure(S, t)) for t in itertools.product(procs, repeat=k)}
        for w in itertools.product(S.universe, repeat=m):
            if not any(set(w) <= c for c in covers):
                raise EncodingError(f"error tuple {w} of instance {i} lies in no process neighbourhood")


def _member_naming(S, nodes, w):
    """Deterministic node labels for a DPG member: error tuple first, then the
    remaining nodes by representative term over the whole member."""
    gens = tuple(w) + tuple(u for u in sorted(nodes) if u not in w)
    order = [eval_node_term(S, t, gens) for t in representative_terms(S, gens)]
    return {u: i for i, u in enumerate(order)}


# ---------------------------------------------------------------------------
# symmetry reduction


def type_permutations(T: QfType):
    """Permutations of representative positions induced by automorphisms of N(v_r)."""
    S, w = T.structure, T.witness
    nodes = T.nodes(S, w)
    pos = {u: i for i, u in enumerate(nodes)}
    perms = set()
    for f in automorphisms(T.neighbourhood):
        perms.add(tuple(pos[f[u]] for u in nodes))
    return sorted(perms)


def symmetry_reduce(system: ChcSystem) -> ChcSystem:
    """Rewrite body atoms to their least argument order under the type's
    neighbourhood automorphisms, then drop duplicate atoms and clauses."""
    types = system.types
    perms = {r: type_permutations(types[r]) for r in system.predicates}
    counts = system.layout

    def least(atom):
        groups, i = [], 0
        for c in counts[atom.pred]:
            groups.append(atom.args[i:i + c])
            i += c
        best = None
        for p in perms[atom.pred]:
            cand = tuple(v for j in p for v in groups[j])
            key = tuple(natural_key(v.name) for v in cand)
            if best is None or key < best[0]:
                best = (key, cand)
        return Atom(atom.pred, best[1])

    clauses = []
    for c in system.clauses:
        body = tuple(dict.fromkeys(least(a) for a in c.body))
        clauses.append(Clause(body, c.constraint, c.head, c.origin))
    clauses = dedup_clauses(clauses) if system.options.simplify else clauses
    opts = replace(system.options, sym=True)
    return replace(system, clauses=clauses, options=opts, meta=dict(system.meta, perms=perms))


# ---------------------------------------------------------------------------
# structural comparison


def clause_isomorphic(a: Clause, b: Clause) -> bool:
    """True if some bijective variable renaming maps ``a`` onto ``b`` (body
    atoms and conjuncts compared as multisets)."""
    if (a.head is None) != (b.head is None) or len(a.body) != len(b.body):
        return False
    m0 = {}
    if a.head is not None:
        m0 = _unify_atom(a.head, b.head, {})
        if m0 is None:
            return False
    return any(True for _ in _match_body(list(a.body), list(b.body), m0, a.constraint, b.constraint))


def _unify_atom(x, y, m):
    if x.pred != y.pred or len(x.args) != len(y.args):
        return None
    m = dict(m)
    for p, q in zip(x.args, y.args):
        if not _bind(m, p, q):
            return None
    return m


def _bind(m, p, q):
    if p.sort != q.sort:
        return False
    if p.name in m:
        return m[p.name] == q.name
    if q.name in m.values():
        return False
    m[p.name] = q.name
    return True


def _match_body(xs, ys, m, ca, cb):
    if not xs:
        yield from _unify_formula(ca, cb, m)
        return
    x = xs[0]
    for j, y in enumerate(ys):
        m2 = _unify_atom(x, y, m)
        if m2 is not None:
            yield from _match_body(xs[1:], ys[:j] + ys[j + 1:], m2, ca, cb)


def _unify_formula(x, y, m):
    if isinstance(x, DVar) and isinstance(y, DVar):
        m2 = dict(m)
        if _bind(m2, x, y):
            yield m2
        return
    if isinstance(x, Lit) or isinstance(y, Lit):
        if x == y:
            yield m
        return
    if not (isinstance(x, Op) and isinstance(y, Op)) or x.op != y.op or len(x.args) != len(y.args):
        return
    if x.op in ("and", "or", "distinct") or (x.op == "=" and len(x.args) == 2):
        yield from _unify_multiset(list(x.args), list(y.args), m)
    else:
        yield from _unify_seq(list(x.args), list(y.args), m)


def _unify_seq(xs, ys, m):
    if not xs:
        yield m
        return
    for m2 in _unify_formula(xs[0], ys[0], m):
        yield from _unify_seq(xs[1:], ys[1:], m2)


def _unify_multiset(xs, ys, m):
    if not xs:
        yield m
        return
    for j, y in enumerate(ys):
        for m2 in _unify_formula(xs[0], y, m):
            yield from _unify_multiset(xs[1:], ys[:j] + ys[j + 1:], m2)


def systems_isomorphic(cs1, cs2) -> bool:
    """Clause multisets equal up to per-clause variable renaming."""
    rest = list(cs2)
    if len(cs1) != len(rest):
        return False
    for c in cs1:
        for j, d in enumerate(rest):
            if clause_isomorphic(c, d):
                del rest[j]
                break
        else:
            return False
    return True
