"""Parameterized program specifications and concrete programs.

A spec file names a topology family, declares per-node record fields, and
gives one template per process 1-type ("kind").  Kinds are identified by a
sample node in a sample family member, so type renumbering does not affect
specs.  See ``docs/spec-format.md`` for the grammar.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import sexpr
from .families import FamilyDescriptor, family as builtin_family
from .logic import (
    BOOL,
    FALSE,
    INT,
    OPERATORS,
    TRUE,
    App,
    DVar,
    Lit,
    LogicError,
    Mu,
    NAnd,
    NConst,
    NEq,
    NNot,
    NOr,
    NPred,
    Op,
    Structure,
    Var,
    check_sorts,
    conj,
    disj,
    eval_data,
    eval_node_formula,
    eval_node_term,
    ground,
    mu_atoms,
    node_formula_vars,
    state_lookup,
    term_vars,
    transform,
)
from .symmetry import canonical_key, closure, generated_substructure, representative_terms

log = logging.getLogger(__name__)


class SpecError(ValueError):
    pass


def _err(msg, node=None):
    line, col = sexpr.where(node) if node is not None else (None, None)
    raise SpecError(f"{line}:{col}: {msg}" if line else msg)


@dataclass(frozen=True)
class ErrorSpec:
    arity: int
    guard: object  # NodeFormula over nu1..nu<arity>
    formula: object  # DataFormula template over nu1..nu<arity>


@dataclass
class KindSpec:
    witnesses: list  # [(instance index, node name)]
    trans: object = FALSE
    init: object = TRUE
    errors: list = field(default_factory=list)
    name: str = ""
    keys: set = field(default_factory=set)


@dataclass
class FieldDecl:
    selector: object  # NodeFormula over nu1
    fields: tuple  # ((name, sort), ...)


@dataclass
class ProgramSpec:
    family: FamilyDescriptor
    fields: list
    kinds: list
    errors: list = field(default_factory=list)
    width: Optional[int] = None
    source: str = ""

    def __post_init__(self):
        self._kind_by_key = {}
        for kind in self.kinds:
            kind.keys = set()
            for inst, node in kind.witnesses:
                S = self.family.instantiate(inst)
                try:
                    u = S.node(node)
                except LogicError as e:
                    raise SpecError(f"kind {kind.name or '?'}: {e} in instance {inst}") from None
                key = canonical_key(S, (u,))
                other = self._kind_by_key.get(key)
                if other is not None and other is not kind:
                    raise SpecError(f"1-type of {node}@{inst} has two kinds")
                self._kind_by_key[key] = kind
                kind.keys.add(key)
                if kind.trans != FALSE and not self.family.is_proc(S, u):
                    raise SpecError(f"kind at resource node {node}@{inst} has a transition")

    def fields_of(self, S, u) -> tuple:
        out = {}
        for decl in self.fields:
            if eval_node_formula(S, decl.selector, (u,)):
                for name, sort in decl.fields:
                    if out.get(name, sort) != sort:
                        raise SpecError(f"field {name} declared with two sorts at {S.names[u]}")
                    out[name] = sort
        return tuple(out.items())

    def kind_of(self, S, u) -> Optional[KindSpec]:
        return self._kind_by_key.get(canonical_key(S, (u,)))

    @property
    def error_arities(self):
        ar = {e.arity for e in self.errors}
        for k in self.kinds:
            ar |= {e.arity for e in k.errors}
        return sorted(ar) or [1]

    def attach(self, S) -> "ConcreteProgram":
        return attach_program(S, self)

    def instance(self, index) -> "ConcreteProgram":
        return self.attach(self.family.instantiate(index))

    def all_boolean(self, S=None) -> bool:
        return all(s == BOOL for d in self.fields for _, s in d.fields)


# ---------------------------------------------------------------------------
# concrete programs


class ConcreteProgram:
    """A program over one finite topology; all formulas are grounded."""

    def __init__(self, structure, fields, trans, init, node_errors, errors, procs=None):
        self.structure = structure
        # process nodes; defaults to the nodes with a non-false transition
        self.procs = frozenset(u for u in trans if trans[u] != FALSE) if procs is None else frozenset(procs)
        self.fields = dict(fields)  # node -> ((field, sort), ...)
        self.trans = dict(trans)  # node -> DataFormula (FALSE for non-processes)
        self.init = dict(init)  # node -> DataFormula
        self.node_errors = dict(node_errors)  # node -> [ErrorSpec] owned by its kind
        self.errors = list(errors)  # [ErrorSpec] applying to every tuple

    @property
    def nodes(self):
        return self.structure.universe

    def slots(self, nodes=None):
        nodes = self.structure.universe if nodes is None else nodes
        return [(u, f, s) for u in nodes for f, s in self.fields[u]]

    def error_arities(self):
        ar = {e.arity for e in self.errors}
        for es in self.node_errors.values():
            ar |= {e.arity for e in es}
        return sorted(ar)

    def error(self, tup) -> object:
        """Ground error formula for the node tuple ``tup``."""
        tup = tuple(tup)
        S = self.structure
        parts = []
        for e in self.errors + self.node_errors.get(tup[0], []):
            if e.arity == len(tup) and eval_node_formula(S, e.guard, tup):
                parts.append(ground(e.formula, S, tup))
        return disj(parts)

    def is_process(self, u):
        return u in self.procs

    def _key(self):
        return (
            self.structure,
            tuple(sorted(self.fields.items())),
            tuple(sorted(self.trans.items(), key=lambda kv: kv[0])),
            tuple(sorted(self.init.items(), key=lambda kv: kv[0])),
            tuple(sorted((u, tuple(es)) for u, es in self.node_errors.items())),
            tuple(self.errors),
            self.procs,
        )

    def __eq__(self, other):
        return isinstance(other, ConcreteProgram) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())


def _frame(P, nodes):
    return [Op("=", (Mu(u, f, s, True), Mu(u, f, s, False))) for u in sorted(nodes) for f, s in P.fields[u]]


def _check_local(S, phi, u, what, allowed=None):
    allowed = closure(S, (u,)) if allowed is None else allowed
    for m in mu_atoms(phi):
        if m.node not in allowed:
            raise LogicError(f"{what} of {S.names[u]} refers to {S.names[m.node]} outside its neighbourhood")


def attach_program(S: Structure, spec: ProgramSpec) -> ConcreteProgram:
    fields, trans, init, node_errors = {}, {}, {}, {}
    for u in S.universe:
        fields[u] = spec.fields_of(S, u)
    for u in S.universe:
        kind = spec.kind_of(S, u)
        if kind is None:
            if spec.family.is_proc(S, u):
                raise LogicError(f"process node {S.names[u]} has a 1-type with no kind in the spec")
            trans[u], init[u], node_errors[u] = FALSE, TRUE, []
            continue
        local = closure(S, (u,))
        t = ground(kind.trans, S, (u,))
        _check_local(S, t, u, "transition")
        if t != FALSE:
            touched = {(m.node, m.field) for m in mu_atoms(t) if m.primed}
            frame = [Op("=", (Mu(x, f, s, True), Mu(x, f, s, False)))
                     for x in sorted(local) for f, s in fields[x] if (x, f) not in touched]
            t = conj([t] + frame)
        for m in mu_atoms(t):
            if m.field not in dict(fields[m.node]):
                raise LogicError(f"node {S.names[m.node]} has no field {m.field}")
        i = ground(kind.init, S, (u,))
        _check_local(S, i, u, "init")
        for m in mu_atoms(i):
            if m.field not in dict(fields[m.node]):
                raise LogicError(f"node {S.names[m.node]} has no field {m.field}")
        trans[u], init[u], node_errors[u] = t, i, list(kind.errors)
    procs = [u for u in S.universe if spec.family.is_proc(S, u)]
    return ConcreteProgram(S, fields, trans, init, node_errors, spec.errors, procs)


def global_transition(P: ConcreteProgram, v, scope=None):
    """``[[v]]`` plus frame equalities on ``scope`` minus ``N(v)``."""
    S = P.structure
    if not P.is_process(v):
        raise LogicError(f"{S.names[v]} has no transition")
    local = closure(S, (v,))
    scope = set(S.universe if scope is None else scope)
    if not local <= scope:
        raise LogicError("frame scope must contain N(v)")
    return conj([P.trans[v]] + _frame(P, scope - local))


def subprogram(P: ConcreteProgram, sub) -> ConcreteProgram:
    """Restriction of ``P`` to a function-closed node set or substructure."""
    nodes = set(sub.universe if isinstance(sub, Structure) else sub)
    if not nodes <= set(P.structure.universe):
        raise LogicError("substructure nodes not in the program's topology")
    if not P.structure.is_closed(nodes):
        raise LogicError("node set is not closed under the vocabulary's functions")
    S2 = P.structure if len(nodes) == len(P.structure.universe) else P.structure.restrict(nodes)
    keep = lambda d: {u: v for u, v in d.items() if u in nodes}
    return ConcreteProgram(S2, keep(P.fields), keep(P.trans), keep(P.init), keep(P.node_errors), P.errors,
                           P.procs & nodes)


# ---------------------------------------------------------------------------
# validators


@dataclass
class Report:
    ok: bool
    status: str = ""
    violations: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def __bool__(self):
        return self.ok


def _relabel(phi, order):
    idx = {u: i for i, u in enumerate(order)}

    def leaf(x):
        if isinstance(x, Mu):
            if x.node not in idx:
                raise KeyError(x.node)
            return Mu(idx[x.node], x.field, x.sort, x.primed)
        return x

    return transform(phi, leaf)


def validate_symmetry(programs) -> Report:
    """Check that locally isomorphic nodes carry the same formulas.

    Each node's transition and init are rewritten with nodes replaced by their
    position in the representative-term order of the node's 1-type; all nodes of
    one type must then agree.
    """
    programs = list(programs)
    rep = Report(True, "pass")
    if not programs:
        rep.warnings.append("empty sample: nothing checked")
        return rep
    seen = {}
    for P in programs:
        S = P.structure
        for u in S.universe:
            terms = representative_terms(S, (u,))
            order = [eval_node_term(S, t, (u,)) for t in terms]
            try:
                norm = (_relabel(P.trans[u], order), _relabel(P.init[u], order),
                        tuple(P.node_errors.get(u, ())))
            except KeyError as e:
                rep.ok = False
                rep.violations.append(f"{S.names[u]}: formula mentions node {S.names[e.args[0]]} outside N(v)")
                continue
            key = canonical_key(S, (u,))
            if key in seen and seen[key][0] != norm:
                rep.ok = False
                rep.violations.append(f"{S.names[u]} disagrees with locally symmetric node {seen[key][1]}")
            seen.setdefault(key, (norm, S.names[u]))
    rep.status = "pass" if rep.ok else "fail"
    return rep


def check_modeling_rules(fam: FamilyDescriptor, indices) -> Report:
    """Resource neighbourhoods contain no process and every resource node lies
    in some process neighbourhood."""
    rep = Report(True, "pass")
    for i in indices:
        S = fam.instantiate(i)
        procs = [u for u in S.universe if fam.is_proc(S, u)]
        covered = set().union(set(), *(closure(S, (p,)) for p in procs))
        for u in S.universe:
            if fam.is_proc(S, u):
                continue
            if any(fam.is_proc(S, x) for x in closure(S, (u,))):
                rep.ok = False
                rep.violations.append(f"{fam.name}({i}): N({S.names[u]}) contains a process")
            if u not in covered:
                rep.ok = False
                rep.violations.append(f"{fam.name}({i}): {S.names[u]} is in no process neighbourhood")
    rep.status = "pass" if rep.ok else "fail"
    return rep


def boolean_states(P: ConcreteProgram, nodes=None, limit=1 << 20):
    slots = P.slots(nodes)
    if any(s != BOOL for _, _, s in slots):
        raise LogicError("state enumeration needs boolean fields")
    if 2 ** len(slots) > limit:
        raise LogicError(f"{len(slots)} boolean slots exceed the enumeration budget")
    base = {u: {} for u in (P.nodes if nodes is None else nodes)}
    for bits in itertools.product((False, True), repeat=len(slots)):
        st = {u: dict(r) for u, r in base.items()}
        for (u, f, _), b in zip(slots, bits):
            st[u][f] = b
        yield st


def initial_states(P: ConcreteProgram, nodes=None):
    nodes = list(P.nodes if nodes is None else nodes)
    inits = [P.init[u] for u in nodes]
    for st in boolean_states(P, nodes):
        if all(eval_data(i, state_lookup(st)) for i in inits):
            yield st


def check_extensible(spec: ProgramSpec, sample) -> Report:
    """Every initial local valuation on a generated substructure extends to an
    initial global state (checked on the ``sample`` instance indices)."""
    programs = [spec.instance(i) for i in sample]
    if not programs:
        return Report(True, "pass", warnings=["empty sample"])
    if all({m.node for m in mu_atoms(P.init[u])} <= {u} for P in programs for u in P.nodes):
        return Report(True, "pass (per-node independent init)")
    if not spec.all_boolean():
        return Report(False, "unknown", warnings=["cross-node init over non-boolean fields"])
    rep = Report(True, "pass (enumerated)")
    for P in programs:
        S = P.structure
        try:
            full = list(initial_states(P))
        except LogicError as e:
            return Report(False, "unknown", warnings=[str(e)])
        subs = {closure(S, t) for r in (1, 2) for t in itertools.product(S.universe, repeat=r)}
        for nodes in sorted(subs, key=sorted):
            proj = {_freeze(st, nodes) for st in full}
            sub = subprogram(P, nodes)
            for st in initial_states(sub):
                if _freeze(st, nodes) not in proj:
                    rep.ok = False
                    rep.status = "fail"
                    rep.violations.append(
                        f"initial state on {{{', '.join(S.names[u] for u in sorted(nodes))}}} does not extend")
                    break
    return rep


def _freeze(st, nodes):
    return tuple((u, tuple(sorted(st[u].items()))) for u in sorted(nodes))


# ---------------------------------------------------------------------------
# spec file parser

_SORTS = {"int": INT, "bool": BOOL, "Int": INT, "Bool": BOOL}


class _Ctx:
    def __init__(self, fam: FamilyDescriptor, field_sorts: dict, width: int):
        self.fam = fam
        self.vocab = fam.vocab
        self.fields = field_sorts
        self.width = width

    def term(self, x):
        if isinstance(x, sexpr.Symbol):
            s = str(x)
            if s == "nu":
                return Var(0)
            if s.startswith("nu") and s[2:].isdigit():
                i = int(s[2:])
                if not 1 <= i <= self.width:
                    _err(f"variable {s} out of range (width {self.width})", x)
                return Var(i - 1)
            if self.vocab.is_function(s) and self.vocab.arity(s) == 0:
                return App(s)
            _err(f"unknown node term {s!r}", x)
        if isinstance(x, list) and x and isinstance(x[0], sexpr.Symbol):
            f = str(x[0])
            if not self.vocab.is_function(f):
                _err(f"unknown function symbol {f!r}", x)
            if self.vocab.arity(f) != len(x) - 1:
                _err(f"{f} expects {self.vocab.arity(f)} arguments", x)
            return App(f, tuple(self.term(a) for a in x[1:]))
        _err(f"bad node term {sexpr.dumps(x)}", x)

    def node_formula(self, x):
        if isinstance(x, sexpr.Symbol) and x in ("true", "false"):
            return NConst(x == "true")
        if not (isinstance(x, list) and x and isinstance(x[0], sexpr.Symbol)):
            _err(f"bad node formula {sexpr.dumps(x)}", x)
        op, args = str(x[0]), x[1:]
        if op == "=":
            if len(args) != 2:
                _err("= on nodes takes two terms", x)
            return NEq(self.term(args[0]), self.term(args[1]))
        if op == "distinct":
            ts = [self.term(a) for a in args]
            return NAnd(tuple(NNot(NEq(a, b)) for a, b in itertools.combinations(ts, 2)))
        if op == "not":
            return NNot(self.node_formula(args[0]))
        if op == "and":
            return NAnd(tuple(self.node_formula(a) for a in args))
        if op == "or":
            return NOr(tuple(self.node_formula(a) for a in args))
        if self.vocab.is_predicate(op):
            if self.vocab.arity(op) != len(args):
                _err(f"{op} expects {self.vocab.arity(op)} arguments", x)
            return NPred(op, tuple(self.term(a) for a in args))
        _err(f"unknown node predicate or connective {op!r}", x)

    def data(self, x):
        if isinstance(x, bool):
            return Lit(x)
        if isinstance(x, int):
            return Lit(x)
        if isinstance(x, sexpr.Symbol):
            if x == "true":
                return Lit(True)
            if x == "false":
                return Lit(False)
            _err(f"unexpected symbol {str(x)!r} in data formula (use (mu <term> <field>))", x)
        if not (isinstance(x, list) and x and isinstance(x[0], sexpr.Symbol)):
            _err(f"bad data formula {sexpr.dumps(x)}", x)
        op, args = str(x[0]), x[1:]
        if op in ("mu", "mu'"):
            if len(args) != 2 or not isinstance(args[1], sexpr.Symbol):
                _err(f"({op} <term> <field>) expected", x)
            fld = str(args[1])
            if fld not in self.fields:
                _err(f"undeclared field {fld!r}", args[1])
            return Mu(self.term(args[0]), fld, self.fields[fld], op == "mu'")
        if op not in OPERATORS:
            _err(f"unsupported operator {op!r}", x)
        e = Op(op, tuple(self.data(a) for a in args))
        if op == "-" and len(args) == 1 and isinstance(e.args[0], Lit) and not isinstance(e.args[0].value, bool):
            return Lit(-e.args[0].value)
        try:
            check_sorts(e)
        except LogicError as exc:
            _err(str(exc), x)
        return e


def _bool_formula(ctx, x, what):
    e = ctx.data(x)
    if check_sorts(e) != BOOL:
        _err(f"{what} must be boolean", x)
    return e


def parse_spec(text, source="<string>") -> ProgramSpec:
    try:
        items = sexpr.parse(text)
    except sexpr.SExprError as e:
        raise SpecError(str(e)) from None
    sections = {}
    for it in items:
        if not (isinstance(it, list) and it and isinstance(it[0], sexpr.Symbol)):
            _err("top-level forms must be (section ...)", it)
        sections.setdefault(str(it[0]), []).append(it)
    unknown = set(sections) - {"family", "fields", "kind", "error", "enum-bounds", "width", "name"}
    if unknown:
        first = sections[sorted(unknown)[0]][0]
        _err(f"unknown section {sorted(unknown)[0]!r}", first)
    if len(sections.get("family", [])) != 1:
        raise SpecError("exactly one (family ...) section required")
    fam_form = sections["family"][0]
    if len(fam_form) < 2 or not isinstance(fam_form[1], sexpr.Symbol):
        _err("(family <name> ...) expected", fam_form)
    try:
        fam = builtin_family(str(fam_form[1]))
    except LogicError as e:
        _err(str(e), fam_form)
    min_index = None
    for opt in fam_form[2:]:
        if isinstance(opt, list) and len(opt) == 2 and opt[0] == "from" and isinstance(opt[1], int):
            min_index = opt[1]
        else:
            _err(f"unknown family option {sexpr.dumps(opt)}", opt)
    bounds = {}
    for form in sections.get("enum-bounds", []):
        for entry in form[1:]:
            if not (isinstance(entry, list) and entry and all(isinstance(v, int) for v in entry)):
                _err("(enum-bounds (<k> <index>...) ...) expected", entry)
            bounds[entry[0]] = list(entry[1:])
    if bounds or min_index is not None:
        fam = fam.with_bounds(bounds, min_index)

    width = None
    for form in sections.get("width", []):
        if len(form) != 2 or not isinstance(form[1], int) or form[1] < 1:
            _err("(width <k >= 1>) expected", form)
        width = form[1]

    # fields first so formulas can be sort-checked
    decls, sorts = [], {}
    sel_ctx = _Ctx(fam, {}, 1)
    for form in sections.get("fields", []):
        for entry in form[1:]:
            if not (isinstance(entry, list) and entry):
                _err("(fields (<selector> (<field> <sort>)...)...) expected", entry)
            sel = _selector(sel_ctx, entry[0])
            flds = []
            for fd in entry[1:]:
                if not (isinstance(fd, list) and len(fd) == 2 and str(fd[1]) in _SORTS):
                    _err("field declarations look like (<name> int|bool)", fd)
                name, sort = str(fd[0]), _SORTS[str(fd[1])]
                if sorts.get(name, sort) != sort:
                    _err(f"field {name} declared with two sorts", fd)
                sorts[name] = sort
                flds.append((name, sort))
            decls.append(FieldDecl(sel, tuple(flds)))

    kinds = []
    ctx1 = _Ctx(fam, sorts, 1)
    for form in sections.get("kind", []):
        if len(form) < 2:
            _err("(kind (<instance> <node>) ...) expected", form)
        head = form[1]
        name = ""
        rest = form[2:]
        if isinstance(head, sexpr.Symbol):
            name, head, rest = str(head), form[2], form[3:]
        wits = _witnesses(head)
        kind = KindSpec(wits, name=name)
        for clause in rest:
            if not (isinstance(clause, list) and clause and isinstance(clause[0], sexpr.Symbol)):
                _err("kind clauses are (trans f), (init f) or (error ...)", clause)
            tag = str(clause[0])
            if tag == "trans":
                kind.trans = _bool_formula(ctx1, clause[1], "trans")
            elif tag == "init":
                kind.init = _bool_formula(ctx1, clause[1], "init")
                if any(m.primed for m in mu_atoms(kind.init)):
                    _err("init must not mention mu'", clause)
            elif tag == "error":
                kind.errors.append(_error_spec(fam, sorts, clause))
            else:
                _err(f"unknown kind clause {tag!r}", clause)
        kinds.append(kind)

    errors = [_error_spec(fam, sorts, form) for form in sections.get("error", [])]
    try:
        return ProgramSpec(fam, decls, kinds, errors, width, source)
    except LogicError as e:
        raise SpecError(str(e)) from None


def _witnesses(head):
    if isinstance(head, list) and len(head) == 2 and isinstance(head[0], int) and not isinstance(head[1], list):
        return [(head[0], str(head[1]))]
    if isinstance(head, list) and head and all(isinstance(h, list) for h in head):
        out = []
        for h in head:
            out.extend(_witnesses(h))
        return out
    _err("kind witness must be (<instance> <node>) or a list of them", head)


def _selector(ctx, x):
    if isinstance(x, sexpr.Symbol):
        if x == "all":
            return NConst(True)
        if x == "proc":
            return NPred(ctx.fam.proc_predicate, (Var(0),))
        if x == "res":
            return NNot(NPred(ctx.fam.proc_predicate, (Var(0),)))
    return ctx.node_formula(_selector_sugar(x))


def _selector_sugar(x):
    # (pred P) -> (P nu); (const c) -> (= nu c)
    if isinstance(x, list) and len(x) == 2 and x[0] == "pred":
        return [x[1], sexpr.Symbol("nu")]
    if isinstance(x, list) and len(x) == 2 and x[0] == "const":
        return [sexpr.Symbol("="), sexpr.Symbol("nu"), x[1]]
    if isinstance(x, list) and x and x[0] in ("not", "and", "or"):
        return [x[0]] + [_selector_sugar(a) for a in x[1:]]
    return x


def _error_spec(fam, sorts, form):
    # (error [m] [(guard g)] f)
    args = list(form[1:])
    m = 1
    if args and isinstance(args[0], int):
        m = args.pop(0)
    if m < 1:
        _err("error arity must be >= 1", form)
    ctx = _Ctx(fam, sorts, m)
    guard = NConst(True)
    if args and isinstance(args[0], list) and args[0] and args[0][0] == "guard":
        guard = ctx.node_formula(args.pop(0)[1])
    if len(args) != 1:
        _err("(error [m] [(guard g)] <formula>) expected", form)
    f = _bool_formula(ctx, args[0], "error")
    if any(m_.primed for m_ in mu_atoms(f)):
        _err("error must not mention mu'", form)
    return ErrorSpec(m, guard, f)


def load_spec(path) -> ProgramSpec:
    path = Path(path)
    return parse_spec(path.read_text(encoding="utf-8"), str(path))
