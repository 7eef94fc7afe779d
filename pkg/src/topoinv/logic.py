"""Vocabularies, finite structures, node terms/formulas and data formulas.

Node-side syntax (:class:`Var`, :class:`App`, ``N*`` formulas) is interpreted
in a finite :class:`Structure`.  Data-side syntax (``Lit``, ``DVar``, ``Mu``,
``Op``) is quantifier-free linear integer arithmetic with booleans; ``Mu``
atoms read a field of a node's record in the current (``primed=False``) or
next (``primed=True``) global state.  Everything here is immutable.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Union

INT = "Int"
BOOL = "Bool"


class LogicError(ValueError):
    pass


# ---------------------------------------------------------------------------
# vocabularies and structures


@dataclass(frozen=True)
class Vocabulary:
    functions: tuple = ()  # ((name, arity), ...); arity 0 = constant
    predicates: tuple = ()  # ((name, arity), ...)

    def __post_init__(self):
        names = [n for n, _ in self.functions] + [n for n, _ in self.predicates]
        if len(set(names)) != len(names):
            raise LogicError(f"duplicate symbol in vocabulary: {names}")
        for n, a in self.predicates:
            if a < 1:
                raise LogicError(f"predicate {n} must have arity >= 1")
        for n, a in self.functions:
            if a < 0:
                raise LogicError(f"function {n} has negative arity")

    def arity(self, name):
        for n, a in self.functions + self.predicates:
            if n == name:
                return a
        raise LogicError(f"unknown symbol {name!r}")

    def is_function(self, name):
        return any(n == name for n, _ in self.functions)

    def is_predicate(self, name):
        return any(n == name for n, _ in self.predicates)

    @property
    def constants(self):
        return tuple(n for n, a in self.functions if a == 0)


class Structure:
    """A finite structure whose elements are integer node ids.

    ``functions`` maps each function symbol to a total table
    ``{args_tuple: node}``; ``predicates`` maps each predicate symbol to the
    set of tuples where it holds.  ``names`` is display-only and does not take
    part in equality.
    """

    __slots__ = ("vocab", "universe", "_fn", "_pred", "names", "_key", "_cache")

    def __init__(self, vocab, universe, functions, predicates, names=None):
        self.vocab = vocab
        self.universe = tuple(sorted(set(universe)))
        if not self.universe:
            raise LogicError("structure universe must be nonempty")
        uset = set(self.universe)
        fn = {}
        for name, arity in vocab.functions:
            table = dict(functions.get(name, {}))
            for args in itertools.product(self.universe, repeat=arity):
                if args not in table:
                    raise LogicError(f"function {name} undefined on {args}")
                if table[args] not in uset:
                    raise LogicError(f"function {name}{args} leaves the universe")
            fn[name] = {a: table[a] for a in itertools.product(self.universe, repeat=arity)}
        pred = {}
        for name, arity in vocab.predicates:
            rel = frozenset(tuple(t) for t in predicates.get(name, ()))
            for t in rel:
                if len(t) != arity or not set(t) <= uset:
                    raise LogicError(f"bad tuple {t} for predicate {name}")
            pred[name] = rel
        extra = (set(functions) - set(fn)) | (set(predicates) - set(pred))
        if extra:
            raise LogicError(f"symbols not in vocabulary: {sorted(extra)}")
        self._fn = fn
        self._pred = pred
        self.names = {u: (names or {}).get(u, str(u)) for u in self.universe}
        self._key = (
            vocab,
            self.universe,
            tuple((n, tuple(sorted(t.items()))) for n, t in sorted(fn.items())),
            tuple((n, tuple(sorted(r))) for n, r in sorted(pred.items())),
        )
        self._cache = {}

    def __eq__(self, other):
        return isinstance(other, Structure) and self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __len__(self):
        return len(self.universe)

    def __repr__(self):
        return f"Structure({len(self.universe)} nodes)"

    def apply(self, name, args=()):
        try:
            return self._fn[name][tuple(args)]
        except KeyError:
            if name not in self._fn:
                raise LogicError(f"unknown function symbol {name!r}") from None
            raise LogicError(f"{name}{tuple(args)} outside universe") from None

    def holds(self, name, args):
        if name not in self._pred:
            raise LogicError(f"unknown predicate symbol {name!r}")
        return tuple(args) in self._pred[name]

    def function_table(self, name):
        return self._fn[name]

    def relation(self, name):
        return self._pred[name]

    def node(self, name):
        """Look a node up by display name (or accept an int id)."""
        if isinstance(name, int) and name in self.names:
            return name
        for u, n in self.names.items():
            if n == str(name):
                return u
        raise LogicError(f"no node named {name!r}")

    def restrict(self, nodes):
        """Substructure on ``nodes``; they must be closed under all functions."""
        nodes = set(nodes)
        fns = {}
        for name, arity in self.vocab.functions:
            table = {}
            for args in itertools.product(sorted(nodes), repeat=arity):
                out = self._fn[name][args]
                if out not in nodes:
                    raise LogicError(f"node set not closed under {name}")
                table[args] = out
            fns[name] = table
        preds = {n: {t for t in r if set(t) <= nodes} for n, r in self._pred.items()}
        return Structure(self.vocab, nodes, fns, preds, {u: self.names[u] for u in nodes})

    def is_closed(self, nodes):
        nodes = set(nodes)
        for name, arity in self.vocab.functions:
            for args in itertools.product(sorted(nodes), repeat=arity):
                if self._fn[name][args] not in nodes:
                    return False
        return True


# ---------------------------------------------------------------------------
# node terms and formulas


@dataclass(frozen=True)
class Var:
    index: int  # 0-based position in the node-variable tuple

    def __str__(self):
        return f"nu{self.index + 1}"


@dataclass(frozen=True)
class App:
    fn: str
    args: tuple = ()

    def __str__(self):
        if not self.args:
            return self.fn
        return f"({self.fn} {' '.join(map(str, self.args))})"


NodeTerm = Union[Var, App]


def term_height(t):
    if isinstance(t, Var):
        return 0
    return 1 + max((term_height(a) for a in t.args), default=-1)


def term_vars(t):
    if isinstance(t, Var):
        return {t.index}
    out = set()
    for a in t.args:
        out |= term_vars(a)
    return out


def eval_node_term(S, t, env):
    if isinstance(t, Var):
        if not 0 <= t.index < len(env):
            raise LogicError(f"variable {t} out of range for env of length {len(env)}")
        return env[t.index]
    if not S.vocab.is_function(t.fn):
        raise LogicError(f"unknown function symbol {t.fn!r}")
    if S.vocab.arity(t.fn) != len(t.args):
        raise LogicError(f"arity mismatch for {t.fn}")
    return S.apply(t.fn, [eval_node_term(S, a, env) for a in t.args])


@dataclass(frozen=True)
class NEq:
    lhs: NodeTerm
    rhs: NodeTerm

    def __str__(self):
        return f"(= {self.lhs} {self.rhs})"


@dataclass(frozen=True)
class NPred:
    name: str
    args: tuple

    def __str__(self):
        return f"({self.name} {' '.join(map(str, self.args))})"


@dataclass(frozen=True)
class NNot:
    arg: "NodeFormula"

    def __str__(self):
        return f"(not {self.arg})"


@dataclass(frozen=True)
class NAnd:
    args: tuple

    def __str__(self):
        if not self.args:
            return "true"
        return f"(and {' '.join(map(str, self.args))})"


@dataclass(frozen=True)
class NOr:
    args: tuple

    def __str__(self):
        if not self.args:
            return "false"
        return f"(or {' '.join(map(str, self.args))})"


@dataclass(frozen=True)
class NConst:
    value: bool

    def __str__(self):
        return "true" if self.value else "false"


NodeFormula = Union[NEq, NPred, NNot, NAnd, NOr, NConst]


def eval_node_formula(S, phi, env):
    if isinstance(phi, NEq):
        return eval_node_term(S, phi.lhs, env) == eval_node_term(S, phi.rhs, env)
    if isinstance(phi, NPred):
        if S.vocab.is_predicate(phi.name) and S.vocab.arity(phi.name) != len(phi.args):
            raise LogicError(f"arity mismatch for {phi.name}")
        return S.holds(phi.name, [eval_node_term(S, a, env) for a in phi.args])
    if isinstance(phi, NNot):
        return not eval_node_formula(S, phi.arg, env)
    if isinstance(phi, NAnd):
        return all(eval_node_formula(S, a, env) for a in phi.args)
    if isinstance(phi, NOr):
        return any(eval_node_formula(S, a, env) for a in phi.args)
    if isinstance(phi, NConst):
        return phi.value
    raise LogicError(f"not a node formula: {phi!r}")


def node_formula_vars(phi):
    if isinstance(phi, NEq):
        return term_vars(phi.lhs) | term_vars(phi.rhs)
    if isinstance(phi, NPred):
        return set().union(*(term_vars(a) for a in phi.args))
    if isinstance(phi, NNot):
        return node_formula_vars(phi.arg)
    if isinstance(phi, (NAnd, NOr)):
        return set().union(set(), *(node_formula_vars(a) for a in phi.args))
    return set()


# ---------------------------------------------------------------------------
# data formulas


@dataclass(frozen=True, eq=False)
class Lit:
    value: Union[int, bool]

    @property
    def sort(self):
        return BOOL if isinstance(self.value, bool) else INT

    # 1 and True must stay distinct literals
    def __eq__(self, other):
        return isinstance(other, Lit) and self.sort == other.sort and self.value == other.value

    def __hash__(self):
        return hash((self.sort, self.value))


@dataclass(frozen=True)
class DVar:
    name: str
    sort: str = INT


@dataclass(frozen=True)
class Mu:
    """``field(mu(node))`` or, when ``primed``, ``field(mu'(node))``.

    ``node`` is a :data:`NodeTerm` in templates and a concrete node id once
    grounded.
    """

    node: Union[NodeTerm, int]
    field: str
    sort: str = INT
    primed: bool = False


@dataclass(frozen=True)
class Op:
    op: str
    args: tuple


DataFormula = Union[Lit, DVar, Mu, Op]
TRUE = Lit(True)
FALSE = Lit(False)

_BOOL_OPS = {"and", "or", "not", "=>", "xor"}
_CMP_OPS = {"<", "<=", ">", ">="}
_ARITH_OPS = {"+", "-", "*", "div", "mod", "abs"}
OPERATORS = _BOOL_OPS | _CMP_OPS | _ARITH_OPS | {"=", "distinct", "ite"}


def sort_of(e):
    if isinstance(e, (Lit, DVar, Mu)):
        return e.sort
    if e.op in _BOOL_OPS or e.op in _CMP_OPS or e.op in ("=", "distinct"):
        return BOOL
    if e.op == "ite":
        return sort_of(e.args[1])
    return INT


def check_sorts(e):
    """Raise :class:`LogicError` unless ``e`` is well sorted."""
    if isinstance(e, (Lit, DVar, Mu)):
        return e.sort
    if e.op not in OPERATORS:
        raise LogicError(f"unsupported operator {e.op!r}")
    sorts = [check_sorts(a) for a in e.args]
    if e.op in _BOOL_OPS:
        if any(s != BOOL for s in sorts):
            raise LogicError(f"{e.op} expects Bool arguments")
    elif e.op in _CMP_OPS or e.op in _ARITH_OPS:
        if any(s != INT for s in sorts):
            raise LogicError(f"{e.op} expects Int arguments")
    elif e.op in ("=", "distinct"):
        if len(set(sorts)) > 1:
            raise LogicError(f"{e.op} on mixed sorts {sorts}")
    elif e.op == "ite":
        if len(sorts) != 3 or sorts[0] != BOOL or sorts[1] != sorts[2]:
            raise LogicError("ite expects (Bool, s, s)")
    return sort_of(e)


def conj(items):
    items = [i for i in items if i != TRUE]
    if any(i == FALSE for i in items):
        return FALSE
    if not items:
        return TRUE
    if len(items) == 1:
        return items[0]
    return Op("and", tuple(items))


def disj(items):
    items = [i for i in items if i != FALSE]
    if any(i == TRUE for i in items):
        return TRUE
    if not items:
        return FALSE
    if len(items) == 1:
        return items[0]
    return Op("or", tuple(items))


def neg(e):
    if isinstance(e, Lit):
        return Lit(not e.value)
    if isinstance(e, Op) and e.op == "not":
        return e.args[0]
    return Op("not", (e,))


def implies(a, b):
    return disj([neg(a), b])


def transform(e, leaf):
    """Rebuild ``e`` bottom-up, replacing each leaf by ``leaf(x)``."""
    if isinstance(e, Op):
        return Op(e.op, tuple(transform(a, leaf) for a in e.args))
    return leaf(e)


def leaves(e):
    if isinstance(e, Op):
        for a in e.args:
            yield from leaves(a)
    else:
        yield e


def mu_atoms(e):
    return [x for x in leaves(e) if isinstance(x, Mu)]


def free_vars(e):
    return {x for x in leaves(e) if isinstance(x, DVar)}


def is_primed(e):
    return any(m.primed for m in mu_atoms(e))


def prime(e):
    """Replace every ``mu`` by ``mu'``."""
    if is_primed(e):
        raise LogicError("formula already contains mu'")
    return transform(e, lambda x: Mu(x.node, x.field, x.sort, True) if isinstance(x, Mu) else x)


def unprime(e):
    return transform(e, lambda x: Mu(x.node, x.field, x.sort, False) if isinstance(x, Mu) else x)


def ground(e, S, env):
    """Evaluate every node term inside ``Mu`` atoms, giving concrete node ids."""

    def leaf(x):
        if isinstance(x, Mu) and not isinstance(x.node, int):
            return Mu(eval_node_term(S, x.node, env), x.field, x.sort, x.primed)
        return x

    return transform(e, leaf)


def var_name(node, fld, primed=False):
    return f"{'xp' if primed else 'x'}_{node}_{fld}"


def subst_mu(e, S=None, env=(), naming=None):
    """Replace ``mu(t).f`` by ``x_<t>_<f>`` (``xp_`` for primed atoms).

    Template terms are evaluated in ``S`` under ``env`` first.  ``naming``
    optionally relabels nodes before they are baked into variable names.
    Returns ``(formula, mapping)`` where ``mapping`` sends
    ``(node, field, primed)`` to the introduced :class:`DVar`.
    """
    mapping = {}

    def leaf(x):
        if not isinstance(x, Mu):
            return x
        node = x.node
        if not isinstance(node, int):
            if S is None:
                raise LogicError(f"cannot evaluate node term {node} without a structure")
            node = eval_node_term(S, node, env)
        label = naming[node] if naming is not None else node
        v = DVar(var_name(label, x.field, x.primed), x.sort)
        mapping[(node, x.field, x.primed)] = v
        return v

    return transform(e, leaf), mapping


def resubst(e, mapping):
    """Inverse of :func:`subst_mu` for the variables in ``mapping``."""
    back = {v: Mu(node, fld, v.sort, primed) for (node, fld, primed), v in mapping.items()}
    return transform(e, lambda x: back.get(x, x))


def substitute(e, repl: Mapping):
    """Replace leaves (variables or atoms) according to ``repl``."""
    return transform(e, lambda x: repl.get(x, x))


def simplify(e):
    """Constant folding on the boolean skeleton; keeps everything else."""
    if not isinstance(e, Op):
        return e
    args = [simplify(a) for a in e.args]
    if e.op == "and":
        flat = []
        for a in args:
            flat.extend(a.args if isinstance(a, Op) and a.op == "and" else [a])
        return conj(_dedup(flat))
    if e.op == "or":
        flat = []
        for a in args:
            flat.extend(a.args if isinstance(a, Op) and a.op == "or" else [a])
        return disj(_dedup(flat))
    if e.op == "not":
        return neg(args[0])
    if e.op == "=>":
        return simplify(Op("or", (neg(args[0]), args[1])))
    if e.op == "ite" and isinstance(args[0], Lit):
        return args[1] if args[0].value else args[2]
    if e.op == "=" and len(args) == 2 and args[0] == args[1]:
        return TRUE
    if all(isinstance(a, Lit) for a in args) and e.op not in ("ite",):
        try:
            return Lit(_apply(e.op, [a.value for a in args]))
        except (ZeroDivisionError, LogicError):
            pass
    return Op(e.op, tuple(args))


def _dedup(items):
    seen, out = set(), []
    for i in items:
        if i not in seen:
            seen.add(i)
            out.append(i)
    return out


def _apply(op, vals):
    if op == "and":
        return all(vals)
    if op == "or":
        return any(vals)
    if op == "not":
        return not vals[0]
    if op == "=>":
        return (not vals[0]) or vals[1]
    if op == "xor":
        return vals[0] != vals[1]
    if op == "=":
        return all(v == vals[0] for v in vals)
    if op == "distinct":
        return len(set(vals)) == len(vals)
    if op == "<":
        return all(a < b for a, b in zip(vals, vals[1:]))
    if op == "<=":
        return all(a <= b for a, b in zip(vals, vals[1:]))
    if op == ">":
        return all(a > b for a, b in zip(vals, vals[1:]))
    if op == ">=":
        return all(a >= b for a, b in zip(vals, vals[1:]))
    if op == "+":
        return sum(vals)
    if op == "-":
        return -vals[0] if len(vals) == 1 else vals[0] - sum(vals[1:])
    if op == "*":
        out = 1
        for v in vals:
            out *= v
        return out
    if op == "div":
        # SMT-LIB integer division: floor for positive divisor, ceil otherwise
        a, b = vals
        q = a // b if b > 0 else -(a // -b)
        return q
    if op == "mod":
        a, b = vals
        return a - b * _apply("div", [a, b])
    if op == "abs":
        return abs(vals[0])
    if op == "ite":
        return vals[1] if vals[0] else vals[2]
    raise LogicError(f"unsupported operator {op!r}")


def eval_data(e, lookup: Callable):
    """Evaluate ``e``; ``lookup`` maps ``DVar``/grounded ``Mu`` leaves to values."""
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, (DVar, Mu)):
        return lookup(e)
    if e.op == "ite":
        c = eval_data(e.args[0], lookup)
        return eval_data(e.args[1] if c else e.args[2], lookup)
    if e.op == "and":
        return all(eval_data(a, lookup) for a in e.args)
    if e.op == "or":
        return any(eval_data(a, lookup) for a in e.args)
    return _apply(e.op, [eval_data(a, lookup) for a in e.args])


def state_lookup(pre, post=None):
    """Leaf lookup for grounded formulas over global states ``{node: {field: v}}``."""

    def lookup(x):
        if isinstance(x, Mu):
            st = post if x.primed else pre
            if st is None:
                raise LogicError("primed atom evaluated without a next state")
            return st[x.node][x.field]
        raise LogicError(f"free data variable {x.name} has no value")

    return lookup


# ---------------------------------------------------------------------------
# printing


def to_sexpr(e, node_str=str):
    """Render in the spec-file formula syntax."""
    if isinstance(e, Lit):
        if isinstance(e.value, bool):
            return "true" if e.value else "false"
        return str(e.value) if e.value >= 0 else f"(- {-e.value})"
    if isinstance(e, DVar):
        return e.name
    if isinstance(e, Mu):
        return f"({'mu' + chr(39) if e.primed else 'mu'} {node_str(e.node)} {e.field})"
    return f"({e.op} {' '.join(to_sexpr(a, node_str) for a in e.args)})"


def to_smt(e):
    """Render a pure (``Mu``-free) formula as SMT-LIB2."""
    if isinstance(e, Lit):
        if isinstance(e.value, bool):
            return "true" if e.value else "false"
        return str(e.value) if e.value >= 0 else f"(- {-e.value})"
    if isinstance(e, DVar):
        return e.name
    if isinstance(e, Mu):
        raise LogicError("mu atom in a formula sent to the solver")
    if e.op not in OPERATORS:
        raise LogicError(f"unsupported operator {e.op!r}")
    if e.op in ("and", "or") and not e.args:
        return "true" if e.op == "and" else "false"
    if e.op in ("and", "or") and len(e.args) == 1:
        return to_smt(e.args[0])
    return f"({e.op} {' '.join(to_smt(a) for a in e.args)})"


def global_state_values(S, fields_of) -> list:
    """Ordered ``(node, field, sort)`` slots of a global state on ``S``."""
    return [(u, f, s) for u in S.universe for f, s in fields_of(u)]
