"""Explicit-state exploration of boolean programs on one topology.

Used as an oracle: ``explicit_reach`` decides safety of a single instance by
breadth-first search, and ``check_invariant_explicit`` checks the three
invariant conditions by enumerating every global state.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .logic import BOOL, FALSE, LogicError, eval_data
from .program import ConcreteProgram
from .symmetry import closure


class _Space:
    """Global states as tuples of slot values, with grounded formulas compiled
    to evaluation against that layout."""

    def __init__(self, P: ConcreteProgram, limit=22):
        self.P = P
        self.slots = P.slots()
        if any(s != BOOL for _, _, s in self.slots):
            raise LogicError("explicit exploration needs boolean fields")
        if len(self.slots) > limit:
            raise LogicError(f"{len(self.slots)} boolean slots exceed the explicit budget of {limit}")
        self.index = {(u, f): i for i, (u, f, _) in enumerate(self.slots)}
        S = P.structure
        self.local = {v: [self.index[(u, f)] for u in sorted(closure(S, (v,))) for f, _ in P.fields[u]]
                      for v in S.universe if P.is_process(v)}

    def lookup(self, pre, post=None):
        def look(x):
            st = post if x.primed else pre
            return st[self.index[(x.node, x.field)]]
        return look

    def holds(self, phi, pre, post=None) -> bool:
        return bool(eval_data(phi, self.lookup(pre, post)))

    def all_states(self):
        return itertools.product((False, True), repeat=len(self.slots))

    def initial(self):
        inits = [self.P.init[u] for u in self.P.nodes]
        return [s for s in self.all_states() if all(self.holds(i, s) for i in inits)]

    def successors(self, st):
        for v, idx in self.local.items():
            tr = self.P.trans[v]
            for bits in itertools.product((False, True), repeat=len(idx)):
                nxt = list(st)
                for i, b in zip(idx, bits):
                    nxt[i] = b
                nxt = tuple(nxt)
                if self.holds(tr, st, nxt):
                    yield v, nxt

    def render(self, st) -> dict:
        S = self.P.structure
        out = {}
        for (u, f, _), b in zip(self.slots, st):
            out.setdefault(S.names[u], {})[f] = b
        return out


def _error_formulas(P: ConcreteProgram):
    out = []
    for m in P.error_arities() or [1]:
        for w in itertools.product(sorted(P.nodes), repeat=m):
            e = P.error(w)
            if e != FALSE:
                out.append((w, e))
    return out


@dataclass
class ReachResult:
    status: str  # safe | unsafe | bound-exceeded
    states: int
    trace: list = field(default_factory=list)  # [(actor or None, state dict)]
    error_tuple: Optional[tuple] = None

    @property
    def safe(self):
        return self.status == "safe"


def explicit_reach(P: ConcreteProgram, max_states=None, depth=None, limit=22) -> ReachResult:
    """Breadth-first search from all initial states; stops at the first error.

    ``max_states`` bounds the number of distinct states visited and ``depth``
    the number of steps from an initial state; hitting either before the
    fixpoint gives ``bound-exceeded``.
    """
    sp = _Space(P, limit)
    errors = _error_formulas(P)
    parent, dist = {}, {}
    queue = deque()
    for s in sp.initial():
        if s not in parent:
            parent[s], dist[s] = None, 0
            queue.append(s)
    truncated = False
    while queue:
        s = queue.popleft()
        for w, e in errors:
            if sp.holds(e, s):
                return ReachResult("unsafe", len(parent), _trace(sp, parent, s), w)
        if depth is not None and dist[s] >= depth:
            truncated = True
            continue
        for v, t in sp.successors(s):
            if t not in parent:
                if max_states is not None and len(parent) >= max_states:
                    return ReachResult("bound-exceeded", len(parent))
                parent[t], dist[t] = (v, s), dist[s] + 1
                queue.append(t)
    return ReachResult("bound-exceeded" if truncated else "safe", len(parent))


def _trace(sp, parent, s):
    out = []
    while True:
        p = parent[s]
        out.append((None if p is None else sp.P.structure.names[p[0]], sp.render(s)))
        if p is None:
            break
        s = p[1]
    return out[::-1]


@dataclass
class ExplicitReport:
    ok: bool
    condition: str = ""  # init | cont | safe when not ok
    state: Optional[dict] = None
    detail: str = ""


def check_invariant_explicit(inv, P: ConcreteProgram, limit=22) -> ExplicitReport:
    """Init, consecution and safety of ``inv`` on ``P`` by state enumeration."""
    sp = _Space(P, limit)
    S = P.structure
    conjuncts = inv.conjuncts(S)
    errors = _error_formulas(P)
    inits = [P.init[u] for u in P.nodes]
    good = {}

    def phi(s):
        if s not in good:
            good[s] = all(sp.holds(c, s) for c in conjuncts)
        return good[s]

    for s in sp.all_states():
        is_init = all(sp.holds(i, s) for i in inits)
        if is_init and not phi(s):
            return ExplicitReport(False, "init", sp.render(s))
        if not phi(s):
            continue
        for w, e in errors:
            if sp.holds(e, s):
                return ExplicitReport(False, "safe", sp.render(s), f"error at {tuple(S.names[u] for u in w)}")
        for v, t in sp.successors(s):
            if not phi(t):
                return ExplicitReport(False, "cont", sp.render(s), f"step of {S.names[v]} leaves the invariant")
    return ExplicitReport(True)
