"""Built-in topology families.

Process nodes carry the ``isProc`` predicate.  Unary "link" functions such as
``l`` and ``r`` map process nodes to the resource nodes they touch and are the
identity on resource nodes, so every function table is total.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from .logic import LogicError, Structure, Vocabulary

PROC = "isProc"


@dataclass
class FamilyDescriptor:
    name: str
    vocab: Vocabulary
    generator: Callable[[int], Structure]
    min_index: int = 1
    max_index: Optional[int] = None
    default_bounds: Callable[[int], list] = None
    bound_overrides: dict = field(default_factory=dict)
    proc_predicate: str = PROC
    _cache: dict = field(default_factory=dict, repr=False)

    def instantiate(self, index) -> Structure:
        if index < self.min_index or (self.max_index is not None and index > self.max_index):
            hi = "inf" if self.max_index is None else self.max_index
            raise LogicError(f"{self.name}: index {index} outside [{self.min_index}, {hi}]")
        if index not in self._cache:
            self._cache[index] = self.generator(index)
        return self._cache[index]

    def bounds(self, k) -> list:
        """Instance indices claimed to realise every k-type of the family."""
        if k in self.bound_overrides:
            return list(self.bound_overrides[k])
        if self.default_bounds is None:
            return []
        return [i for i in self.default_bounds(k) if i >= self.min_index
                and (self.max_index is None or i <= self.max_index)]

    def extended_bounds(self, k, extra=2) -> list:
        """The declared bound plus ``extra`` larger instances (stability check)."""
        base = self.bounds(k)
        top = max(base)
        more = [top + j for j in range(1, extra + 1)
                if self.max_index is None or top + j <= self.max_index]
        return base + more

    def is_proc(self, S, u) -> bool:
        return self.vocab.is_predicate(self.proc_predicate) and S.holds(self.proc_predicate, (u,))

    def with_bounds(self, overrides: dict, min_index=None):
        return FamilyDescriptor(
            self.name, self.vocab, self.generator,
            self.min_index if min_index is None else min_index,
            self.max_index, self.default_bounds, {**self.bound_overrides, **overrides},
            self.proc_predicate,
        )


def _unary_link_tables(universe, links: dict):
    """Extend partial unary maps with the identity."""
    return {f: {(u,): m.get(u, u) for u in universe} for f, m in links.items()}


# --- line ---------------------------------------------------------------

LINE_VOCAB = Vocabulary(functions=(("l", 1), ("r", 1), ("b", 0), ("e", 0)), predicates=((PROC, 1),))
LINE_HUB_VOCAB = Vocabulary(
    functions=(("l", 1), ("r", 1), ("b", 0), ("e", 0), ("h", 0)), predicates=((PROC, 1),)
)


def line(n, hub=False) -> Structure:
    """n circles v1..vn between n+1 squares s0..sn; square s_i has id 2i, v_i has 2i-1."""
    if n < 1:
        raise LogicError("line needs at least one circle")
    squares = [2 * i for i in range(n + 1)]
    circles = [2 * i - 1 for i in range(1, n + 1)]
    universe = squares + circles
    names = {2 * i: f"s{i}" for i in range(n + 1)}
    names.update({2 * i - 1: f"v{i}" for i in range(1, n + 1)})
    fns = _unary_link_tables(universe + ([2 * n + 1] if hub else []), {
        "l": {c: c - 1 for c in circles},
        "r": {c: c + 1 for c in circles},
    })
    fns["b"] = {(): 0}
    fns["e"] = {(): 2 * n}
    vocab = LINE_VOCAB
    if hub:
        universe.append(2 * n + 1)
        names[2 * n + 1] = "h"
        fns["h"] = {(): 2 * n + 1}
        vocab = LINE_HUB_VOCAB
    return Structure(vocab, universe, fns, {PROC: {(c,) for c in circles}}, names)


# --- ring ---------------------------------------------------------------

RING_VOCAB = Vocabulary(functions=(("l", 1), ("r", 1)), predicates=((PROC, 1),))
RING_START_VOCAB = Vocabulary(functions=(("l", 1), ("r", 1)), predicates=((PROC, 1), ("start", 1)))


def ring(n, start=False) -> Structure:
    """n circles c0..c(n-1) alternating with squares s0..s(n-1).

    ``l(c_i) = s_(i-1 mod n)`` and ``r(c_i) = s_i``; with ``start`` the
    square s0 carries the ``start`` predicate.
    """
    if n < 1:
        raise LogicError("ring needs at least one circle")
    circles = [2 * i + 1 for i in range(n)]
    squares = [2 * i for i in range(n)]
    names = {2 * i: f"s{i}" for i in range(n)}
    names.update({2 * i + 1: f"c{i}" for i in range(n)})
    fns = _unary_link_tables(squares + circles, {
        "l": {2 * i + 1: 2 * ((i - 1) % n) for i in range(n)},
        "r": {2 * i + 1: 2 * i for i in range(n)},
    })
    preds = {PROC: {(c,) for c in circles}}
    vocab = RING_VOCAB
    if start:
        preds["start"] = {(0,)}
        vocab = RING_START_VOCAB
    return Structure(vocab, squares + circles, fns, preds, names)


# --- star ---------------------------------------------------------------

STAR_VOCAB = Vocabulary(functions=(("g", 0),), predicates=((PROC, 1),))


def star(n) -> Structure:
    """Universe {0..n}; the constant g is node 0, the other nodes are processes."""
    if n < 0:
        raise LogicError("star index must be >= 0")
    universe = list(range(n + 1))
    return Structure(STAR_VOCAB, universe, {"g": {(): 0}},
                     {PROC: {(i,) for i in range(1, n + 1)}}, {i: str(i) for i in universe})


# --- grid ---------------------------------------------------------------

GRID_VOCAB = Vocabulary(
    functions=(("l", 1), ("r", 1), ("u", 1), ("d", 1)), predicates=((PROC, 1), ("edge", 1))
)


def grid(n) -> Structure:
    """n x n circles; every pair of adjacent circles shares a square, and each
    boundary side of a circle has its own square marked ``edge``."""
    if n < 1:
        raise LogicError("grid needs n >= 1")
    ids = {}
    names = {}

    def node(key, name):
        if key not in ids:
            ids[key] = len(ids)
            names[ids[key]] = name
        return ids[key]

    links = {"l": {}, "r": {}, "u": {}, "d": {}}
    edge = set()
    for i in range(n):
        for j in range(n):
            c = node(("c", i, j), f"c{i}_{j}")
            # horizontal square between (i, j-1) and (i, j) is ("h", i, j)
            hl = node(("h", i, j), f"h{i}_{j}")
            hr = node(("h", i, j + 1), f"h{i}_{j + 1}")
            vu = node(("v", i, j), f"w{i}_{j}")
            vd = node(("v", i + 1, j), f"w{i + 1}_{j}")
            links["l"][c], links["r"][c], links["u"][c], links["d"][c] = hl, hr, vu, vd
    for (kind, a, b), u in ids.items():
        if (kind == "h" and b in (0, n)) or (kind == "v" and a in (0, n)):
            edge.add((u,))
    circles = {ids[key] for key in ids if key[0] == "c"}
    universe = list(ids.values())
    return Structure(GRID_VOCAB, universe, _unary_link_tables(universe, links),
                     {PROC: {(c,) for c in circles}, "edge": edge}, names)


# --- trees --------------------------------------------------------------

BDTREE_VOCAB = Vocabulary(functions=(("p", 1),), predicates=((PROC, 1),))


def bdtree(n) -> Structure:
    """Depth-2 tree: a root, n middle nodes and n leaves under each; ``p`` is the
    parent function (the root is its own parent).  Every node is a process."""
    if n < 1:
        raise LogicError("bdtree needs n >= 1")
    universe = [0]
    names = {0: "root"}
    parent = {0: 0}
    nxt = 1
    for i in range(n):
        m = nxt
        nxt += 1
        universe.append(m)
        names[m] = f"m{i}"
        parent[m] = 0
        for j in range(n):
            universe.append(nxt)
            names[nxt] = f"l{i}_{j}"
            parent[nxt] = m
            nxt += 1
    return Structure(BDTREE_VOCAB, universe, {"p": {(u,): parent[u] for u in universe}},
                     {PROC: {(u,) for u in universe}}, names)


BINTREE_VOCAB = Vocabulary(
    functions=(("up", 1), ("dl", 1), ("dr", 1)), predicates=((PROC, 1), ("top", 1), ("bottom", 1))
)


def bintree(depth) -> Structure:
    """Complete binary tree of circles with ``depth`` levels.  Each circle links
    to the square above it (``up``) and the squares to its children (``dl``,
    ``dr``); the root's upper square is ``top`` and leaf squares are ``bottom``."""
    if depth < 1:
        raise LogicError("bintree needs depth >= 1")
    ncirc = 2 ** depth - 1
    circles = list(range(ncirc))  # heap order
    names = {c: f"c{c}" for c in circles}
    # square above circle c has id ncirc + c; leaf child squares follow
    up = {c: ncirc + c for c in circles}
    names.update({ncirc + c: f"s{c}" for c in circles})
    dl, dr = {}, {}
    extra = 2 * ncirc
    bottom = set()
    for c in circles:
        for side, table in ((1, dl), (2, dr)):
            child = 2 * c + side
            if child < ncirc:
                table[c] = up[child]
            else:
                table[c] = extra
                names[extra] = f"t{c}_{side}"
                bottom.add((extra,))
                extra += 1
    universe = list(range(extra))
    return Structure(BINTREE_VOCAB, universe,
                     _unary_link_tables(universe, {"up": up, "dl": dl, "dr": dr}),
                     {PROC: {(c,) for c in circles}, "top": {(ncirc,)}, "bottom": bottom}, names)


# --- registry -----------------------------------------------------------


def _builtin():
    return {
        # lines with at least three circles, as in the running pipeline example
        "line": FamilyDescriptor("line", LINE_VOCAB, line, 3, None,
                                 lambda k: list(range(3, 2 * k + 2))),
        "line-hub": FamilyDescriptor("line-hub", LINE_HUB_VOCAB, lambda n: line(n, hub=True), 3, None,
                                     lambda k: list(range(3, 2 * k + 2))),
        "ring": FamilyDescriptor("ring", RING_VOCAB, ring, 3, None,
                                 lambda k: list(range(3, 2 * k + 3))),
        "ring-start": FamilyDescriptor("ring-start", RING_START_VOCAB, lambda n: ring(n, start=True),
                                       3, None, lambda k: list(range(3, 2 * k + 3))),
        "star": FamilyDescriptor("star", STAR_VOCAB, star, 1, None,
                                 lambda k: list(range(1, max(2, k) + 1))),
        "grid": FamilyDescriptor("grid", GRID_VOCAB, grid, 2, None,
                                 lambda k: list(range(2, 2 * k + 2))),
        "bdtree": FamilyDescriptor("bdtree", BDTREE_VOCAB, bdtree, 1, None,
                                   lambda k: list(range(1, k + 2))),
        "bintree": FamilyDescriptor("bintree", BINTREE_VOCAB, bintree, 1, None,
                                    lambda k: list(range(1, k + 3))),
    }


def family(name, **kw) -> FamilyDescriptor:
    fams = _builtin()
    if name not in fams:
        raise LogicError(f"unknown family {name!r}; known: {', '.join(sorted(fams))}")
    fam = fams[name]
    if kw:
        fam = fam.with_bounds(kw.get("bounds", {}), kw.get("min_index"))
    return fam


FAMILY_NAMES = tuple(sorted(_builtin()))
