import pytest

from topoinv.families import FAMILY_NAMES, bintree, family, grid, line, ring, star
from topoinv.logic import LogicError
from topoinv.program import check_modeling_rules
from topoinv.symmetry import closure


def test_line_layout():
    L = line(3)
    assert len(L.universe) == 7
    v2 = L.node("v2")
    assert L.names[L.apply("l", (v2,))] == "s1"
    assert L.names[L.apply("r", (v2,))] == "s2"
    # links are the identity on squares
    s1 = L.node("s1")
    assert L.apply("l", (s1,)) == s1


def test_ring_wraps_around():
    R = ring(3)
    c0 = R.node("c0")
    assert R.names[R.apply("l", (c0,))] == "s2"
    assert R.names[R.apply("r", (c0,))] == "s0"


def test_star_has_one_global():
    S = star(3)
    assert S.apply("g", ()) == 0
    assert not S.holds("isProc", (0,))
    assert all(S.holds("isProc", (u,)) for u in (1, 2, 3))


def test_grid_and_bintree_sizes():
    # 4 circles, 6 horizontal and 6 vertical squares
    assert len(grid(2).universe) == 16
    # 3 circles, 3 squares above them, 4 leaf squares
    assert len(bintree(2).universe) == 10


def test_registry_bounds():
    assert family("line").bounds(1) == [3]
    assert family("ring").bounds(1) == [3, 4]
    assert family("star").bounds(2) == [1, 2]
    assert family("line").extended_bounds(2) == [3, 4, 5, 6, 7]


def test_registry_rejects_unknown_and_out_of_range():
    with pytest.raises(LogicError):
        family("torus")
    with pytest.raises(LogicError):
        family("line").instantiate(2)


@pytest.mark.parametrize("name", FAMILY_NAMES)
def test_every_family_satisfies_modeling_rules(name):
    fam = family(name)
    rep = check_modeling_rules(fam, fam.bounds(1))
    assert rep.ok, rep.violations


@pytest.mark.parametrize("name", FAMILY_NAMES)
def test_instances_are_closed(name):
    fam = family(name)
    for i in fam.bounds(1):
        S = fam.instantiate(i)
        assert closure(S, S.universe) == frozenset(S.universe)
