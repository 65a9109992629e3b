from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vorlat.catalog import get_lattice, hexagonal, hexagonal_deep_hole
from vorlat.family import _offset_coords
from vorlat.lattice import laminate, relevant_vectors
from vorlat.pipeline import default_group
from vorlat.symmetry import (
    ClassifiedVectorIndex,
    InvarianceError,
    MatrixGroup,
    PermutationGroup,
    compose,
    discover_laminated_symmetry,
    inverse,
    set_stabilizer,
    to_permutation_group,
)


def closure(gens, degree):
    """All elements by breadth-first multiplication (tiny groups only)."""
    ident = tuple(range(degree))
    seen = {ident}
    frontier = [ident]
    while frontier:
        nxt = []
        for a in frontier:
            for g in gens:
                c = tuple(int(x) for x in compose(np.array(a), g))
                if c not in seen:
                    seen.add(c)
                    nxt.append(c)
        frontier = nxt
    return seen


def perm_group_of(name):
    lat = get_lattice(name)
    g = default_group(lat)
    to_permutation_group(g, relevant_vectors(lat))
    return g


@pytest.mark.parametrize("name,order", [("Z1", 2), ("Z2", 8), ("Z3", 48), ("Z4", 384), ("A2", 12), ("A3", 48), ("D4", 1152), ("A4", 240)])
def test_group_orders(name, order):
    assert perm_group_of(name).perm.order == order


perms = st.integers(3, 8).flatmap(lambda n: st.lists(st.permutations(list(range(n))), min_size=1, max_size=3))


@settings(max_examples=40, deadline=None)
@given(perms)
def test_order_and_membership_match_closure(gens):
    n = len(gens[0])
    arr = [np.array(g, dtype=np.int32) for g in gens]
    grp = PermutationGroup(n, arr)
    elems = closure(arr, n)
    assert grp.order == len(elems)
    for e in list(elems)[:20]:
        assert grp.contains(np.array(e, dtype=np.int32))
    for p in range(n):
        orb = {e[p] for e in elems}
        assert set(int(x) for x in grp.orbit(p)) == orb
        assert len(orb) * grp.stabilizer(p).order == grp.order


@settings(max_examples=30, deadline=None)
@given(perms, st.data())
def test_set_stabilizer_matches_brute_force(gens, data):
    n = len(gens[0])
    arr = [np.array(g, dtype=np.int32) for g in gens]
    grp = PermutationGroup(n, arr)
    pts = data.draw(st.sets(st.integers(0, n - 1), min_size=1, max_size=n))
    expect = sum(1 for e in closure(arr, n) if {e[p] for p in pts} == pts)
    assert set_stabilizer(grp, sorted(pts)).order == expect


def test_relevant_witness_soundness_and_orbit_stabilizer():
    g = perm_group_of("D4")
    ri = ClassifiedVectorIndex(g.perm)
    for i in range(g.perm.degree):
        w = ri.witness(i)
        assert int(w[ri.representative(i)]) == i
    for cid in range(len(ri)):
        assert int(ri.sizes[cid]) * ri.representative_stabilizer(cid).order == g.perm.order


def test_group_elements_are_lattice_automorphisms():
    g = perm_group_of("A2")
    lat = g.lattice
    gram = np.array([[F(c) for c in r] for r in lat.gram.rows], dtype=object)
    for p in g.perm.elements():
        r = g.matrix_of(p).astype(object)
        assert (r.dot(gram).dot(r.T) == gram).all()


def test_non_symmetry_rejected():
    lat = get_lattice("Z2")
    g = MatrixGroup(lat, [np.array([[1, 1], [0, 1]])])
    with pytest.raises(InvarianceError):
        to_permutation_group(g, relevant_vectors(lat))


def test_inverse_compose():
    a = np.array([2, 0, 1], dtype=np.int32)
    assert list(compose(a, inverse(a))) == [0, 1, 2]


def test_laminated_hexagonal_symmetry():
    base = hexagonal()
    bg = default_group(base)
    to_permutation_group(bg, relevant_vectors(base))
    h = list(hexagonal_deep_hole())
    lat = laminate(base, h, F(1, 5))
    rel = relevant_vectors(lat)
    grp = discover_laminated_symmetry(bg, lat, rel, _offset_coords(base, h))
    # the stabilizer of the deep hole in the hexagonal group (order 6) times the layer flip
    assert grp.perm.order == 12
    gram = np.array([[F(c) for c in r] for r in lat.gram.rows], dtype=object)
    for r in grp.generators:
        r = np.asarray(r, dtype=object)
        assert (r.dot(gram).dot(r.T) == gram).all()


def test_trivial_lamination_of_z1():
    import itertools

    base = get_lattice("Z1")
    bg = default_group(base)
    to_permutation_group(bg, relevant_vectors(base))
    lat = laminate(base, [F(0)], F(1))
    rel = relevant_vectors(lat)
    grp = discover_laminated_symmetry(bg, lat, rel, [F(0)])
    # discovery only sees block elements diag(R, +-1); the coordinate swap is not one
    assert grp.perm.order == 4
    brute = [
        m
        for m in (np.array(e).reshape(2, 2) for e in itertools.product([-1, 0, 1], repeat=4))
        if (m @ m.T == np.eye(2)).all()
    ]
    assert len(brute) == 8
    assert perm_group_of("Z2").perm.order == len(brute)
