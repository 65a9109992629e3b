from fractions import Fraction as F

import numpy as np
import pytest
from conftest import analysis_of, naive_of
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from vorlat.lattice import Lattice
from vorlat.linalg import ExactMatrix
from vorlat.pipeline import analyze_lattice
from vorlat.voronoi import VoronoiError, face_dimension, fingerprint, vertices_from_representatives

SMALL = ["Z2", "Z3", "A2", "A3", "D4"]


def vertex_coords(an):
    vi = an.vertices
    return {tuple(vi.coords(v)): v for v in range(len(vi))}


@pytest.mark.parametrize("name", SMALL)
def test_vertex_sets_match_naive(name):
    an, naive = analysis_of(name), naive_of(name)
    assert sorted(vertex_coords(an)) == sorted(naive.vertices)


@pytest.mark.parametrize("name", SMALL + ["A4", "Z4"])
def test_vertex_inequalities_exact(name):
    an = analysis_of(name)
    vi = an.vertices
    for v in range(len(vi)):
        s, _ = vi.tester.slack(list(vi.coords(v)))
        assert all(x >= 0 for x in s)
        tight = np.nonzero(np.array([x == 0 for x in s]))[0]
        assert np.array_equal(np.sort(tight), np.sort(vi.incidence(v)))


def naive_class_counts(an, naive):
    """Orbits of the oracle's faces under the full group, by brute force over group elements."""
    vid = vertex_coords(an)
    ids = [vid[tuple(c)] for c in naive.vertices]
    elems = list(an.perm.elements())
    counts = []
    for d in range(naive.n + 1):
        seen = set()
        classes = 0
        for face in naive.faces[d]:
            key = tuple(sorted(ids[i] for i in face))
            if key in seen:
                continue
            classes += 1
            for g in elems:
                seen.add(tuple(sorted(int(x) for x in an.vertices.act_many(g, np.array(key)))))
        counts.append(classes)
    return counts


@pytest.mark.parametrize("name", SMALL)
def test_class_counts_match_naive_orbits(name):
    an, naive = analysis_of(name), naive_of(name)
    assert an.hierarchy.class_counts() == naive_class_counts(an, naive)


@pytest.mark.parametrize("name", SMALL + ["A4"])
def test_equivalences_sound(name):
    an = analysis_of(name)
    h, vi = an.hierarchy, an.vertices
    for d in range(h.n):
        for f in h.levels[d]:
            rep, g = f.root()
            assert face_dimension(f.verts, vi, exact=True) == d
            if rep is f:
                continue
            assert fingerprint(f, vi) == fingerprint(rep, vi)
            assert np.array_equal(np.sort(vi.act_many(g, rep.verts)), np.sort(f.verts))


@pytest.mark.parametrize("name", ["A3", "D4"])
def test_children_complete(name):
    h = analysis_of(name).hierarchy
    assert all(h.check_children_complete(d) for d in range(1, h.n))


def test_rebuild_from_representatives():
    an = analysis_of("A3")
    vi = an.vertices
    reps = [list(vi.coords(vi.representative(c))) for c in range(vi.n_classes)]
    again = vertices_from_representatives(an.lattice, an.group, an.rel_index, reps)
    assert len(again) == len(vi)
    with pytest.raises(VoronoiError):
        vertices_from_representatives(an.lattice, an.group, an.rel_index, reps[:1])
    with pytest.raises(VoronoiError):
        bad = [list(r) for r in reps]
        bad[0][0] += F(1, 7)
        vertices_from_representatives(an.lattice, an.group, an.rel_index, bad)


def test_discovery_order_independent():
    a = analyze_lattice(analysis_of("D4").lattice, streak=150, seed=11, check_float=False)
    b = analysis_of("D4")
    assert [tuple(a.vertices.coords(a.vertices.representative(c))) for c in range(a.vertices.n_classes)] == [
        tuple(b.vertices.coords(b.vertices.representative(c))) for c in range(b.vertices.n_classes)
    ]


entries = st.integers(-1, 1)


@settings(max_examples=8, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(2, 3).flatmap(lambda n: st.lists(st.lists(entries, min_size=n, max_size=n), min_size=n, max_size=n)))
def test_random_lattices_match_naive(rows):
    from oracles import NaiveCell

    n = len(rows)
    b = np.array(rows) + 2 * np.eye(n, dtype=int)
    if round(abs(np.linalg.det(b))) == 0:
        return
    gram = [[F(int(x)) for x in r] for r in b @ b.T]
    naive = NaiveCell(gram, bound=4)
    an = analyze_lattice(Lattice(ExactMatrix(gram)), streak=60, check_float=False)
    assert sorted(vertex_coords(an)) == sorted(naive.vertices)
    vol, second = naive.moments()
    assert vol == 1
    assert an.result.chart_trace == second


@pytest.mark.parametrize(
    "name,vertices",
    [
        # A_n: one vertex per proper nonempty subset of the n + 1 coordinates
        ("A6", 2 ** 7 - 2),
        # D_n (n >= 5): deep holes (+-1/2)^n and shallow holes +-e_i
        ("D7", 2 ** 7 + 2 * 7),
    ],
)
def test_vertex_search_complete_on_degenerate_cells(name, vertices):
    from vorlat.catalog import get_lattice

    an = analyze_lattice(get_lattice(name), streak=30)
    assert len(an.vertices) == vertices
    assert an.result.certificate


def test_random_phase_alone_still_sound():
    from vorlat.lattice import relevant_vectors
    from vorlat.pipeline import default_group
    from vorlat.symmetry import ClassifiedVectorIndex, to_permutation_group
    from vorlat.voronoi import find_vertices

    an = analysis_of("A3")
    g = default_group(an.lattice)
    to_permutation_group(g, relevant_vectors(an.lattice))
    vi = find_vertices(an.lattice, g, ClassifiedVectorIndex(g.perm), streak=200, edge_limit=0)
    assert len(vi) == len(an.vertices)
