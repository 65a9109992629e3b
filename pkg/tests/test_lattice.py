from fractions import Fraction as F

import mpmath
import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from oracles import relevant_vectors_box

from vorlat.catalog import get_lattice, hexagonal, hexagonal_deep_hole, load_generator_file
from vorlat.exact import QuadraticNumber
from vorlat.lattice import (
    Lattice,
    LatticeError,
    ParameterError,
    closest_lattice_points,
    laminate,
    monte_carlo_G,
    product_lattice,
    product_optimum,
    relevant_vectors,
    zador_bound,
)
from vorlat.linalg import ExactMatrix


def rel_set(lat):
    return sorted(tuple(int(x) for x in v) for v in relevant_vectors(lat).vectors)


@pytest.mark.parametrize("name,count", [("Z1", 2), ("Z2", 4), ("Z3", 6), ("A2", 6), ("A3", 12), ("D4", 24), ("A4", 20)])
def test_relevant_counts(name, count):
    assert len(relevant_vectors(get_lattice(name))) == count


@pytest.mark.parametrize("name", ["Z2", "Z3", "A2", "A3", "D4"])
def test_relevant_match_box_oracle(name):
    lat = get_lattice(name)
    assert rel_set(lat) == relevant_vectors_box([list(r) for r in lat.gram.rows], bound=3)


basis_entry = st.integers(-2, 2)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 3).flatmap(lambda n: st.lists(st.lists(basis_entry, min_size=n, max_size=n), min_size=n, max_size=n)))
def test_relevant_random_gram(rows):
    n = len(rows)
    b = np.array(rows) + 3 * np.eye(n, dtype=int)
    assume(round(abs(np.linalg.det(b))) > 0)
    gram = ExactMatrix([[F(int(x)) for x in r] for r in b @ b.T])
    lat = Lattice(gram)
    oracle = relevant_vectors_box([list(r) for r in gram.rows], bound=8)
    # the box must contain every coset minimum with room to spare
    assume(oracle == relevant_vectors_box([list(r) for r in gram.rows], bound=6))
    got = rel_set(lat)
    assert got == oracle
    # Voronoi's bound on the number of relevant vectors
    assert len(got) <= 2 * (2 ** n - 1)


def test_closest_points_tie():
    lat = get_lattice("Z2")
    assert closest_lattice_points(lat, [F(1, 2), F(0)]) == [(0, 0), (1, 0)]
    assert closest_lattice_points(lat, [F(1, 3), F(-2, 3)]) == [(0, -1)]
    assert len(closest_lattice_points(lat, [F(1, 2), F(1, 2)])) == 4


def test_generator_and_volume():
    a2 = hexagonal()
    assert a2.volume == QuadraticNumber.sqrt(3) / 2
    assert a2.det_gram == F(3, 4)
    with pytest.raises(LatticeError):
        Lattice(ExactMatrix([[F(1), F(2)], [F(2), F(1)]]))


def test_laminate_gram():
    lat = laminate(get_lattice("Z1"), [F(1, 2)], F(3, 4))
    assert lat.gram == ExactMatrix([[F(1), F(1, 2)], [F(1, 2), F(1, 4) + F(9, 16)]])
    with pytest.raises(ParameterError):
        laminate(get_lattice("Z1"), [F(1, 2)], F(0))


def test_product_closed_form():
    # Z x aZ: optimum at a = 1 with G = 1/12
    a, g = product_optimum(1 / 12, 1.0, 1, 1 / 12, 1.0, 1)
    assert a == pytest.approx(1.0) and g == pytest.approx(1 / 12)
    po = product_lattice(get_lattice("A2"), get_lattice("Z1"), F(1), G1=0.0801875373874, G2=F(1, 12))
    assert po.lattice.n == 3
    assert po.G_opt == pytest.approx((0.0801875373874 ** 2 / 12) ** (1 / 3))


def test_zador_values():
    assert float(zador_bound(1)) == pytest.approx(1 / 12)
    assert float(zador_bound(2)) == pytest.approx(1 / (4 * float(mpmath.pi)))
    vals = [zador_bound(n) for n in range(1, 25)]
    assert all(x > y for x, y in zip(vals, vals[1:]))


def test_monte_carlo_cubic():
    est = monte_carlo_G(get_lattice("Z3"), samples=200_000, seed=1)
    assert abs(est.G - 1 / 12) < 4 * est.stderr


def test_generator_file(tmp_path):
    p = tmp_path / "hex.json"
    p.write_text('{"d": 3, "name": "hex", "generator": [["1", "0"], ["-1/2", "1/2*sqrt(3)"]]}')
    lat = load_generator_file(str(p))
    assert lat.gram == hexagonal().gram
    p.write_text('{"d": 2, "generator": [["1", "0"], ["-1/2", "1/2*sqrt(3)"]]}')
    with pytest.raises(LatticeError):
        load_generator_file(str(p))


def test_large_denominator_gram():
    # entries beyond int64 products must stay exact
    a = F(90354434940, 442644523201)
    lat = laminate(hexagonal(), list(hexagonal_deep_hole()), a)
    assert lat.gram_int.dtype == object
    small = laminate(hexagonal(), list(hexagonal_deep_hole()), F(1, 5))
    assert rel_set(lat) == rel_set(small)
