import itertools
from fractions import Fraction as F

import pytest
from hypothesis import given
from hypothesis import strategies as st

from vorlat.exact import QuadraticNumber
from vorlat.linalg import ExactMatrix, ExactVector, RankDeficiencyError, determinant, rank_exact, solve, solve_vertex_lift

small = st.fractions(min_value=-9, max_value=9, max_denominator=5)


def square(n):
    return st.lists(st.lists(small, min_size=n, max_size=n), min_size=n, max_size=n)


def leibniz(rows):
    n = len(rows)
    total = F(0)
    for perm in itertools.permutations(range(n)):
        inv = sum(1 for i in range(n) for j in range(i + 1, n) if perm[i] > perm[j])
        term = F(-1) ** inv
        for i in range(n):
            term *= rows[i][perm[i]]
        total += term
    return total


@given(st.integers(1, 4).flatmap(square))
def test_determinant_matches_leibniz(rows):
    assert determinant(ExactMatrix(rows)) == leibniz(rows)


@given(square(3), st.lists(small, min_size=3, max_size=3))
def test_solve_roundtrip(rows, rhs):
    m = ExactMatrix(rows)
    if determinant(m) == 0:
        with pytest.raises(Exception):
            solve(m, rhs)
        return
    x = solve(m, rhs)
    assert [sum(r[j] * x[j] for j in range(3)) for r in rows] == list(rhs)


@given(square(3))
def test_inverse(rows):
    m = ExactMatrix(rows)
    if determinant(m) == 0:
        return
    assert m @ m.inverse() == ExactMatrix.identity(3)


def test_quadratic_entries():
    s3 = QuadraticNumber.sqrt(3)
    a = ExactMatrix([[F(1), F(0)], [F(-1, 2), s3 / 2]])
    assert determinant(a) == s3 / 2
    assert a @ a.inverse() == ExactMatrix.identity(2)


def test_rank_and_vertex_lift():
    vs = [ExactVector([F(1), F(0)]), ExactVector([F(0), F(1)]), ExactVector([F(1), F(1)])]
    assert rank_exact(vs) == 2
    assert rank_exact(vs[:1] + [vs[0] * 2]) == 1
    x = solve_vertex_lift(vs[:2])
    assert list(x) == [F(1, 2), F(1, 2)]
    with pytest.raises(RankDeficiencyError):
        solve_vertex_lift([])
