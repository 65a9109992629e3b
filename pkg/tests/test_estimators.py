import itertools
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from vorlat.estimators import FamilyOptimizer, VoronoiAnalyzer, check_lattice, check_points, check_rational
from vorlat.lattice import ParameterError


def fitted(name, cache={}):
    if name not in cache:
        cache[name] = VoronoiAnalyzer(streak=200).fit(name)
    return cache[name]


def brute_nearest(b, X, r=3):
    pts = np.array(list(itertools.product(range(-r, r + 1), repeat=b.shape[0]))) @ b
    d = ((X[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
    return pts[np.argmin(d, axis=1)]


@pytest.mark.parametrize("name", ["A2", "A3", "D4"])
def test_predict_matches_brute_force(name):
    est = fitted(name)
    b = est.lattice_.cartesian_float
    X = np.random.default_rng(3).uniform(-1.5, 1.5, size=(400, b.shape[0]))
    got = est.predict(X)
    want = brute_nearest(b, X)
    # ties are measure zero; compare distances to be safe
    assert np.allclose(((X - got) ** 2).sum(1), ((X - want) ** 2).sum(1))


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (8, 3), elements=st.floats(-50, 50)))
def test_errors_lie_in_cell(X):
    est = fitted("A3")
    e = est.transform(X)
    rel = est._rel
    assert np.all(e @ rel.T <= rel.__pow__(2).sum(1) / 2 + 1e-9)


def test_fitted_attributes_and_score():
    est = fitted("A2")
    assert est.n_relevant_ == 6
    assert est.class_counts_ == [1, 1, 1]
    assert est.G_decimal_.startswith("0.0801875373")
    X = np.random.default_rng(0).normal(size=(20000, 2)) * 10
    # mean squared error per dimension is G * Vol^(2/n)
    assert -est.score(X) / float(est.volume_) == pytest.approx(float(est.G_decimal_), rel=0.03)


def test_clone_and_params():
    est = VoronoiAnalyzer(streak=50, seed=4)
    c = clone(est)
    assert c.get_params()["streak"] == 50 and c.get_params()["seed"] == 4
    with pytest.raises(NotFittedError):
        c.predict([[0.0, 0.0]])


def test_input_validation():
    with pytest.raises(ValueError):
        check_points([[1.0, 2.0, 3.0]], 2)
    with pytest.raises(ValueError):
        check_points([[np.nan, 0.0]], 2)
    with pytest.raises(ParameterError):
        check_rational("x", "a0")
    with pytest.raises(ParameterError):
        check_rational("-1/2", "a0", positive=True)
    assert check_rational("3/4", "a0") == F(3, 4)
    with pytest.raises(ParameterError):
        check_lattice([[1, 0]])
    assert check_lattice([["1", "0"], ["1/2", "1/2*sqrt(3)"]]).det_gram == F(3, 4)
    with pytest.raises(KeyError):
        check_lattice("nonexistent")


def test_family_optimizer():
    est = FamilyOptimizer(offset=["1/2"], a0="1", streak=60, dense=8).fit("Z1")
    assert float(est.a_opt_) == pytest.approx(3 ** 0.5 / 2, abs=1e-15)
    g = est.predict([0.8, float(est.a_opt_), 1.0])
    assert g[1] < g[0] and g[1] < g[2]
    assert g[1] == pytest.approx(float(est.G_opt_), abs=1e-15)
    with pytest.raises(ParameterError):
        FamilyOptimizer(offset=["1/2", "0"], a0=1).fit("Z1")
    with pytest.raises(ParameterError):
        FamilyOptimizer(a0=0).fit("Z1")
