from fractions import Fraction as F

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vorlat.exact import (
    DegenerateInputError,
    FieldMismatchError,
    FitMismatchError,
    ParamPolynomial,
    QuadraticNumber,
    exact_compare,
    exact_sqrt,
    format_exact,
    isolate_positive_roots,
    laurent_fit,
    parse_exact,
    to_float,
)

S3 = QuadraticNumber.sqrt(3)
fracs = st.fractions(min_value=-50, max_value=50, max_denominator=60)


def quad(d):
    return st.builds(lambda p, q: QuadraticNumber.make(p, q, d), fracs, fracs)


def test_compare_examples():
    assert exact_compare(F(1), F(2, 3) * S3) < 0
    assert exact_compare(S3 * S3, F(3)) == 0
    assert S3 * S3 == 3
    assert exact_compare(F(797361941, 243243000), F(32780468, 10 ** 7)) > 0


def test_mixed_fields_rejected():
    with pytest.raises(FieldMismatchError):
        S3 + QuadraticNumber.sqrt(2)
    with pytest.raises(FieldMismatchError):
        exact_compare(S3, QuadraticNumber.sqrt(5))


def test_canonical_collapse():
    x = QuadraticNumber.make(F(2), F(0), 3)
    assert isinstance(x, F) and x == 2
    assert QuadraticNumber.make(1, 1, 12) == QuadraticNumber.make(1, 2, 3)


def test_format_parse_roundtrip_examples():
    assert format_exact(F(5, 108) * S3) == "5/108*sqrt(3)"
    assert format_exact(F(-3, 4)) == "-3/4"
    assert format_exact(F(1, 2) - S3 / 6) == "1/2-1/6*sqrt(3)"
    assert parse_exact("1/2+1/6*sqrt(3)") == F(1, 2) + S3 / 6
    assert parse_exact("sqrt(3)") == S3


def test_exact_sqrt():
    assert exact_sqrt(F(9, 4)) == F(3, 2)
    assert exact_sqrt(F(3, 4)) == S3 / 2
    assert exact_sqrt(F(-1)) is None


@given(quad(3), quad(3), quad(3))
def test_field_axioms(a, b, c):
    assert (a + b) + c == a + (b + c)
    assert a * (b + c) == a * b + a * c
    assert (a - b) + b == a


@given(fracs, fracs)
def test_conjugate_product_rational(p, q):
    x = QuadraticNumber.make(p, q, 7)
    y = QuadraticNumber.make(p, -q, 7)
    assert isinstance(x * y, F)
    assert x * y == p * p - 7 * q * q


@given(quad(3), quad(3))
def test_compare_matches_high_precision(a, b):
    with mpmath.workdps(60):
        def ev(x):
            if isinstance(x, F):
                return mpmath.mpf(x.numerator) / x.denominator
            return mpmath.mpf(x.p.numerator) / x.p.denominator + mpmath.mpf(x.q.numerator) / x.q.denominator * mpmath.sqrt(x.d)

        diff = ev(a) - ev(b)
    expect = 0 if a == b else (1 if diff > 0 else -1)
    assert exact_compare(a, b) == expect


@given(quad(3), quad(3))
def test_shadow_fidelity(a, b):
    x = a * b + a
    with mpmath.workdps(100):
        if isinstance(x, F):
            ref = mpmath.mpf(x.numerator) / x.denominator
        else:
            ref = mpmath.mpf(x.p.numerator) / x.p.denominator + mpmath.mpf(x.q.numerator) / x.q.denominator * mpmath.sqrt(3)
        err = abs(to_float(x) - ref)
        assert err <= 1e-12 * max(abs(ref), mpmath.mpf(1e-300)) or err < 1e-290


@given(quad(5))
def test_format_parse_roundtrip(x):
    assert parse_exact(format_exact(x)) == x


def test_isolate_examples():
    r = isolate_positive_roots(ParamPolynomial({2: 1, 0: -2}), (0, 2))
    assert len(r) == 1
    assert abs(float(r[0].refine(F(1, 10 ** 12)).midpoint()) - 2 ** 0.5) < 1e-11
    r = isolate_positive_roots(ParamPolynomial({2: 1, 1: -4, 0: 3}), (0, 2))
    assert len(r) == 1 and r[0].contains(1)
    with pytest.raises(DegenerateInputError):
        isolate_positive_roots(ParamPolynomial({}), (0, 1))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(-6, 6), min_size=2, max_size=9), st.integers(0, 5), st.integers(1, 8))
def test_sturm_counts_match_grid_scan(coeffs, lo, width):
    if all(c == 0 for c in coeffs[1:]):
        return
    p = ParamPolynomial.from_dense([F(c) for c in coeffs])
    hi = lo + width
    got = isolate_positive_roots(p, (lo, hi))
    # brute force: distinct real roots via numpy, restricted to (lo, hi]
    roots = np.roots(list(reversed(coeffs)))
    real = sorted({round(r.real, 6) for r in roots if abs(r.imag) < 1e-7 and lo + 1e-6 < r.real <= hi + 1e-9})
    assert len(got) == len(real)
    for iv, r in zip(got, real):
        assert float(iv.lo) - 1e-6 <= r <= float(iv.hi) + 1e-6
    for a, b in zip(got, got[1:]):
        assert a.hi <= b.lo


def test_laurent_fit_examples():
    g = laurent_fit([(a, F(a) + F(1, a)) for a in (1, 2, 3)], [-1, 1])
    assert g == ParamPolynomial({-1: 1, 1: 1})
    c = laurent_fit([(a, F(7, 3)) for a in (1, 2)], [0])
    assert c == ParamPolynomial({0: F(7, 3)})
    with pytest.raises(FitMismatchError):
        laurent_fit([(1, 1), (2, 2), (3, 5)], [1])


@given(st.lists(fracs, min_size=4, max_size=4))
def test_laurent_fit_recovers_polynomial(coeffs):
    basis = [-1, 1, 3, 5]
    truth = ParamPolynomial(dict(zip(basis, coeffs)))
    pts = [F(k, 7) for k in range(3, 9)]
    assert laurent_fit([(a, truth(a)) for a in pts], basis) == truth


def test_polynomial_calculus():
    p = ParamPolynomial({-1: 2, 3: 5})
    assert p.derivative() == ParamPolynomial({-2: -2, 2: 15})
    assert p.shift(1) == ParamPolynomial({0: 2, 4: 5})
    assert ParamPolynomial({2: 1, 4: 3}).substitute_square() == ParamPolynomial({1: 1, 2: 3})
