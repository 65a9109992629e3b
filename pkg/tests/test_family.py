from fractions import Fraction as F

import mpmath
import pytest
from conftest import laminated_a2_family
from oracles import centered_rectangular_cell, polygon_second_moment

from vorlat.catalog import get_lattice
from vorlat.family import (
    CriticalValueCrossed,
    analyze_family,
    analyze_member,
    isotropy_approach,
    minimize_G,
    tensor_decomposition,
    validity_window,
)
from vorlat.lattice import ParameterError, product_optimum


def _half_offset_family():
    return analyze_family(get_lattice("Z1"), [F(1, 2)], F(1), streak=60)


def test_half_offset_family_matches_polygon_integration():
    fam = _half_offset_family()
    U = fam.U()
    for a in (F(1), F(3, 5), F(7, 4), F(9, 10)):
        area, second = polygon_second_moment(centered_rectangular_cell(a))
        assert area == a
        assert U(a) == second
    win = validity_window(fam)
    assert win.v_minus == F(1, 4) and win.v_plus is None


def test_half_offset_family_optimum_is_hexagonal():
    fam = _half_offset_family()
    opt = minimize_G(fam, validity_window(fam))
    assert not opt.boundary and opt.second_derivative_positive
    assert opt.a_opt_float == pytest.approx(3 ** 0.5 / 2, abs=1e-15)
    assert opt.G_opt_float == pytest.approx(5 / (36 * 3 ** 0.5), abs=1e-15)


def test_product_family_matches_closed_form():
    fam = analyze_family(get_lattice("Z1"), [F(0)], F(3, 2), streak=60)
    win = validity_window(fam)
    assert win.v_minus is None and win.v_plus is None
    opt = minimize_G(fam, win)
    a, g = product_optimum(1 / 12, 1.0, 1, 1 / 12, 1.0, 1)
    assert opt.a_opt_float == pytest.approx(a, abs=1e-15)
    assert opt.G_opt_float == pytest.approx(g, abs=1e-15)


def test_cubic_family_beta_vanishes_at_cubic_member():
    # Z^2 x aZ: U = a (2 + a^2) / 12 and the anisotropic part is a (a^2 - 1) / 12
    fam = analyze_family(get_lattice("Z2"), [F(0), F(0)], F(1), streak=60)
    alpha, beta = tensor_decomposition(fam)
    for a in (F(1, 2), F(1), F(3)):
        assert alpha(a) == a / 12
        assert beta(a) == a * (a * a - 1) / 12
    assert beta(F(1)) == 0


def test_laminated_hexagonal_window_and_optimum():
    fam, win = laminated_a2_family()
    assert win.v_minus is None and win.v_plus == F(1, 6)
    assert win.certified_points > 0
    opt = minimize_G(fam, win)
    assert opt.second_derivative_positive
    with mpmath.workdps(30):
        assert abs(opt.a_opt - 1 / (2 * mpmath.sqrt(6))) < mpmath.mpf(10) ** -18
    assert opt.G_opt_float == pytest.approx(0.0785432812, abs=5e-11)
    assert win.contains_v(F(1, 24))


def test_laminated_hexagonal_tensor_decomposition():
    fam, win = laminated_a2_family()
    alpha, beta = tensor_decomposition(fam)
    opt = minimize_G(fam, win)
    # beta = f(a^2) * s / a, so beta vanishes exactly where f does
    f = fam.f_poly()
    for a in fam.samples:
        assert beta(a) == f(a * a) * fam.scale / a
    assert opt.v_interval.polynomial(opt.v_interval.lo) * opt.v_interval.polynomial(opt.v_interval.hi) <= 0
    assert fam.U() == alpha * fam.n + beta


def test_laminated_hexagonal_isotropy_approach():
    fam, win = laminated_a2_family()
    steps = isotropy_approach(fam, minimize_G(fam, win), win, streak=100)
    assert len(steps) == 3
    defects = [d for _, d in steps]
    assert defects[0] > defects[1] > defects[2]


def test_member_analysis_reuses_samples():
    fam, _ = laminated_a2_family()
    a0 = fam.a0
    assert analyze_member(fam, a0) is fam.samples[a0].analysis
    res = analyze_member(fam, F(1, 5) + F(1, 100), streak=100).result
    # the fitted U(a) extends beyond the samples inside the window
    assert fam.U()(F(1, 5) + F(1, 100)) == res.U
    assert float(mpmath.mpf(res.G_decimal)) == pytest.approx(float(fam.G_mp(F(21, 100))), rel=1e-14)


def test_invalid_parameters():
    with pytest.raises(ParameterError):
        analyze_family(get_lattice("Z1"), [F(1, 2)], F(-1))
    with pytest.raises(CriticalValueCrossed):
        # samples straddle the critical value a = 1/2
        analyze_family(get_lattice("Z1"), [F(1, 2)], F(1, 2) + F(1, 1000), spacing=F(1, 500), streak=60)
