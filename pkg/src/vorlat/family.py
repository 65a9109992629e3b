"""One-parameter laminated families: sampling, fitting, windows and the optimum.

The family is ``L(a)`` with generator ``[[B1, 0], [h, a]]``.  With
``s = sqrt(det Gram(B1))`` the second moment is ``U(a) = s * P(a)`` for a
Laurent polynomial ``P`` on odd exponents, fitted exactly from rational
samples.  Writing the Cartesian second-moment tensor as ``alpha I + beta Z``
with ``Z = diag(0, ..., 0, 1)``, differentiating ``U`` along the family gives
``a U' = U + 2 (alpha + beta)``, hence

    beta = (n a U' - (n + 2) U) / (2 (n - 1)),

which is proportional to ``G'(a)``.  ``f(v) = a beta(a)`` with ``v = a**2``
is a polynomial whose smallest root in the window is ``a_opt**2``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import mpmath
import numpy as np

from .exact import (
    FitMismatchError,
    IsolatingInterval,
    ParamPolynomial,
    QuadraticNumber,
    as_exact,
    exact_sqrt,
    format_exact,
    isolate_positive_roots,
    laurent_fit,
    to_mpf,
)
from .lattice import Lattice, ParameterError, laminate, relevant_vectors
from .linalg import ExactMatrix, ExactVector, determinant, solve
from .pipeline import Analysis, analyze_lattice, default_group
from .symmetry import MatrixGroup, discover_laminated_symmetry, to_permutation_group
from .voronoi import _Tester, _independent

__all__ = [
    "FamilyError",
    "CriticalValueCrossed",
    "FamilySample",
    "ParametricFamily",
    "ValidityWindow",
    "OptimizationResult",
    "family_lattice",
    "analyze_family",
    "validity_window",
    "minimize_G",
    "tensor_decomposition",
    "analyze_member",
    "isotropy_approach",
    "laurent_basis",
]

log = logging.getLogger(__name__)


class FamilyError(RuntimeError):
    pass


class CriticalValueCrossed(FamilyError):
    """Samples disagree in class structure: a critical parameter lies between them."""


def laurent_basis(n: int, extra: int = 0) -> List[int]:
    """Exponents ``-1, 1, 3, ..., 2n+1`` (plus ``extra`` further odd ones)."""
    return [-1] + list(range(1, 2 * (n + extra) + 2, 2))


def _offset_coords(base: Lattice, h) -> List[Fraction]:
    """Offset in base-lattice coordinates (``h`` is Cartesian when the base has a generator)."""
    if base.generator is not None:
        u = base.from_cartesian(ExactVector(as_exact(c) for c in h))
        return [Fraction(c) for c in u]
    return [Fraction(as_exact(c)) for c in h]


def family_lattice(base: Lattice, h, a) -> Lattice:
    return laminate(base, h, as_exact(a), name=f"{base.name}-laminated(a={format_exact(as_exact(a))})")


@dataclass
class FamilySample:
    a: Fraction
    analysis: Analysis
    P: Fraction  # U(a) / sqrt(det Gram(B1))
    alpha: object
    beta: object
    isotropy_defect: float


def _tensor_split(analysis: Analysis) -> Tuple[object, object, float]:
    """``(alpha, beta)`` with ``U = alpha I + beta Z`` and the off-form norm."""
    t = analysis.result.tensor
    n = len(t)
    alpha = t[0][0]
    off = 0.0
    ok = True
    for i in range(n):
        for j in range(n):
            want = 0 if i != j else (alpha if i < n - 1 else t[n - 1][n - 1])
            if t[i][j] != want:
                ok = False
                off = max(off, abs(float(t[i][j]) - float(want)))
    if not ok:
        raise FamilyError(f"sampled tensor is not of the form alpha I + beta Z (deviation {off:.3g})")
    beta = t[n - 1][n - 1] - alpha
    mean = (float(alpha) * n + float(beta)) / n
    defect = math.sqrt(sum((float(t[i][i]) - mean) ** 2 for i in range(n))) / abs(mean)
    return alpha, beta, defect


def isotropy_defect(analysis: Analysis) -> float:
    """``|U - (tr U / n) I| / (tr U / n)`` of the Cartesian second-moment tensor."""
    t = analysis.result.tensor
    n = len(t)
    m = np.array([[float(c) for c in row] for row in t])
    mean = np.trace(m) / n
    return float(np.linalg.norm(m - mean * np.eye(n)) / abs(mean))


@dataclass
class ParametricFamily:
    base: Lattice
    offset: List[object]
    offset_coords: List[Fraction]
    a0: Fraction
    samples: Dict[Fraction, FamilySample]
    basis: List[int]
    P: ParamPolynomial  # U(a) / s
    scale: object  # s = sqrt(det Gram(B1))
    structure: Tuple
    alpha: Optional[ParamPolynomial] = None
    beta: Optional[ParamPolynomial] = None

    @property
    def n(self) -> int:
        return self.base.n + 1

    def U(self) -> ParamPolynomial:
        return self.P * self.scale

    def beta_from_U(self) -> ParamPolynomial:
        """``(n a U' - (n+2) U) / (2 (n-1))`` from the fitted scalar moment."""
        n = self.n
        U = self.U()
        return (U.derivative().shift(1) * n - U * (n + 2)) * Fraction(1, 2 * (n - 1))

    def f_poly(self) -> ParamPolynomial:
        """``f(v) = a beta(a)`` in ``v = a**2``, divided by ``s`` so coefficients are rational."""
        n = self.n
        P = self.P
        b = (P.derivative().shift(1) * n - P * (n + 2)) * Fraction(1, 2 * (n - 1))
        return b.shift(1).substitute_square()

    def G_mp(self, a, dps: int = 40):
        """``G(a) = U / (n Vol^(1+2/n))`` with ``Vol = a s``."""
        n = self.n
        with mpmath.workdps(dps):
            a = mpmath.mpf(a) if not isinstance(a, (Fraction, int)) else to_mpf(Fraction(a))
            s = to_mpf(self.scale)
            return self.P.eval_mp(a) * s / (n * (a * s) ** (1 + mpmath.mpf(2) / n))


def _sample_group(base_group: MatrixGroup, lat: Lattice, offset_coords, rel):
    g = discover_laminated_symmetry(base_group, lat, rel, offset_coords)
    return g


def _analyze_at(base, base_group, offset, offset_coords, a, streak, seed, progress) -> Analysis:
    lat = family_lattice(base, offset, a)
    rel = relevant_vectors(lat)
    grp = _sample_group(base_group, lat, offset_coords, rel)
    return analyze_lattice(lat, grp, relevant=rel, streak=streak, seed=seed, parameter=Fraction(a), progress=progress)


def _base_group(base: Lattice) -> MatrixGroup:
    g = default_group(base)
    to_permutation_group(g, relevant_vectors(base))
    return g


def _scale(base: Lattice):
    s = exact_sqrt(Fraction(base.det_gram))
    if s is None:
        raise FamilyError("base lattice volume is not representable exactly")
    return s


def sample_points(a0: Fraction, count: int, spacing: Fraction) -> List[Fraction]:
    """``a0`` first, then alternating ``a0 +- k * spacing``."""
    out = [a0]
    k = 1
    while len(out) < count:
        for sgn in (1, -1):
            if len(out) < count:
                out.append(a0 + sgn * k * spacing)
        k += 1
    return out


def analyze_family(
    base: Lattice,
    offset,
    a0,
    samples: Optional[int] = None,
    spacing=None,
    held_out: int = 2,
    streak: int = 500,
    seed: int = 0,
    progress: Optional[Callable[[str], None]] = None,
) -> ParametricFamily:
    """Exact analyses at rationals around ``a0`` and the fitted ``U(a)``, ``alpha(a)``, ``beta(a)``.

    At least ``n + 3`` samples are used (``len(basis) + held_out``); all must
    share the class structure of the analysis at ``a0``.
    """
    a0 = Fraction(as_exact(a0))
    if a0 <= 0:
        raise ParameterError("a0 must be positive")
    n = base.n + 1
    basis = laurent_basis(n)
    count = max(samples or 0, n + 3, len(basis) + held_out)
    spacing = Fraction(spacing) if spacing is not None else a0 / 1000
    say = progress or (lambda m: None)
    offset_coords = _offset_coords(base, offset)
    base_group = _base_group(base)
    s = _scale(base)
    out: Dict[Fraction, FamilySample] = {}
    structure = None
    for a in sample_points(a0, count, spacing):
        if a <= 0:
            raise ParameterError("sample spacing reaches a <= 0")
        an = _analyze_at(base, base_group, offset, offset_coords, a, streak, seed, None)
        st = an.class_structure()
        if structure is None:
            structure = st
        elif st != structure:
            raise CriticalValueCrossed(f"class structure at a={a} differs from a0={a0}")
        # U = sqrt(det Gram) * chart trace and sqrt(det Gram(a)) = a * s
        P = a * an.result.chart_trace
        alpha, beta, defect = _tensor_split(an) if an.result.tensor_cartesian else (None, None, float("nan"))
        out[a] = FamilySample(a, an, P, alpha, beta, defect)
        say(f"sample a={a}: G={an.result.G_decimal[:14]} classes={an.hierarchy.total_classes}")
    pts = list(out)
    try:
        P = laurent_fit([(a, out[a].P) for a in pts], basis)
    except FitMismatchError:
        basis = laurent_basis(n, extra=2)
        extra = [a for a in sample_points(a0, count + 2, spacing) if a not in out]
        for a in extra:
            an = _analyze_at(base, base_group, offset, offset_coords, a, streak, seed, None)
            if an.class_structure() != structure:
                raise CriticalValueCrossed(f"class structure at a={a} differs from a0={a0}")
            alpha, beta, defect = _tensor_split(an) if an.result.tensor_cartesian else (None, None, float("nan"))
            out[a] = FamilySample(a, an, a * an.result.chart_trace, alpha, beta, defect)
        pts = list(out)
        P = laurent_fit([(a, out[a].P) for a in pts], basis)
    fam = ParametricFamily(base, list(offset), offset_coords, a0, out, basis, P, s, structure)
    if all(smp.alpha is not None for smp in out.values()):
        fam.alpha = laurent_fit([(a, out[a].alpha) for a in pts], basis)
        fam.beta = laurent_fit([(a, out[a].beta) for a in pts], basis)
    return fam


# ---------------------------------------------------------------------------
# validity window
# ---------------------------------------------------------------------------


@dataclass
class ValidityWindow:
    """``a`` range with unchanged combinatorics; bounds as ``v = a**2`` roots.

    ``v_minus``/``v_plus`` are exact rationals when the bounding root is
    rational, else isolating intervals; ``None`` means unbounded (0 or
    infinity).
    """

    v_minus: object
    v_plus: object
    certified_points: int = 0

    @staticmethod
    def _a(v):
        if v is None:
            return None
        if isinstance(v, IsolatingInterval):
            return v
        return exact_sqrt(v)

    @property
    def a_minus(self):
        return self._a(self.v_minus)

    @property
    def a_plus(self):
        return self._a(self.v_plus)

    def _v_lo(self) -> Fraction:
        if self.v_minus is None:
            return Fraction(0)
        return self.v_minus.hi if isinstance(self.v_minus, IsolatingInterval) else Fraction(self.v_minus)

    def _v_hi(self) -> Optional[Fraction]:
        if self.v_plus is None:
            return None
        return self.v_plus.lo if isinstance(self.v_plus, IsolatingInterval) else Fraction(self.v_plus)

    def contains_v(self, v) -> bool:
        hi = self._v_hi()
        return self._v_lo() < v and (hi is None or v < hi)

    def float_bounds(self) -> Tuple[float, float]:
        def f(x, default):
            if x is None:
                return default
            if isinstance(x, IsolatingInterval):
                return math.sqrt(float(x.midpoint()))
            return math.sqrt(float(x))

        return f(self.v_minus, 0.0), f(self.v_plus, math.inf)

    def describe(self) -> Dict[str, object]:
        def s(v, a):
            if v is None:
                return None
            if isinstance(v, IsolatingInterval):
                return {"v_interval": [format_exact(v.lo), format_exact(v.hi)], "a_decimal": mpmath.nstr(mpmath.sqrt(v.to_mpf(30)), 20)}
            return {"v": format_exact(v), "a": format_exact(a), "a_decimal": mpmath.nstr(mpmath.sqrt(to_mpf(v)), 20)}

        return {"lower": s(self.v_minus, self.a_minus), "upper": s(self.v_plus, self.a_plus), "certified_points": self.certified_points}


def _interpolate(xs: Sequence[Fraction], ys: Sequence[Fraction], degree: int) -> ParamPolynomial:
    return laurent_fit(list(zip(xs, ys)), list(range(degree + 1)))


def _gram_at(fam: ParametricFamily, v: Fraction) -> Lattice:
    """Gram-only lattice of the family at ``a**2 = v`` (only the last diagonal entry moves)."""
    g = fam.samples[fam.a0].analysis.lattice.gram
    rows = [list(r.components) for r in g.rows]
    rows[-1][-1] = rows[-1][-1] + (v - fam.a0 ** 2)
    return Lattice(ExactMatrix(rows), name="family-gram")


def _slack_polynomials(fam: ParametricFamily) -> List[ParamPolynomial]:
    """For every representative vertex and relevant vector: ``D(v) * slack(v)`` as a polynomial in ``v = a**2``.

    The vertex solves its ``n`` pinned bisector equations, whose matrix and
    right-hand side are linear in ``v``; with ``D`` the determinant these
    products have degree at most ``n + 1`` and are interpolated exactly
    (with held-out checks).  Tight normals must vanish identically.
    """
    an = fam.samples[fam.a0].analysis
    vi = an.vertices
    rel = an.relevant
    n = fam.n
    deg = n + 1
    v0 = fam.a0 ** 2
    vs = [v0 * (1 + Fraction(k, 97)) for k in range(1, deg + 4)]
    reps = [vi.incidence(vi.representative(c)) for c in range(vi.n_classes)]
    pins = [_independent(rel.vectors, r, n) for r in reps]
    values = [[[] for _ in range(len(rel))] for _ in reps]
    dets: List[List[Fraction]] = [[] for _ in reps]
    for v in vs:
        lat = _gram_at(fam, v)
        tester = _Tester(lat, rel)
        g = lat.gram
        for ci, pin in enumerate(pins):
            m = ExactMatrix([[2 * c for c in g.vecmul(rel.exact(i))] for i in pin])
            dm = determinant(m)
            u = solve(m, [rel.exact(i).norm2(g) for i in pin])
            sl, q = tester.slack(list(u))
            dets[ci].append(dm)
            den = q * lat.gram_scale
            for j in range(len(rel)):
                values[ci][j].append(dm * Fraction(int(sl[j]), den))
    out = []
    for ci in range(len(reps)):
        out.append(_interpolate(vs, dets[ci], deg))
        tight = set(int(x) for x in reps[ci])
        for j in range(len(rel)):
            p = _interpolate(vs, values[ci][j], deg)
            if j in tight:
                if not p.is_zero():
                    raise FamilyError("a tight normal does not stay tight: a0 is a critical value")
                continue
            out.append(p)
    return out


def _root_value(iv: IsolatingInterval):
    """Exact rational root inside ``iv`` when there is one, else a narrowed interval; plus a decimal."""
    narrow = iv.refine(Fraction(1, 10 ** 30))
    p = iv.polynomial
    for k in (1, 2, 3, 4, 6, 9, 12):
        cand = narrow.midpoint().limit_denominator(10 ** k)
        if iv.lo < cand < iv.hi and p(cand) == 0:
            return cand, to_mpf(cand)
    return narrow, to_mpf(narrow.midpoint())


def validity_window(
    fam: ParametricFamily,
    dense: int = 64,
    check_relevant: bool = True,
    search_factor: int = 64,
    progress: Optional[Callable[[str], None]] = None,
) -> ValidityWindow:
    """Window around ``a0`` where no representative vertex meets a new bisector.

    Bounds are the nearest roots (in ``v = a**2``) of the slack polynomials
    of all representative vertices against all relevant vectors and of their
    pinning determinants; roots beyond ``search_factor * a0**2`` count as
    unbounded.  Inside, the relevant-vector set is then compared with the
    one at ``a0`` at ``dense`` rationals.
    """
    v0 = fam.a0 ** 2
    lower = (None, mpmath.mpf(0))
    upper = (None, mpmath.inf)
    with mpmath.workdps(40):
        dv0 = to_mpf(v0)
        for p in _slack_polynomials(fam):
            if p.is_zero():
                continue
            if p(v0) == 0:
                raise FamilyError("a0 lies on a critical value")
            for iv in isolate_positive_roots(p, (Fraction(0), v0 * search_factor)):
                root, dec = _root_value(iv)
                if dec < dv0 and dec > lower[1]:
                    lower = (root, dec)
                elif dec > dv0 and dec < upper[1]:
                    upper = (root, dec)
    win = ValidityWindow(lower[0], upper[0])
    if check_relevant:
        win.certified_points = _certify_relevant(fam, win, dense, search_factor, progress)
    return win


def _certify_relevant(fam: ParametricFamily, win: ValidityWindow, dense: int, search_factor: int, progress) -> int:
    ref = fam.samples[fam.a0].analysis.relevant
    lo = win._v_lo()
    hi = win._v_hi()
    hi = hi if hi is not None else fam.a0 ** 2 * search_factor
    pts = []
    for k in range(1, dense + 1):
        v = lo + (hi - lo) * Fraction(k, dense + 1)
        pts.append(v)
    checked = 0
    for v in pts:
        a = Fraction(math.sqrt(float(v))).limit_denominator(10 ** 6)
        if not win.contains_v(a * a):
            continue
        rel = relevant_vectors(family_lattice(fam.base, fam.offset, a))
        if not np.array_equal(rel.vectors, ref.vectors):
            raise FamilyError(f"relevant vectors change inside the window at a={a}")
        checked += 1
        if progress:
            progress(f"window check a={a}")
    return checked


# ---------------------------------------------------------------------------
# optimum and tensor structure
# ---------------------------------------------------------------------------


@dataclass
class OptimizationResult:
    v_interval: Optional[IsolatingInterval]
    a_opt: object  # mpf
    G_opt: object  # mpf
    boundary: bool
    f: ParamPolynomial
    second_derivative_positive: Optional[bool] = None
    digits: int = 20

    @property
    def a_opt_float(self) -> float:
        return float(self.a_opt)

    @property
    def G_opt_float(self) -> float:
        return float(self.G_opt)

    def describe(self) -> Dict[str, object]:
        return {
            "a_opt": mpmath.nstr(self.a_opt, self.digits),
            "G_opt": mpmath.nstr(self.G_opt, self.digits),
            "boundary_minimum": self.boundary,
            "v_interval": None if self.v_interval is None else [format_exact(self.v_interval.lo), format_exact(self.v_interval.hi)],
            "f": self.f.to_json(),
            "second_derivative_positive": self.second_derivative_positive,
        }


def minimize_G(fam: ParametricFamily, window: ValidityWindow, digits: int = 20) -> OptimizationResult:
    """Smallest root of ``f`` inside the window, refined to ``digits``; else the better endpoint."""
    f = fam.f_poly()
    lo = window._v_lo()
    hi = window._v_hi()
    hi_search = hi if hi is not None else fam.a0 ** 2 * 64
    roots = isolate_positive_roots(f, (lo, hi_search)) if not f.is_zero() else []
    roots = [r for r in roots if r.lo >= lo and (hi is None or r.hi <= hi)]
    dps = digits + 15
    if roots:
        iv = roots[0].refine(Fraction(1, 10 ** (digits + 5)))
        with mpmath.workdps(dps):
            v = iv.to_mpf(digits + 5)
            a = mpmath.sqrt(v)
            G = fam.G_mp(a, dps)
            eps = mpmath.mpf(10) ** (-(digits // 2))
            second = fam.G_mp(a + eps, dps) + fam.G_mp(a - eps, dps) - 2 * G
        return OptimizationResult(iv, a, G, False, f, bool(second > 0), digits)
    cands = []
    for v in (lo, hi):
        if v is None or v == 0:
            continue
        with mpmath.workdps(dps):
            a = mpmath.sqrt(to_mpf(v))
            cands.append((fam.G_mp(a, dps), a))
    if not cands:
        raise FamilyError("no stationary point and no finite window endpoint")
    G, a = min(cands)
    return OptimizationResult(None, a, G, True, f, None, digits)


def tensor_decomposition(fam: ParametricFamily) -> Tuple[ParamPolynomial, ParamPolynomial]:
    """Fitted ``alpha(a)``, ``beta(a)``; checks ``beta = f(a**2) s / a`` and the trace identity."""
    if fam.alpha is None or fam.beta is None:
        raise FamilyError("samples carry no Cartesian tensors")
    for a, smp in fam.samples.items():
        if fam.alpha(a) != smp.alpha or fam.beta(a) != smp.beta:
            raise FamilyError(f"fitted alpha/beta miss the sample at a={a}")
    n = fam.n
    if fam.alpha * n + fam.beta != fam.U():
        raise FamilyError("n alpha + beta differs from the fitted U")
    if fam.beta != fam.beta_from_U():
        raise FamilyError("beta differs from (n a U' - (n+2) U) / (2 (n-1))")
    return fam.alpha, fam.beta


def analyze_member(fam: ParametricFamily, a, streak: int = 500, seed: int = 0) -> Analysis:
    """Exact analysis of the family lattice at one rational ``a``."""
    a = Fraction(as_exact(a))
    if a in fam.samples:
        return fam.samples[a].analysis
    return _analyze_at(fam.base, _base_group(fam.base), fam.offset, fam.offset_coords, a, streak, seed, None)


def isotropy_approach(
    fam: ParametricFamily, opt: OptimizationResult, window: ValidityWindow, steps: int = 3, streak: int = 500
) -> List[Tuple[Fraction, float]]:
    """Isotropy defects at ``steps`` successively closer rational approximants of ``a_opt``.

    Approximants are best rationals with denominators bounded by growing
    powers of ten, skipping repeats and points outside the window.
    """
    target = Fraction(mpmath.nstr(opt.a_opt, 30))
    out: List[Tuple[Fraction, float]] = []
    k = 1
    while len(out) < steps and k < 30:
        a = target.limit_denominator(10 ** k)
        k += 1
        if (out and a == out[-1][0]) or not window.contains_v(a * a):
            continue
        out.append((a, isotropy_defect(analyze_member(fam, a, streak=streak))))
    return out

