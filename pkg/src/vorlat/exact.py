"""Exact scalars over Q and Q(sqrt d), Laurent polynomials and real-root isolation.

Rationals are plain :class:`fractions.Fraction` values.  Numbers of the form
``p + q*sqrt(d)`` are :class:`QuadraticNumber`; they collapse back to a
``Fraction`` whenever ``q == 0`` so callers never see a redundant radical.
"""

from __future__ import annotations

import math
import re
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import mpmath

__all__ = [
    "ExactScalar",
    "FieldMismatchError",
    "DegenerateInputError",
    "FitMismatchError",
    "QuadraticNumber",
    "as_exact",
    "exact_sign",
    "exact_compare",
    "exact_sqrt",
    "field_of",
    "to_float",
    "to_mpf",
    "format_exact",
    "parse_exact",
    "squarefree_decompose",
    "ParamPolynomial",
    "IsolatingInterval",
    "isolate_positive_roots",
    "laurent_fit",
]


class FieldMismatchError(ValueError):
    """Two quadratic numbers live in different extensions Q(sqrt d)."""


class DegenerateInputError(ValueError):
    pass


class FitMismatchError(ValueError):
    """Overdetermined Laurent fit whose extra samples disagree with the fit."""


def squarefree_decompose(m: int) -> Tuple[int, int]:
    """Return ``(s, d)`` with ``m == s*s*d`` and ``d`` squarefree (m > 0)."""
    if m <= 0:
        raise ValueError("expected a positive integer")
    s, d = 1, 1
    rest = m
    p = 2
    while p * p <= rest:
        e = 0
        while rest % p == 0:
            rest //= p
            e += 1
        s *= p ** (e // 2)
        if e % 2:
            d *= p
        p += 1
    d *= rest
    return s, d


class QuadraticNumber:
    """The number ``p + q*sqrt(d)`` with rational ``p, q`` and squarefree ``d > 1``.

    Instances are immutable.  Construct through :meth:`make` to get the
    canonical form (a ``Fraction`` when ``q`` vanishes).
    """

    __slots__ = ("p", "q", "d", "_shadow")

    def __init__(self, p, q, d: int):
        self.p = Fraction(p)
        self.q = Fraction(q)
        self.d = int(d)
        self._shadow: Optional[float] = None
        if self.d <= 1:
            raise ValueError("d must be a squarefree integer > 1")

    @classmethod
    def make(cls, p, q, d: int) -> "ExactScalar":
        q = Fraction(q)
        if q == 0:
            return Fraction(p)
        s, sf = squarefree_decompose(int(d))
        if sf == 1:
            return Fraction(p) + q * s
        return cls(p, q * s, sf)

    @classmethod
    def sqrt(cls, d: int) -> "ExactScalar":
        return cls.make(0, 1, d)

    # -- arithmetic -----------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, QuadraticNumber):
            if other.d != self.d:
                raise FieldMismatchError(f"Q(sqrt {self.d}) vs Q(sqrt {other.d})")
            return other.p, other.q
        if isinstance(other, (int, Fraction)):
            return Fraction(other), Fraction(0)
        return None

    def __add__(self, other):
        c = self._coerce(other)
        if c is None:
            return NotImplemented
        return QuadraticNumber.make(self.p + c[0], self.q + c[1], self.d)

    __radd__ = __add__

    def __neg__(self):
        return QuadraticNumber(-self.p, -self.q, self.d)

    def __pos__(self):
        return self

    def __sub__(self, other):
        c = self._coerce(other)
        if c is None:
            return NotImplemented
        return QuadraticNumber.make(self.p - c[0], self.q - c[1], self.d)

    def __rsub__(self, other):
        c = self._coerce(other)
        if c is None:
            return NotImplemented
        return QuadraticNumber.make(c[0] - self.p, c[1] - self.q, self.d)

    def __mul__(self, other):
        c = self._coerce(other)
        if c is None:
            return NotImplemented
        p2, q2 = c
        return QuadraticNumber.make(
            self.p * p2 + self.d * self.q * q2, self.p * q2 + self.q * p2, self.d
        )

    __rmul__ = __mul__

    def norm(self) -> Fraction:
        """Field norm ``p^2 - d q^2`` (the product with the conjugate)."""
        return self.p * self.p - self.d * self.q * self.q

    def conjugate(self) -> "QuadraticNumber":
        return QuadraticNumber(self.p, -self.q, self.d)

    def inverse(self):
        nrm = self.norm()
        if nrm == 0:
            raise ZeroDivisionError("division by zero")
        return QuadraticNumber.make(self.p / nrm, -self.q / nrm, self.d)

    def __truediv__(self, other):
        if isinstance(other, QuadraticNumber):
            if other.d != self.d:
                raise FieldMismatchError(f"Q(sqrt {self.d}) vs Q(sqrt {other.d})")
            return self * other.inverse()
        if isinstance(other, (int, Fraction)):
            other = Fraction(other)
            return QuadraticNumber.make(self.p / other, self.q / other, self.d)
        return NotImplemented

    def __rtruediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.inverse() * Fraction(other)
        return NotImplemented

    def __pow__(self, k: int):
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            return self.inverse() ** (-k)
        out: ExactScalar = Fraction(1)
        base: ExactScalar = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __abs__(self):
        return -self if exact_sign(self) < 0 else self

    # -- comparison -----------------------------------------------------
    def _cmp(self, other) -> int:
        diff = self - other
        return exact_sign(diff)

    def __eq__(self, other):
        if isinstance(other, QuadraticNumber):
            return self.d == other.d and self.p == other.p and self.q == other.q
        if isinstance(other, (int, Fraction)):
            return False  # canonical form: q != 0 here
        return NotImplemented

    def __hash__(self):
        return hash((self.p, self.q, self.d))

    def __lt__(self, other):
        return self._cmp(other) < 0

    def __le__(self, other):
        return self._cmp(other) <= 0

    def __gt__(self, other):
        return self._cmp(other) > 0

    def __ge__(self, other):
        return self._cmp(other) >= 0

    def __float__(self) -> float:
        if self._shadow is None:
            self._shadow = _quad_to_float(self.p, self.q, self.d)
        return self._shadow

    def __repr__(self):
        return f"QuadraticNumber({format_exact(self)})"

    def __str__(self):
        return format_exact(self)


def _quad_to_float(p: Fraction, q: Fraction, d: int) -> float:
    # Avoid cancellation: p + q√d = (p² - dq²)/(p - q√d) when the terms have opposite signs.
    root = math.sqrt(d)
    if p == 0 or (p > 0) == (q > 0):
        return float(p) + float(q) * root
    nrm = p * p - d * q * q
    return float(nrm) / (float(p) - float(q) * root)


ExactScalar = Union[Fraction, QuadraticNumber]


def as_exact(x) -> ExactScalar:
    if isinstance(x, (Fraction, QuadraticNumber)):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return parse_exact(x)
    raise TypeError(f"cannot convert {type(x).__name__} to an exact scalar")


def field_of(x) -> int:
    """1 for rationals, otherwise the radicand ``d``."""
    return x.d if isinstance(x, QuadraticNumber) else 1


def exact_sign(x) -> int:
    if isinstance(x, QuadraticNumber):
        sp = (x.p > 0) - (x.p < 0)
        sq = (x.q > 0) - (x.q < 0)
        if sp == 0 or sp == sq:
            return sq
        if sq == 0:
            return sp
        nrm = x.norm()
        s = (nrm > 0) - (nrm < 0)
        return sp * s
    x = Fraction(x)
    return (x > 0) - (x < 0)


def exact_compare(x, y) -> int:
    """Sign of ``x - y`` computed without floating point."""
    fx, fy = field_of(x), field_of(y)
    if fx != 1 and fy != 1 and fx != fy:
        raise FieldMismatchError(f"Q(sqrt {fx}) vs Q(sqrt {fy})")
    return exact_sign(as_exact(x) - as_exact(y))


def exact_sqrt(x, d: Optional[int] = None) -> Optional[ExactScalar]:
    """Square root of a non-negative rational inside Q or Q(sqrt d).

    Returns ``None`` when the root is not representable there.  With ``d``
    omitted any single radical is allowed.
    """
    x = Fraction(x)
    if x < 0:
        return None
    if x == 0:
        return Fraction(0)
    sn, dn = squarefree_decompose(x.numerator * x.denominator)
    # sqrt(n/m) = sqrt(n m)/m
    if dn == 1:
        return Fraction(sn, x.denominator)
    if d is not None and dn != d:
        return None
    return QuadraticNumber(0, Fraction(sn, x.denominator), dn)


def to_float(x) -> float:
    return float(x)


def to_mpf(x):
    if isinstance(x, QuadraticNumber):
        return mpmath.mpf(x.p.numerator) / x.p.denominator + (
            mpmath.mpf(x.q.numerator) / x.q.denominator
        ) * mpmath.sqrt(x.d)
    x = Fraction(x)
    return mpmath.mpf(x.numerator) / x.denominator


def _fmt_frac(f: Fraction) -> str:
    return str(f.numerator) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"


def format_exact(x) -> str:
    """Serialize as ``"p/q"`` or ``"p/q+r/s*sqrt(d)"``."""
    if isinstance(x, QuadraticNumber):
        q = _fmt_frac(x.q)
        if x.p == 0:
            return f"{q}*sqrt({x.d})"
        sep = "" if x.q < 0 else "+"
        return f"{_fmt_frac(x.p)}{sep}{q}*sqrt({x.d})"
    return _fmt_frac(Fraction(x))


_QUAD_RE = re.compile(
    r"^\s*(?:(?P<p>[+-]?\d+(?:/\d+)?)\s*(?=[+-]))?"
    r"(?P<q>[+-]?\s*\d+(?:/\d+)?)?\s*\*?\s*sqrt\((?P<d>\d+)\)\s*$"
)


def parse_exact(s: str) -> ExactScalar:
    s = s.strip()
    if "sqrt" not in s:
        return Fraction(s.replace(" ", ""))
    m = _QUAD_RE.match(s)
    if not m:
        raise ValueError(f"cannot parse exact scalar {s!r}")
    p = Fraction(m.group("p")) if m.group("p") else Fraction(0)
    qs = (m.group("q") or "1").replace(" ", "")
    if qs in ("+", "-"):
        qs += "1"
    return QuadraticNumber.make(p, Fraction(qs), int(m.group("d")))


# ---------------------------------------------------------------------------
# Laurent polynomials in one parameter
# ---------------------------------------------------------------------------


class ParamPolynomial:
    """Laurent polynomial ``sum c_k a**k`` with exact coefficients."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Optional[Dict[int, object]] = None):
        clean = {}
        for k, c in (coeffs or {}).items():
            c = as_exact(c)
            if c != 0:
                clean[int(k)] = c
        self.coeffs: Dict[int, ExactScalar] = dict(sorted(clean.items()))

    @classmethod
    def from_dense(cls, coeffs: Sequence) -> "ParamPolynomial":
        """Coefficients in ascending powers starting at ``a**0``."""
        return cls({k: c for k, c in enumerate(coeffs)})

    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def min_exp(self) -> int:
        return min(self.coeffs) if self.coeffs else 0

    @property
    def max_exp(self) -> int:
        return max(self.coeffs) if self.coeffs else 0

    @property
    def degree(self) -> int:
        return self.max_exp

    def __call__(self, a):
        a = as_exact(a)
        out: ExactScalar = Fraction(0)
        for k, c in self.coeffs.items():
            out = out + c * (a ** k)
        return out

    def eval_float(self, a: float) -> float:
        return sum(float(c) * a ** k for k, c in self.coeffs.items())

    def eval_mp(self, a):
        return mpmath.fsum(to_mpf(c) * mpmath.power(a, k) for k, c in self.coeffs.items())

    def __add__(self, other):
        if not isinstance(other, ParamPolynomial):
            other = ParamPolynomial({0: other})
        out = dict(self.coeffs)
        for k, c in other.coeffs.items():
            out[k] = out.get(k, Fraction(0)) + c
        return ParamPolynomial(out)

    __radd__ = __add__

    def __neg__(self):
        return ParamPolynomial({k: -c for k, c in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-other if isinstance(other, ParamPolynomial) else -as_exact(other))

    def __mul__(self, other):
        if not isinstance(other, ParamPolynomial):
            other = as_exact(other)
            return ParamPolynomial({k: c * other for k, c in self.coeffs.items()})
        out: Dict[int, ExactScalar] = {}
        for k1, c1 in self.coeffs.items():
            for k2, c2 in other.coeffs.items():
                out[k1 + k2] = out.get(k1 + k2, Fraction(0)) + c1 * c2
        return ParamPolynomial(out)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, ParamPolynomial):
            return NotImplemented
        return self.coeffs == other.coeffs

    def __hash__(self):
        return hash(tuple(self.coeffs.items()))

    def shift(self, k: int) -> "ParamPolynomial":
        """Multiply by ``a**k``."""
        return ParamPolynomial({e + k: c for e, c in self.coeffs.items()})

    def derivative(self) -> "ParamPolynomial":
        return ParamPolynomial({k - 1: c * k for k, c in self.coeffs.items() if k != 0})

    def substitute_square(self) -> "ParamPolynomial":
        """Rewrite ``p(a)`` with only even exponents as a polynomial in ``v = a**2``."""
        if any(k % 2 for k in self.coeffs):
            raise ValueError("odd exponent present")
        return ParamPolynomial({k // 2: c for k, c in self.coeffs.items()})

    def leading_coefficient(self):
        return self.coeffs[self.max_exp]

    def dense(self) -> List[ExactScalar]:
        if self.min_exp < 0:
            raise ValueError("negative exponent in dense view")
        return [self.coeffs.get(k, Fraction(0)) for k in range(self.max_exp + 1)]

    def to_json(self) -> Dict[str, str]:
        return {str(k): format_exact(c) for k, c in self.coeffs.items()}

    @classmethod
    def from_json(cls, data: Dict[str, str]) -> "ParamPolynomial":
        return cls({int(k): parse_exact(v) for k, v in data.items()})

    def __repr__(self):
        terms = [f"({format_exact(c)})*a^{k}" for k, c in self.coeffs.items()]
        return "ParamPolynomial(" + (" + ".join(terms) or "0") + ")"


# -- dense polynomial helpers (ascending coefficient lists) ------------------


def _trim(p: List) -> List:
    while p and p[-1] == 0:
        p.pop()
    return p


def _pdivmod(a: List, b: List) -> Tuple[List, List]:
    a = list(a)
    b = _trim(list(b))
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    q = [Fraction(0)] * max(len(a) - len(b) + 1, 1)
    lead = b[-1]
    while len(_trim(a)) >= len(b):
        shift = len(a) - len(b)
        c = a[-1] / lead
        q[shift] = c
        for i, bc in enumerate(b):
            a[shift + i] = a[shift + i] - c * bc
        a.pop()
    return _trim(q), _trim(a)


def _pderiv(p: List) -> List:
    return _trim([c * k for k, c in enumerate(p)][1:])


def _pgcd(a: List, b: List) -> List:
    a, b = _trim(list(a)), _trim(list(b))
    while b:
        _, r = _pdivmod(a, b)
        a, b = b, r
    if not a:
        return a
    lead = a[-1]
    return [c / lead for c in a]


def _peval(p: Sequence, x) -> ExactScalar:
    out: ExactScalar = Fraction(0)
    for c in reversed(p):
        out = out * x + c
    return out


def _sturm_chain(p: List) -> List[List]:
    chain = [p, _pderiv(p)]
    while chain[-1]:
        _, r = _pdivmod(chain[-2], chain[-1])
        if not r:
            break
        chain.append([-c for c in r])
    return [c for c in chain if c]


def _sign_changes(chain: List[List], x) -> int:
    signs = [exact_sign(_peval(p, x)) for p in chain]
    signs = [s for s in signs if s != 0]
    return sum(1 for s, t in zip(signs, signs[1:]) if s != t)


class IsolatingInterval:
    """Open interval ``(lo, hi)`` holding exactly one root of ``poly``.

    ``poly`` is square-free so the endpoint signs differ.
    """

    __slots__ = ("lo", "hi", "_dense")

    def __init__(self, lo, hi, poly: Union[ParamPolynomial, Sequence]):
        self.lo = Fraction(lo)
        self.hi = Fraction(hi)
        if not self.lo < self.hi:
            raise ValueError("lo must be < hi")
        self._dense = list(poly.dense()) if isinstance(poly, ParamPolynomial) else list(poly)

    @property
    def polynomial(self) -> ParamPolynomial:
        return ParamPolynomial.from_dense(self._dense)

    def sign_at(self, x) -> int:
        return exact_sign(_peval(self._dense, x))

    def width(self) -> Fraction:
        return self.hi - self.lo

    def refine(self, width) -> "IsolatingInterval":
        """Bisect on exact signs until the width is at most ``width``."""
        width = Fraction(width)
        lo, hi = self.lo, self.hi
        slo = self.sign_at(lo)
        while hi - lo > width:
            mid = (lo + hi) / 2
            sm = self.sign_at(mid)
            if sm == 0:
                eps = (hi - lo) / 1024
                return IsolatingInterval(mid - min(eps, width / 2), mid + min(eps, width / 2), self._dense)
            if sm == slo:
                lo = mid
            else:
                hi = mid
        return IsolatingInterval(lo, hi, self._dense)

    def midpoint(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def contains(self, x) -> bool:
        return exact_compare(self.lo, x) < 0 and exact_compare(x, self.hi) < 0

    def to_mpf(self, digits: int = 30):
        with mpmath.workdps(digits + 10):
            iv = self.refine(Fraction(1, 10 ** (digits + 5)))
            return to_mpf(iv.midpoint())

    def __repr__(self):
        return f"IsolatingInterval({self.lo}, {self.hi})"


def isolate_positive_roots(
    f: Union[ParamPolynomial, Sequence], window: Tuple[object, object]
) -> List[IsolatingInterval]:
    """All distinct real roots of ``f`` in ``(lo, hi]`` as isolating intervals.

    Uses a Sturm sequence of the square-free part; intervals are ascending
    and pairwise disjoint.
    """
    lo, hi = Fraction(window[0]), Fraction(window[1])
    if lo < 0:
        raise ValueError("window must lie in [0, inf)")
    if isinstance(f, ParamPolynomial):
        if f.is_zero():
            raise DegenerateInputError("zero polynomial")
        if f.min_exp < 0:
            f = f.shift(-f.min_exp)
        dense = f.dense()
    else:
        dense = _trim([as_exact(c) for c in f])
        if not dense:
            raise DegenerateInputError("zero polynomial")
    if len(dense) == 1:
        return []
    g = _pgcd(dense, _pderiv(dense))
    sqf = _pdivmod(dense, g)[0] if len(g) > 1 else dense
    chain = _sturm_chain(sqf)

    def count(a, b):
        return _sign_changes(chain, a) - _sign_changes(chain, b)

    out: List[IsolatingInterval] = []
    stack = [(lo, hi)]
    while stack:
        a, b = stack.pop()
        k = count(a, b)
        if k == 0:
            continue
        if k == 1:
            # make sure neither endpoint is itself a root
            if exact_sign(_peval(sqf, b)) == 0:
                delta = (b - a) / 4
                while count(b - delta, b + delta) != 1 or exact_sign(_peval(sqf, b - delta)) == 0:
                    delta /= 2
                if count(a, b - delta) == 1:
                    stack.append((a, b - delta))
                out.append(IsolatingInterval(b - delta, b + delta, sqf))
                continue
            if exact_sign(_peval(sqf, a)) == 0:
                a = a + (b - a) / 2 ** 20
                stack.append((a, b))
                continue
            out.append(IsolatingInterval(a, b, sqf))
            continue
        mid = (a + b) / 2
        stack.append((mid, b))
        stack.append((a, mid))
    out.sort(key=lambda iv: iv.lo)
    return out


# ---------------------------------------------------------------------------
# Laurent fitting
# ---------------------------------------------------------------------------


def _solve_exact(rows: List[List[ExactScalar]], rhs: List[ExactScalar]) -> List[ExactScalar]:
    n = len(rows)
    m = [list(r) + [b] for r, b in zip(rows, rhs)]
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col] != 0), None)
        if piv is None:
            raise DegenerateInputError("singular interpolation system")
        m[col], m[piv] = m[piv], m[col]
        inv = 1 / m[col][col]
        m[col] = [x * inv for x in m[col]]
        for r in range(n):
            if r != col and m[r][col] != 0:
                fct = m[r][col]
                m[r] = [x - fct * y for x, y in zip(m[r], m[col])]
    return [m[r][n] for r in range(n)]


def laurent_fit(
    samples: Iterable[Tuple[object, object]], basis: Sequence[int]
) -> ParamPolynomial:
    """Interpolate ``samples`` exactly on the Laurent monomials ``a**k, k in basis``.

    Extra samples beyond ``len(basis)`` must be reproduced exactly, otherwise
    :class:`FitMismatchError` is raised.
    """
    samples = [(Fraction(a), as_exact(y)) for a, y in samples]
    basis = list(basis)
    if len(samples) < len(basis):
        raise ValueError("need at least as many samples as basis exponents")
    xs = [a for a, _ in samples]
    if len(set(xs)) != len(xs) or any(a <= 0 for a in xs):
        raise ValueError("sample abscissae must be distinct and positive")
    head = samples[: len(basis)]
    rows = [[a ** k for k in basis] for a, _ in head]
    coef = _solve_exact(rows, [y for _, y in head])
    poly = ParamPolynomial(dict(zip(basis, coef)))
    for a, y in samples[len(basis):]:
        if poly(a) != y:
            raise FitMismatchError(f"held-out sample at a={a} not reproduced")
    return poly
