"""Volumes, barycenters and second moments over a reduced face hierarchy.

Every face ``F`` of dimension ``d`` carries a rational spanning set ``B_F``
(``d`` rows in lattice coordinates).  Measures on ``F`` are stored relative
to the parallelepiped of ``B_F``: the true ``d``-volume is
``rho * sqrt(gdet)`` with ``gdet = det(B_F G B_F^T)``, and likewise the first
and second moments carry one factor ``sqrt(gdet)``.  A pyramid over a child
``C`` with apex ``p`` then has true height times child scale equal to
``|det coeffs([B_C; c_C - p])| * sqrt(gdet_F)``, so the whole recursion stays
in rational arithmetic and only the top level needs a square root.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import mpmath
import numpy as np
import scipy.linalg

from .exact import QuadraticNumber, as_exact, exact_sqrt, format_exact, to_mpf
from .lattice import Lattice
from .linalg import ExactMatrix, determinant
from .symmetry import MatrixGroup
from .voronoi import Face, FaceHierarchy, VertexIndex

__all__ = [
    "MomentError",
    "FaceProperties",
    "FacePropertiesCache",
    "SecondMomentResult",
    "centroid",
    "height_squared",
    "height_above_child",
    "compute_moments",
    "quantizer_constant",
    "nth_root_exact",
]


class MomentError(RuntimeError):
    pass


def _frac_array(rows) -> np.ndarray:
    a = np.empty((len(rows), len(rows[0]) if len(rows) else 0), dtype=object)
    for i, r in enumerate(rows):
        for j, c in enumerate(r):
            a[i, j] = Fraction(c)
    return a


def _det(m: np.ndarray, exact: bool):
    if m.shape[0] == 0:
        return Fraction(1) if exact else 1.0
    if exact:
        return determinant(ExactMatrix(m.tolist()))
    return float(np.linalg.det(m.astype(float)))


def _inv(m: np.ndarray, exact: bool) -> np.ndarray:
    if exact:
        inv = ExactMatrix(m.tolist()).inverse()
        return np.array([list(r) for r in inv.rows], dtype=object)
    return np.linalg.inv(m.astype(float))


@dataclass
class FaceProperties:
    """Cached measures of one representative face (see module docstring)."""

    dim: int
    span: np.ndarray  # d x n
    pivots: np.ndarray
    pinv: np.ndarray  # inverse of span[:, pivots] (exact) or pseudo-inverse of span (float)
    gdet: object
    centroid: np.ndarray
    rho: object
    barycenter: np.ndarray
    tensor: np.ndarray  # second moment about the origin divided by sqrt(gdet)

    def transported(self, r: np.ndarray, exact: bool) -> "FaceProperties":
        """Properties of the image face under ``u -> u r``."""
        rr = r.astype(object) if exact else r.astype(float)
        span = self.span.dot(rr) if self.dim else self.span
        return FaceProperties(
            self.dim,
            span,
            None,
            None,
            self.gdet,
            self.centroid.dot(rr),
            self.rho,
            self.barycenter.dot(rr),
            rr.T.dot(self.tensor).dot(rr),
        )


def _pivots(span: np.ndarray) -> np.ndarray:
    """Best-conditioned set of ``d`` columns (QR with column pivoting)."""
    f = span.astype(float)
    d = f.shape[0]
    _, r, perm = scipy.linalg.qr(f, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    k = int(np.sum(diag > 1e-12 * max(1.0, diag.max(initial=0.0))))
    return np.array(sorted(perm[: min(k, d)]), dtype=np.int64)


def centroid(face: Face, vindex: VertexIndex, exact: bool = True) -> np.ndarray:
    """Arithmetic mean of the vertices of ``face`` in lattice coordinates."""
    vs = face.verts
    if len(vs) == 0:
        raise MomentError("face without vertices")
    total = None
    for v in vs:
        c = np.array(list(vindex.coords(int(v))), dtype=object)
        total = c if total is None else total + c
    out = total / len(vs)
    return out if exact else out.astype(float)


def height_squared(span_child: np.ndarray, point_child: np.ndarray, apex: np.ndarray, gram: np.ndarray, method: str = "auto"):
    """Squared distance from ``apex`` to the affine hull of a child face.

    ``projection`` removes the component of ``point_child - apex`` inside the
    child's span; ``gram`` uses ``det Gram(B, delta) / det Gram(B)``.  Both
    are exact and agree; ``auto`` picks projection below half the ambient
    dimension.
    """
    delta = point_child - apex
    d = span_child.shape[0]
    n = gram.shape[0]
    if method == "auto":
        method = "projection" if d < n / 2 else "gram"
    exact = delta.dtype == object
    if d == 0:
        return delta.dot(gram).dot(delta)
    gb = span_child.dot(gram).dot(span_child.T)
    if method == "gram":
        full = np.vstack([span_child, delta[None, :]])
        num = _det(full.dot(gram).dot(full.T), exact)
        den = _det(gb, exact)
        if den == 0:
            raise MomentError("degenerate child span")
        return num / den
    if method == "projection":
        if _det(gb, exact) == 0:
            raise MomentError("degenerate child span")
        coef = _inv(gb, exact).dot(span_child.dot(gram).dot(delta))
        perp = delta - coef.dot(span_child)
        return perp.dot(gram).dot(perp)
    raise ValueError(f"unknown method {method!r}")


def height_above_child(span_child, point_child, apex, gram, method: str = "auto"):
    """Height as an exact scalar when representable with one square root, else an mpf."""
    h2 = height_squared(span_child, point_child, apex, gram, method)
    if isinstance(h2, float):
        return math.sqrt(h2)
    r = exact_sqrt(h2)
    return r if r is not None else mpmath.sqrt(to_mpf(h2))


class FacePropertiesCache:
    """Per-representative properties, filled one dimension at a time."""

    def __init__(self, hierarchy: FaceHierarchy, group: MatrixGroup, exact: bool = True):
        self.h = hierarchy
        self.group = group
        self.exact = exact
        self.vindex = hierarchy.vindex
        lat = self.vindex.lat
        g = _frac_array(lat.gram_int.tolist()) / lat.gram_scale
        self.gram = g if exact else g.astype(float)
        self.n = lat.n
        self._props: Dict[int, FaceProperties] = {}
        self._mat: Dict[bytes, np.ndarray] = {}

    def _matrix(self, g: np.ndarray) -> np.ndarray:
        k = g.tobytes()
        m = self._mat.get(k)
        if m is None:
            m = self.group.matrix_of(g)
            if len(self._mat) < 100_000:
                self._mat[k] = m
        return m

    def _num(self, x):
        return x if self.exact else float(x)

    def get(self, face: Face) -> FaceProperties:
        rep, g = face.root()
        p = self._props.get(id(rep))
        if p is None:
            raise MomentError(f"no cached properties for representative {rep!r}")
        if g is None:
            return p
        return p.transported(self._matrix(g), self.exact)

    def __contains__(self, face: Face) -> bool:
        return id(face) in self._props

    def put(self, face: Face, props: FaceProperties) -> None:
        if face.representative is not None:
            raise MomentError("properties live on representatives only")
        self._props[id(face)] = props

    # -- recursion -------------------------------------------------------
    def _vertex(self, face: Face) -> FaceProperties:
        c = np.array(list(self.vindex.coords(int(face.verts[0]))), dtype=object)
        if not self.exact:
            c = c.astype(float)
        zero = np.zeros((0, self.n), dtype=object if self.exact else float)
        one = self._num(Fraction(1))
        return FaceProperties(0, zero, np.zeros(0, dtype=np.int64), zero[:, :0], one, c, one, c, np.outer(c, c))

    def _compose(self, face: Face, apex: Optional[np.ndarray] = None) -> FaceProperties:
        d = face.dim
        ex = self.exact
        if apex is None:
            apex = centroid(face, self.vindex, exact=ex)
        kids = [self.get(c) for c in face.children]
        if not kids:
            raise MomentError("face without children")
        first = kids[0]
        span = np.vstack([first.span, (apex - first.centroid)[None, :]]) if d > 1 else (apex - first.centroid)[None, :]
        piv = _pivots(span)
        if len(piv) != d:
            raise MomentError("spanning set of wrong rank")
        # exact: inverse on pivot columns; float: least squares against the whole span
        pinv = _inv(span[:, piv], ex) if ex else np.linalg.pinv(span)
        gdet = _det(span.dot(self.gram).dot(span.T), ex)
        zero = Fraction(0) if ex else 0.0
        rho = zero
        first_moment = np.array([zero] * self.n, dtype=object if ex else float)
        tensor = np.zeros((self.n, self.n), dtype=object if ex else float)
        if ex:
            tensor[:] = Fraction(0)
        pp = np.outer(apex, apex)
        c1 = Fraction(2, d * (d + 1) * (d + 2)) if ex else 2.0 / (d * (d + 1) * (d + 2))
        c2 = Fraction(1, (d + 1) * (d + 2)) if ex else 1.0 / ((d + 1) * (d + 2))
        c3 = Fraction(1, d + 2) if ex else 1.0 / (d + 2)
        for k in kids:
            rows = np.vstack([k.span, (k.centroid - apex)[None, :]]) if k.dim else (k.centroid - apex)[None, :]
            w = abs(_det(rows[:, piv].dot(pinv) if ex else rows.dot(pinv), ex))
            if w == 0:
                continue
            wr = w * k.rho
            rho += wr
            first_moment = first_moment + wr * apex / d + wr * k.barycenter
            pb = np.outer(apex, k.barycenter)
            tensor = tensor + (c1 * wr) * pp + (c2 * wr) * (pb + pb.T) + (c3 * w) * k.tensor
        first_moment = first_moment / (d + 1)
        rho = rho / d
        if rho == 0:
            raise MomentError("face of zero volume")
        bary = first_moment / rho
        return FaceProperties(d, span, piv, pinv, gdet, apex, rho, bary, tensor)

    def compute(self, progress=None) -> FaceProperties:
        """Sweep representatives from vertices up; returns the top face's properties."""
        h = self.h
        for d in range(0, h.n + 1):
            for f in h.levels[d]:
                if f.representative is not None:
                    continue
                if d == 0:
                    self.put(f, self._vertex(f))
                elif d == h.n:
                    zero = np.array([Fraction(0)] * h.n, dtype=object) if self.exact else np.zeros(h.n)
                    self.put(f, self._compose(f, apex=zero))
                else:
                    self.put(f, self._compose(f))
            if progress:
                progress(f"moments: dim {d} done")
        return self._props[id(h.top)]


def compute_moments(hierarchy: FaceHierarchy, group: MatrixGroup, exact: bool = True) -> FacePropertiesCache:
    cache = FacePropertiesCache(hierarchy, group, exact)
    cache.compute()
    return cache


def nth_root_exact(x, n: int):
    """``x**(1/n)`` in Q or a quadratic field, or ``None``."""
    x = Fraction(x)
    if x <= 0:
        return None

    def iroot(m: int, k: int) -> Optional[int]:
        if m == 0:
            return 0
        r = int(round(m ** (1.0 / k))) if m < 2 ** 1000 else int(mpmath.nint(mpmath.root(m, k)))
        for c in (r - 1, r, r + 1):
            if c >= 0 and c ** k == m:
                return c
        return None

    a, b = iroot(x.numerator, n), iroot(x.denominator, n)
    if a is not None and b is not None:
        return Fraction(a, b)
    x2 = x * x
    a, b = iroot(x2.numerator, n), iroot(x2.denominator, n)
    if a is not None and b is not None:
        return exact_sqrt(Fraction(a, b))
    return None


@dataclass
class SecondMomentResult:
    """Volume, second moment and quantizer constant of a Voronoi cell.

    ``volume`` and ``U`` are exact when ``sqrt(det Gram)`` is; ``G`` is exact
    when ``Vol**(2/n)`` is representable, otherwise ``None`` with
    ``G_decimal`` carrying the value.  ``tensor`` is the second-moment matrix
    in Cartesian coordinates when the lattice has a generator, else in
    lattice coordinates.
    """

    lattice: str
    n: int
    volume: object
    U: object
    E: object
    G: object
    G_decimal: str
    tensor: Optional[List[List[object]]]
    tensor_cartesian: bool
    det_gram: Fraction
    chart_trace: Fraction  # tr(T G) with U = sqrt(det Gram) * chart_trace
    chart_tensor: np.ndarray
    parameter: object = None
    certificate: bool = False
    digits: int = 30

    @property
    def G_float(self) -> float:
        return float(mpmath.mpf(self.G_decimal))

    def to_json(self) -> dict:
        def s(x):
            return None if x is None else format_exact(x)

        return {
            "lattice": self.lattice,
            "n": self.n,
            "parameter": s(self.parameter),
            "volume": s(self.volume),
            "volume_certificate": self.certificate,
            "U": s(self.U),
            "E": s(self.E),
            "G": s(self.G),
            "G_decimal": self.G_decimal,
            "G_digits": self.digits,
            "det_gram": s(self.det_gram),
            "tensor_cartesian": self.tensor_cartesian,
            "tensor": None if self.tensor is None else [[s(c) for c in row] for row in self.tensor],
        }


def quantizer_constant(
    lat: Lattice, top: FaceProperties, parameter=None, digits: int = 30, certify: bool = True
) -> SecondMomentResult:
    """Assemble ``Vol``, ``U``, ``E = U/Vol`` and ``G = U / (n Vol^(1+2/n))``."""
    n = lat.n
    det_g = Fraction(lat.det_gram)
    span = top.span
    scale = abs(_det(span, True))  # |det B_top| in lattice coordinates
    rel_vol = top.rho * scale  # volume in units of sqrt(det Gram)
    cert = rel_vol == 1
    if certify and not cert:
        raise MomentError(f"volume certificate failed: cell volume is {rel_vol} x sqrt(det Gram)")
    gram = _frac_array(lat.gram_int.tolist()) / lat.gram_scale
    tchart = top.tensor * scale  # second moment about origin / sqrt(det Gram)
    tr = sum(tchart.dot(gram)[i, i] for i in range(n))
    sq = exact_sqrt(det_g)
    vol = None if sq is None else sq * rel_vol
    U = None if sq is None else sq * tr
    E = None if U is None else U / vol
    root = nth_root_exact(det_g, n)  # (sqrt det)^(2/n)
    G = tr / (n * root) if root is not None and cert else None
    with mpmath.workdps(digits + 10):
        gm = to_mpf(tr) / (n * to_mpf(rel_vol) ** (1 + mpmath.mpf(2) / n) * mpmath.power(to_mpf(det_g), mpmath.mpf(1) / n))
        g_dec = mpmath.nstr(gm, digits, strip_zeros=False)
    tensor = None
    cart = False
    if sq is not None:
        if lat.generator is not None:
            b = lat.generator
            bt = b.T
            m = ExactMatrix(tchart.tolist())
            tensor = (bt @ m @ b) * sq
            tensor = [list(r) for r in tensor.rows]
            cart = True
        else:
            tensor = [[sq * c for c in row] for row in tchart.tolist()]
    return SecondMomentResult(
        lattice=lat.name,
        n=n,
        volume=vol,
        U=U,
        E=E,
        G=G,
        G_decimal=g_dec,
        tensor=tensor,
        tensor_cartesian=cart,
        det_gram=det_g,
        chart_trace=tr,
        chart_tensor=tchart,
        parameter=parameter,
        certificate=cert,
        digits=digits,
    )
