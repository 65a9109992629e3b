"""Lattices in basis coordinates, closest points, relevant vectors and helpers.

A point ``x`` of R^n is stored by its coordinates ``u`` in the lattice basis,
``x = u B``.  Inner products then read ``u G w^T`` with the Gram matrix
``G = B B^T``.  Lattice points have integer coordinates, and as long as ``G``
is rational every quantity the Voronoi construction needs stays rational even
when ``B`` itself carries square roots (K12 is the motivating case).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .exact import ExactScalar, QuadraticNumber, as_exact, exact_sqrt, field_of, to_mpf
from .linalg import ExactMatrix, ExactVector, determinant

__all__ = [
    "LatticeError",
    "ParameterError",
    "Lattice",
    "RelevantVectorSet",
    "lll_reduce",
    "enumerate_ball",
    "closest_lattice_points",
    "relevant_vectors",
    "laminate",
    "product_lattice",
    "ProductOptimum",
    "zador_bound",
    "monte_carlo_G",
    "MonteCarloEstimate",
]


class LatticeError(ValueError):
    pass


class ParameterError(ValueError):
    pass


def _lcm(values) -> int:
    out = 1
    for v in values:
        out = out * v // math.gcd(out, v)
    return out


def _as_int_matrix(m: ExactMatrix) -> Optional[np.ndarray]:
    out = np.zeros(m.shape, dtype=np.int64)
    for i, row in enumerate(m.rows):
        for j, c in enumerate(row):
            if not isinstance(c, Fraction) or c.denominator != 1:
                return None
            out[i, j] = c.numerator
    return out


class Lattice:
    """A full-rank lattice given by a rational Gram matrix.

    ``generator`` (rows = basis vectors in Cartesian coordinates, entries in
    Q or one Q(sqrt d)) is optional; when given, the Gram matrix is derived
    from it and must come out rational.  ``symmetry`` holds integer matrices
    ``R`` acting on coordinates from the right, ``u -> u R``.
    """

    def __init__(
        self,
        gram: Optional[ExactMatrix] = None,
        *,
        generator: Optional[ExactMatrix] = None,
        symmetry: Optional[Sequence] = None,
        cartesian_symmetry: Optional[Sequence[ExactMatrix]] = None,
        name: str = "lattice",
        check: bool = True,
    ):
        if generator is None and gram is None:
            raise LatticeError("need a Gram matrix or a generator")
        self.name = name
        self.generator = generator
        if generator is not None:
            n, m = generator.shape
            if n != m:
                raise LatticeError("generator must be square")
            g = generator @ generator.T
            for row in g.rows:
                for c in row:
                    if not isinstance(c, Fraction):
                        raise LatticeError("Gram matrix B B^T must be rational")
            if gram is not None and gram != g:
                raise LatticeError("gram does not match generator")
            gram = g
        self.gram: ExactMatrix = gram
        self.n = gram.shape[0]
        if gram.shape[1] != self.n:
            raise LatticeError("Gram matrix must be square")
        self.det_gram = determinant(gram)
        if self.det_gram <= 0:
            raise LatticeError("Gram matrix must be positive definite")
        fields = {field_of(c) for row in (generator.rows if generator is not None else []) for c in row}
        fields.discard(1)
        if len(fields) > 1:
            raise LatticeError("mixed radicals in generator")
        self.field_d = fields.pop() if fields else 1
        mats: List[np.ndarray] = []
        for r in symmetry or []:
            arr = np.asarray(r, dtype=object) if not isinstance(r, ExactMatrix) else None
            if isinstance(r, ExactMatrix):
                ir = _as_int_matrix(r)
                if ir is None:
                    raise LatticeError("symmetry matrix in basis coordinates must be integral")
                mats.append(ir)
            else:
                mats.append(np.asarray(arr, dtype=np.int64))
        for m in cartesian_symmetry or []:
            mats.append(self.basis_matrix_of(m))
        self.symmetry: List[np.ndarray] = mats
        if check:
            for r in self.symmetry:
                self._check_symmetry(r)

    # -- derived data ---------------------------------------------------
    @cached_property
    def gram_scale(self) -> int:
        return _lcm(c.denominator for row in self.gram.rows for c in row)

    @cached_property
    def gram_int(self) -> np.ndarray:
        """``gram_scale * G`` as integers: int64 when entries are small, else Python ints."""
        s = self.gram_scale
        rows = [[int(c * s) for c in row] for row in self.gram.rows]
        big = max(abs(c) for row in rows for c in row) >= 2 ** 31
        return np.array(rows, dtype=object if big else np.int64)

    @cached_property
    def gram_float(self) -> np.ndarray:
        return self.gram.shadow.copy()

    @cached_property
    def cartesian_float(self) -> np.ndarray:
        """Float generator; Cholesky factor of ``G`` when no exact generator is known."""
        if self.generator is not None:
            return self.generator.shadow.copy()
        return np.linalg.cholesky(self.gram_float)

    @cached_property
    def volume(self) -> ExactScalar:
        """``|det B| = sqrt(det G)`` exactly."""
        v = exact_sqrt(self.det_gram)
        if v is None:  # pragma: no cover - sqrt of a rational always fits one radical
            raise LatticeError("volume not representable")
        return v

    @cached_property
    def reduction(self) -> np.ndarray:
        """Unimodular ``U`` whose rows are an LLL-reduced basis (in coordinates)."""
        return lll_reduce(self.gram)

    def basis_matrix_of(self, m: ExactMatrix) -> np.ndarray:
        """Integer ``R = B M B^{-1}`` for a Cartesian map ``x -> x M``."""
        if self.generator is None:
            raise LatticeError("Cartesian symmetry needs an exact generator")
        r = self.generator @ m @ self.generator.inverse()
        ir = _as_int_matrix(r)
        if ir is None:
            raise LatticeError("matrix does not map the lattice to itself")
        return ir

    def cartesian_matrix_of(self, r: np.ndarray) -> ExactMatrix:
        """``M = B^{-1} R B`` for a basis-coordinate matrix ``R``."""
        if self.generator is None:
            raise LatticeError("no exact generator")
        rm = ExactMatrix([[Fraction(int(x)) for x in row] for row in r])
        return self.generator.inverse() @ rm @ self.generator

    def _check_symmetry(self, r: np.ndarray) -> None:
        rm = ExactMatrix([[Fraction(int(x)) for x in row] for row in r])
        if rm @ self.gram @ rm.T != self.gram:
            raise LatticeError("symmetry matrix does not preserve the Gram matrix")
        if abs(round(float(np.linalg.det(r.astype(float))))) != 1:
            raise LatticeError("symmetry matrix is not unimodular")

    def to_cartesian(self, u: Sequence) -> ExactVector:
        if self.generator is None:
            raise LatticeError("no exact generator")
        return self.generator.vecmul(u)

    def from_cartesian(self, x: Sequence) -> ExactVector:
        if self.generator is None:
            raise LatticeError("no exact generator")
        return self.generator.inverse().vecmul(x)

    def norm2(self, u: Sequence) -> ExactScalar:
        return ExactVector(u).norm2(self.gram)

    def inner(self, u: Sequence, w: Sequence) -> ExactScalar:
        return ExactVector(u).dot(ExactVector(w), self.gram)

    def norm2_int(self, z: np.ndarray) -> np.ndarray:
        """Exact ``gram_scale * |z|^2`` for integer rows ``z`` (object fallback on overflow)."""
        z = np.atleast_2d(z)
        g = self.gram_int
        zmax = int(np.abs(z).max(initial=0))
        if g.dtype == object or zmax * zmax * int(np.abs(g).max()) * self.n * self.n >= 2 ** 62:
            zo = z.astype(object)
            return np.einsum("ij,jk,ik->i", zo, g.astype(object), zo)
        return np.einsum("ij,jk,ik->i", z, g, z)

    def scaled(self, s) -> "Lattice":
        s = Fraction(s)
        gen = self.generator * s if self.generator is not None else None
        gram = None if gen is not None else self.gram * (s * s)
        return Lattice(gram, generator=gen, symmetry=list(self.symmetry), name=f"{s}*{self.name}")

    def __repr__(self):
        return f"Lattice({self.name!r}, n={self.n})"


# ---------------------------------------------------------------------------
# LLL and enumeration
# ---------------------------------------------------------------------------


def lll_reduce(gram: ExactMatrix, delta: Fraction = Fraction(99, 100)) -> np.ndarray:
    """Exact LLL on a Gram matrix; returns the unimodular transform ``U``.

    Rows of ``U`` are coordinates of the reduced basis vectors.
    """
    n = gram.shape[0]
    g = [[Fraction(c) for c in row] for row in gram.rows]
    u = [[int(i == j) for j in range(n)] for i in range(n)]

    def ip(i, j):
        return g[i][j]

    def gso():
        mu = [[Fraction(0)] * n for _ in range(n)]
        bstar = [Fraction(0)] * n
        for i in range(n):
            for j in range(i):
                s = ip(i, j)
                for k in range(j):
                    s -= mu[j][k] * mu[i][k] * bstar[k]
                mu[i][j] = s / bstar[j]
            s = ip(i, i)
            for k in range(i):
                s -= mu[i][k] * mu[i][k] * bstar[k]
            bstar[i] = s
        return mu, bstar

    def recompute_gram():
        base = [[Fraction(c) for c in row] for row in gram.rows]
        for i in range(n):
            for j in range(n):
                s = Fraction(0)
                for a in range(n):
                    if u[i][a] == 0:
                        continue
                    for b in range(n):
                        if u[j][b]:
                            s += u[i][a] * base[a][b] * u[j][b]
                g[i][j] = s

    k = 1
    mu, bstar = gso()
    iters = 0
    while k < n:
        iters += 1
        if iters > 100000:  # pragma: no cover
            break
        for j in range(k - 1, -1, -1):
            c = round(mu[k][j])
            if c:
                for a in range(n):
                    u[k][a] -= c * u[j][a]
                recompute_gram()
                mu, bstar = gso()
        if bstar[k] >= (delta - mu[k][k - 1] ** 2) * bstar[k - 1]:
            k += 1
        else:
            u[k], u[k - 1] = u[k - 1], u[k]
            recompute_gram()
            mu, bstar = gso()
            k = max(k - 1, 1)
    return np.array(u, dtype=np.int64)


def enumerate_ball(
    gram_float: np.ndarray,
    center: np.ndarray,
    radius2: float,
    max_points: int = 50_000_000,
) -> np.ndarray:
    """All integer ``z`` with ``(z-c) G (z-c)^T <= radius2`` (float test).

    Breadth-first over coordinates from last to first, vectorized with numpy.
    Callers that need exact answers enlarge ``radius2`` by a safety margin and
    filter the result exactly.
    """
    n = gram_float.shape[0]
    r = np.linalg.cholesky(gram_float).T  # G = R^T R, R upper triangular
    diag = np.diag(r)
    mu = r / diag[:, None]
    c = np.asarray(center, dtype=float)
    zs = np.zeros((1, 0), dtype=np.int64)
    dist = np.zeros(1)
    # offsets[j] accumulates sum_{k>i} mu[i,k] (z_k - c_k) for the current level i
    for i in range(n - 1, -1, -1):
        if zs.shape[1]:
            diff = zs - c[i + 1:][None, :]
            shift = diff @ mu[i, i + 1:]
        else:
            shift = np.zeros(len(dist))
        ctr = c[i] - shift
        rem = np.maximum(radius2 - dist, 0.0)
        w = np.sqrt(rem) / diag[i]
        lo = np.ceil(ctr - w - 1e-12).astype(np.int64)
        hi = np.floor(ctr + w + 1e-12).astype(np.int64)
        cnt = np.maximum(hi - lo + 1, 0)
        total = int(cnt.sum())
        if total == 0:
            return np.zeros((0, n), dtype=np.int64)
        if total > max_points:
            raise MemoryError(f"enumeration too large ({total} nodes)")
        idx = np.repeat(np.arange(len(dist)), cnt)
        starts = np.repeat(lo, cnt)
        offs = np.arange(total) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        zi = starts + offs
        t = (zi - ctr[idx]) * diag[i]
        newdist = dist[idx] + t * t
        keep = newdist <= radius2 * (1 + 1e-12) + 1e-12
        zs = np.column_stack([zi[keep], zs[idx[keep]]])
        dist = newdist[keep]
    return zs


def _babai(lat: Lattice, target: np.ndarray) -> np.ndarray:
    """Rounding in the reduced basis; integer coordinates in the original basis."""
    u = lat.reduction.astype(float)
    y = np.rint(np.linalg.solve(u.T, np.asarray(target, float).T).T)
    return (y @ lat.reduction.astype(float)).astype(np.int64)


def _reduced_frame(lat: Lattice):
    u = lat.reduction
    gr = u.astype(float) @ lat.gram_float @ u.T.astype(float)
    uinv = np.linalg.inv(u.astype(float))
    return u, gr, uinv


def closest_lattice_points(lat: Lattice, x: Sequence, margin: float = 1e-6) -> List[Tuple[int, ...]]:
    """Every lattice point (integer coordinates) at minimal distance from ``x``.

    ``x`` is in basis coordinates and exact.  The float enumeration runs with
    radius ``(1 + margin) * best`` and the survivors are certified exactly.
    """
    xe = [as_exact(c) for c in x]
    xf = np.array([float(c) for c in xe])
    u, gr, uinv = _reduced_frame(lat)
    z0 = _babai(lat, xf)
    d0 = float((z0 - xf) @ lat.gram_float @ (z0 - xf))
    yc = xf @ uinv  # target in reduced coordinates
    pts = enumerate_ball(gr, yc, d0 * (1 + margin) + 1e-9)
    if len(pts) == 0:
        pts = z0[None, :] @ np.linalg.inv(u.astype(float))
        pts = np.rint(pts).astype(np.int64)
    zs = pts @ u
    # exact certification
    g = lat.gram
    best = None
    winners: List[Tuple[int, ...]] = []
    for z in zs:
        d = ExactVector([Fraction(int(a)) - b for a, b in zip(z, xe)]).norm2(g)
        if best is None or d < best:
            best, winners = d, [tuple(int(a) for a in z)]
        elif d == best:
            winners.append(tuple(int(a) for a in z))
    return sorted(set(winners))


# ---------------------------------------------------------------------------
# Relevant vectors
# ---------------------------------------------------------------------------


@dataclass
class RelevantVectorSet:
    """Integer coordinate vectors ``z`` of the Voronoi-relevant vectors.

    Rows come in canonical (lexicographic) order and the set is closed under
    negation.  ``norms`` holds ``gram_scale * |z|^2`` exactly.
    """

    lattice: Lattice
    vectors: np.ndarray
    norms: np.ndarray
    class_ids: Optional[np.ndarray] = None
    index: Dict[bytes, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.index = {row.tobytes(): i for i, row in enumerate(self.vectors)}

    def __len__(self):
        return len(self.vectors)

    def find(self, z) -> int:
        return self.index.get(np.asarray(z, dtype=np.int64).tobytes(), -1)

    def exact(self, i: int) -> ExactVector:
        return ExactVector(Fraction(int(c)) for c in self.vectors[i])

    def norm2(self, i: int) -> Fraction:
        return Fraction(int(self.norms[i]), self.lattice.gram_scale)

    def check_boundary(self) -> bool:
        """Each ``v/2`` satisfies ``2 (v/2).w <= |w|^2`` for every ``w`` (exact)."""
        z = self.vectors
        ip = z @ self.lattice.gram_int @ z.T
        # v.w <= |w|^2 for all pairs, in scaled integers
        return bool(np.all(ip <= self.norms[None, :]))


def relevant_vectors(
    lat: Lattice,
    cosets: Optional[Sequence[Sequence[int]]] = None,
    max_points: int = 20_000_000,
) -> RelevantVectorSet:
    """Voronoi-relevant vectors from the minimal vectors of the cosets of 2L.

    A coset ``c + 2L`` contributes ``+-v`` exactly when its minimal-norm
    members are a single pair.  All cosets are scanned through one bounded
    enumeration of short vectors; the bound grows until every coset has met a
    member whose norm is at most the bound, so each coset minimum is complete.
    """
    n = lat.n
    u, gr, uinv = _reduced_frame(lat)
    if cosets is None:
        codes = np.arange(1, 2 ** n, dtype=np.int64)
    else:
        codes = np.array(sorted({sum((int(b) & 1) << i for i, b in enumerate(c)) for c in cosets}), dtype=np.int64)
        codes = codes[codes != 0]
    wanted = set(int(c) for c in codes)
    seen_min: Dict[int, int] = {}
    members: Dict[int, List[np.ndarray]] = {}
    # grow the ball until every coset has a member; a coset minimum found
    # inside a complete ball is exact
    radius = 2.0 * float(np.min(np.diag(gr)))
    for _ in range(12):
        try:
            pts = enumerate_ball(gr, np.zeros(n), radius * (1 + 1e-9) + 1e-9, max_points=max_points)
        except MemoryError:
            break
        zs = pts @ u
        zs = zs[np.any(zs != 0, axis=1)]
        norms = lat.norm2_int(zs)
        cc = (zs & 1) @ (1 << np.arange(n, dtype=np.int64))
        seen_min.clear()
        members.clear()
        for idx in np.argsort(norms.astype(float), kind="stable"):
            code = int(cc[idx])
            if code not in wanted:
                continue
            nv = int(norms[idx])
            m = seen_min.get(code)
            if m is None or nv < m:
                seen_min[code] = nv
                members[code] = [zs[idx]]
            elif nv == m:
                members[code].append(zs[idx])
        if len(seen_min) == len(wanted):
            break
        radius *= 1.5
    for code in sorted(wanted - set(seen_min)):
        c = np.array([(code >> i) & 1 for i in range(n)], dtype=np.int64)
        half = [Fraction(-int(x), 2) for x in c]
        near = closest_lattice_points(lat, half)
        vs = [c + 2 * np.array(z, dtype=np.int64) for z in near]
        seen_min[code] = int(lat.norm2_int(vs[0][None, :])[0])
        members[code] = vs
    missing = wanted - set(seen_min)
    if missing:  # pragma: no cover - the closest-point fallback fills every coset
        raise LatticeError(f"{len(missing)} cosets without a short member")
    out = []
    for code in sorted(members):
        mem = members[code]
        if len(mem) == 2:
            out.extend(mem)
    vecs = np.array(out, dtype=np.int64).reshape(-1, n)
    order = np.lexsort(vecs.T[::-1])
    vecs = vecs[order]
    return RelevantVectorSet(lat, vecs, lat.norm2_int(vecs))


# ---------------------------------------------------------------------------
# Constructions
# ---------------------------------------------------------------------------


def laminate(base: Lattice, h: Sequence, a, name: Optional[str] = None) -> Lattice:
    """Lattice with block generator ``[[B1, 0], [h, a]]``.

    ``h`` is Cartesian when ``base`` has an exact generator, otherwise it is
    given in ``base``'s basis coordinates.  Symmetries of ``base`` that fix
    ``h`` modulo ``base`` are not inherited automatically.
    """
    a = as_exact(a)
    if a <= 0:
        raise ParameterError("layer spacing a must be positive")
    n1 = base.n
    if len(h) != n1:
        raise ParameterError("offset vector has the wrong dimension")
    hname = name or f"{base.name}-laminated(a={a})"
    if base.generator is not None:
        rows = [list(r.components) + [Fraction(0)] for r in base.generator.rows]
        rows.append([as_exact(c) for c in h] + [a])
        return Lattice(generator=ExactMatrix(rows), name=hname)
    # basis coordinates: h = w B1, Gram extends by <h, b_i> and |h|^2 + a^2
    w = ExactVector(as_exact(c) for c in h)
    g1 = base.gram
    col = g1.vecmul(w)
    rows = [list(g1.rows[i].components) + [col[i]] for i in range(n1)]
    rows.append(list(col.components) + [w.norm2(g1) + a * a])
    return Lattice(ExactMatrix(rows), name=hname)


@dataclass
class ProductOptimum:
    lattice: Lattice
    a_opt: float
    G_opt: float


def product_lattice(
    l1: Lattice,
    l2: Lattice,
    a,
    G1=None,
    G2=None,
) -> ProductOptimum:
    """``L1 x a L2`` together with the closed-form optimal scale and its G.

    ``G1``/``G2`` are the known quantizer constants of the factors.
    """
    a = as_exact(a)
    if a <= 0:
        raise ParameterError("a must be positive")
    n1, n2 = l1.n, l2.n
    if l1.generator is not None and l2.generator is not None:
        gen = ExactMatrix.block([[l1.generator, None], [None, l2.generator * a]])
        lat = Lattice(generator=gen, name=f"{l1.name}x{a}{l2.name}")
    else:
        gram = ExactMatrix.block([[l1.gram, None], [None, l2.gram * (a * a)]])
        lat = Lattice(gram, name=f"{l1.name}x{a}{l2.name}")
    a_opt = G_opt = float("nan")
    if G1 is not None and G2 is not None:
        g1, g2 = float(G1), float(G2)
        v1, v2 = float(l1.volume), float(l2.volume)
        if min(g1, g2, v1, v2) <= 0:
            raise ParameterError("quantizer constants and volumes must be positive")
        a_opt, G_opt = product_optimum(g1, v1, n1, g2, v2, n2)
    return ProductOptimum(lat, a_opt, G_opt)


def product_optimum(G1: float, V1: float, n1: int, G2: float, V2: float, n2: int) -> Tuple[float, float]:
    """Optimal scale of ``L1 x a L2`` and ``G`` there: ``G^n = G1^n1 G2^n2``."""
    if min(G1, V1, G2, V2) <= 0:
        raise ParameterError("nonpositive input")
    a_opt = V1 ** (1.0 / n1) / V2 ** (1.0 / n2) * math.sqrt(G1 / G2)
    n = n1 + n2
    G = (G1 ** n1 * G2 ** n2) ** (1.0 / n)
    return a_opt, G


def zador_bound(n: int, dps: int = 30):
    """Sphere lower bound ``Gamma(1+n/2)^(2/n) / ((n+2) pi)`` (an mpmath float)."""
    import mpmath

    if n < 1:
        raise ParameterError("n must be >= 1")
    with mpmath.workdps(dps):
        return +(mpmath.gamma(1 + mpmath.mpf(n) / 2) ** (mpmath.mpf(2) / n) / ((n + 2) * mpmath.pi))


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------


@dataclass
class MonteCarloEstimate:
    G: float
    stderr: float
    samples: int


def _decode_with_relevant(x: np.ndarray, rel: np.ndarray, rel_norm: np.ndarray, max_iter: int = 200) -> np.ndarray:
    """Move each row of ``x`` into the Voronoi cell of the origin (float).

    Repeatedly subtracts the relevant vector with the largest violation of
    ``2 x.n <= |n|^2``; returns the reduced error vectors.
    """
    x = x.copy()
    for _ in range(max_iter):
        viol = 2 * x @ rel.T - rel_norm[None, :]
        j = np.argmax(viol, axis=1)
        bad = viol[np.arange(len(x)), j] > 1e-12
        if not bad.any():
            break
        x[bad] -= rel[j[bad]]
    return x


def monte_carlo_G(
    lat: Lattice,
    samples: int = 10 ** 6,
    seed: int = 0,
    relevant: Optional[RelevantVectorSet] = None,
    chunk: int = 200_000,
) -> MonteCarloEstimate:
    """Normalized second moment by uniform sampling of a fundamental cell.

    Points are reduced into the Voronoi cell with the relevant vectors, which
    decodes to the nearest lattice point.
    """
    if samples < 10 ** 4:
        raise ParameterError("use at least 10^4 samples")
    rel = relevant or relevant_vectors(lat)
    b = lat.cartesian_float
    u, _, uinv = _reduced_frame(lat)
    breduced = u.astype(float) @ b
    bred_inv = np.linalg.inv(breduced)
    relc = rel.vectors.astype(float) @ b
    reln = np.einsum("ij,ij->i", relc, relc)
    chunk = max(1000, min(chunk, 20_000_000 // max(len(rel), 1)))
    rng = np.random.default_rng(seed)
    n = lat.n
    vol = float(lat.volume)
    s1 = 0.0
    s2 = 0.0
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        pts = rng.random((m, n)) @ b
        # Babai rounding first so the relevant-vector descent starts close
        pts -= np.rint(pts @ bred_inv) @ breduced
        err = _decode_with_relevant(pts, relc, reln)
        d2 = np.einsum("ij,ij->i", err, err)
        s1 += d2.sum()
        s2 += (d2 * d2).sum()
        done += m
    mean = s1 / samples
    var = max(s2 / samples - mean * mean, 0.0)
    norm = n * vol ** (2.0 / n)
    return MonteCarloEstimate(mean / norm, math.sqrt(var / samples) / norm, samples)
