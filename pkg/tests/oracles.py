"""Independent brute-force references used by the tests.

Nothing here uses the symmetry machinery: relevant vectors come from a box
search with Voronoi's coset criterion, vertices from all n-subsets of
bisectors, faces from closing facet vertex sets under intersection, and
moments from a flag triangulation with the closed-form simplex moments.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from typing import Dict, FrozenSet, List, Sequence, Tuple

import numpy as np


def _dot(x, g, y):
    n = len(x)
    return sum(x[i] * g[i][j] * y[j] for i in range(n) for j in range(n))


def _solve(a: List[List[Fraction]], b: List[Fraction]):
    n = len(a)
    m = [list(r) + [v] for r, v in zip(a, b)]
    for c in range(n):
        p = next((r for r in range(c, n) if m[r][c] != 0), None)
        if p is None:
            return None
        m[c], m[p] = m[p], m[c]
        for r in range(n):
            if r != c and m[r][c] != 0:
                f = m[r][c] / m[c][c]
                m[r] = [x - f * y for x, y in zip(m[r], m[c])]
    return [m[i][n] / m[i][i] for i in range(n)]


def _det(a: List[List[Fraction]]) -> Fraction:
    m = [list(r) for r in a]
    n = len(m)
    det = Fraction(1)
    for c in range(n):
        p = next((r for r in range(c, n) if m[r][c] != 0), None)
        if p is None:
            return Fraction(0)
        if p != c:
            m[c], m[p] = m[p], m[c]
            det = -det
        det *= m[c][c]
        for r in range(c + 1, n):
            f = m[r][c] / m[c][c]
            m[r] = [x - f * y for x, y in zip(m[r], m[c])]
    return det


def _rank(rows: List[List[Fraction]]) -> int:
    m = [list(r) for r in rows]
    if not m:
        return 0
    rank, cols = 0, len(m[0])
    for c in range(cols):
        p = next((r for r in range(rank, len(m)) if m[r][c] != 0), None)
        if p is None:
            continue
        m[rank], m[p] = m[p], m[rank]
        for r in range(len(m)):
            if r != rank and m[r][c] != 0:
                f = m[r][c] / m[rank][c]
                m[r] = [x - f * y for x, y in zip(m[r], m[rank])]
        rank += 1
    return rank


def relevant_vectors_box(gram: Sequence[Sequence[Fraction]], bound: int = 3) -> List[Tuple[int, ...]]:
    """Voronoi-relevant vectors: ``+-v`` are the only minima of ``v + 2L`` (box search)."""
    n = len(gram)
    den = 1
    for row in gram:
        for c in row:
            den = den * Fraction(c).denominator // math.gcd(den, Fraction(c).denominator)
    g = np.array([[int(Fraction(c) * den) for c in row] for row in gram], dtype=np.int64)
    z = np.array(list(itertools.product(range(-bound, bound + 1), repeat=n)), dtype=np.int64)
    norms = np.einsum("ij,jk,ik->i", z, g, z)
    keys = (z % 2) @ (1 << np.arange(n))
    out = []
    for key in range(1, 2 ** n):
        sel = keys == key
        m = norms[sel].min()
        winners = z[sel][norms[sel] == m]
        if len(winners) == 2:
            out.extend(tuple(int(x) for x in w) for w in winners)
    return sorted(out)


def vertices_bruteforce(gram, relevant) -> List[Tuple[Fraction, ...]]:
    """Points satisfying ``n`` independent bisector equations and all inequalities."""
    n = len(gram)
    g = [[Fraction(c) for c in r] for r in gram]
    rows = [[2 * sum(Fraction(r[i]) * g[i][j] for i in range(n)) for j in range(n)] for r in relevant]
    rhs = [_dot(r, g, r) for r in relevant]
    out = set()
    for sub in itertools.combinations(range(len(relevant)), n):
        u = _solve([rows[i] for i in sub], [rhs[i] for i in sub])
        if u is None:
            continue
        if all(sum(rows[k][j] * u[j] for j in range(n)) <= rhs[k] for k in range(len(relevant))):
            out.add(tuple(u))
    return sorted(out)


class NaiveCell:
    """Full face lattice and exact moments of a Voronoi cell, without symmetry."""

    def __init__(self, gram, bound: int = 3):
        self.n = n = len(gram)
        self.gram = [[Fraction(c) for c in r] for r in gram]
        self.relevant = relevant_vectors_box(self.gram, bound)
        self.vertices = vertices_bruteforce(self.gram, self.relevant)
        g = self.gram
        rows = [[2 * sum(Fraction(r[i]) * g[i][j] for i in range(n)) for j in range(n)] for r in self.relevant]
        rhs = [_dot(r, g, r) for r in self.relevant]
        self.incidence = [
            frozenset(k for k in range(len(self.relevant)) if sum(rows[k][j] * v[j] for j in range(n)) == rhs[k])
            for v in self.vertices
        ]
        self.faces: Dict[int, List[FrozenSet[int]]] = {n: [frozenset(range(len(self.vertices)))]}
        facets = [frozenset(i for i, inc in enumerate(self.incidence) if k in inc) for k in range(len(self.relevant))]
        self.faces[n - 1] = sorted(set(facets), key=sorted)
        for d in range(n - 2, -1, -1):
            found = set()
            for f1, f2 in itertools.combinations(self.faces[d + 1], 2):
                s = f1 & f2
                if s and self.dim(s) == d:
                    found.add(s)
            self.faces[d] = sorted(found, key=sorted)

    def dim(self, vset) -> int:
        common = frozenset.intersection(*(self.incidence[i] for i in vset))
        return self.n - _rank([[Fraction(c) for c in self.relevant[k]] for k in common])

    def face_counts(self) -> List[int]:
        return [len(self.faces[d]) for d in range(self.n + 1)]

    def moments(self) -> Tuple[Fraction, Fraction]:
        """``(Vol, U)`` divided by ``sqrt(det Gram)``, from a flag triangulation."""
        n = self.n
        cent: Dict[FrozenSet[int], Tuple[Fraction, ...]] = {}

        def c(face):
            if face not in cent:
                pts = [self.vertices[i] for i in face]
                cent[face] = tuple(sum(p[j] for p in pts) / len(pts) for j in range(n))
            return cent[face]

        vol = Fraction(0)
        second = Fraction(0)

        def flags(face, d, chain):
            nonlocal vol, second
            if d == 0:
                pts = [tuple(Fraction(0) for _ in range(n))] + [c(f) for f in chain]
                m = [[p[j] - pts[0][j] for j in range(n)] for p in pts[1:]]
                v = abs(_det(m)) / math.factorial(n)
                tot = tuple(sum(p[j] for p in pts) for j in range(n))
                s = sum(_dot(p, self.gram, p) for p in pts) + _dot(tot, self.gram, tot)
                vol += v
                second += v * s / ((n + 1) * (n + 2))
                return
            for sub in self.faces[d - 1]:
                if sub <= face:
                    flags(sub, d - 1, chain + [sub])

        top = self.faces[n][0]
        for f in self.faces[n - 1]:
            flags(f, n - 1, [f])
        return vol, second

    def face_moments(self, face: FrozenSet[int], span: Sequence[Sequence[Fraction]]):
        """Chart volume, barycenter and second-moment tensor of one face.

        Measures are relative to the parallelotope of ``span`` (rows spanning
        the face's direction space), matching the recursion's conventions.
        """
        n = self.n
        d = len(span)
        span = [[Fraction(c) for c in r] for r in span]
        piv = []
        for j in range(n):
            if _rank([[r[k] for k in piv + [j]] for r in span]) > len(piv):
                piv.append(j)
        sq = [[r[k] for k in piv] for r in span]

        def chart_det(vecs):
            # coefficients of vecs in the span basis, via the pivot columns
            coef = [_solve([list(col) for col in zip(*sq)], [v[k] for k in piv]) for v in vecs]
            return abs(_det(coef))

        def cent(f):
            pts = [self.vertices[i] for i in f]
            return tuple(sum(p[j] for p in pts) / len(pts) for j in range(n))

        subfaces = {k: [f for f in self.faces[k] if f <= face] for k in range(d + 1)}
        vol = Fraction(0)
        first = [Fraction(0)] * n
        tensor = [[Fraction(0)] * n for _ in range(n)]

        def flags(f, k, chain):
            nonlocal vol
            if k == 0:
                pts = [cent(g) for g in chain]
                base = pts[0]
                v = chart_det([[p[j] - base[j] for j in range(n)] for p in pts[1:]]) / math.factorial(d) if d else Fraction(1)
                tot = [sum(p[j] for p in pts) for j in range(n)]
                vol += v
                for j in range(n):
                    first[j] += v * tot[j] / (d + 1)
                for a in range(n):
                    for b in range(n):
                        m2 = sum(p[a] * p[b] for p in pts) + tot[a] * tot[b]
                        tensor[a][b] += v * m2 / ((d + 1) * (d + 2))
                return
            for g in subfaces[k - 1]:
                if g <= f and g != f:
                    flags(g, k - 1, chain + [g])

        flags(face, d, [face])
        return vol, [x / vol for x in first], tensor

    def G(self, dps: int = 30) -> float:
        import mpmath

        vol, second = self.moments()
        det = _det(self.gram)
        with mpmath.workdps(dps):
            v = mpmath.mpf(vol.numerator) / vol.denominator
            u = mpmath.mpf(second.numerator) / second.denominator
            d = mpmath.mpf(det.numerator) / det.denominator
            # true Vol = v sqrt(det), true U = u sqrt(det)
            return u * mpmath.sqrt(d) / (self.n * (v * mpmath.sqrt(d)) ** (1 + mpmath.mpf(2) / self.n))


def hexagon_second_moment(r: Fraction = Fraction(1)) -> Tuple[Fraction, Fraction]:
    """Regular hexagon with inradius ``r``: (area, U) both divided by sqrt(3).

    Splits the hexagon into six triangles (origin, two adjacent corners) and
    integrates ``|x|^2`` over each with the triangle moment formula.
    Corners lie at distance ``2r/sqrt(3)``; in units where ``sqrt(3)`` is
    factored out the triangle with corners at angles 0 and 60 degrees has
    area ``r^2/sqrt(3)`` and the formula stays rational.
    """
    # corner radius squared R^2 = 4 r^2 / 3; |p_i + p_j|^2 for adjacent corners = 3 R^2
    R2 = 4 * r * r / 3
    tri_area_over_sqrt3 = r * r / 3  # (sqrt(3)/4) R^2 / sqrt(3)
    # int |x|^2 over triangle (0, p, q) = A/12 (|p|^2 + |q|^2 + |p + q|^2)
    tri_U = tri_area_over_sqrt3 / 12 * (R2 + R2 + 3 * R2)
    return 6 * tri_area_over_sqrt3, 6 * tri_U


def hexagon_G() -> Tuple[Fraction, int]:
    """``G = q * sqrt(3)`` for the regular hexagon; returns ``(q, 3)``.

    ``G = U / (2 A^2)`` with ``A = a sqrt(3)``, ``U = u sqrt(3)`` gives
    ``u / (2 a^2 sqrt(3)) = u sqrt(3) / (6 a^2)``.
    """
    a, u = hexagon_second_moment()
    return u / (6 * a * a), 3


def polygon_second_moment(vertices: Sequence[Tuple[Fraction, Fraction]]) -> Tuple[Fraction, Fraction]:
    """Area and ``int |x|^2`` of a convex polygon listed counter-clockwise, exactly."""
    area = Fraction(0)
    second = Fraction(0)
    m = len(vertices)
    for i in range(m):
        x0, y0 = vertices[i]
        x1, y1 = vertices[(i + 1) % m]
        cr = x0 * y1 - x1 * y0
        area += cr / 2
        second += cr * (x0 * x0 + x0 * x1 + x1 * x1 + y0 * y0 + y0 * y1 + y1 * y1) / 12
    return area, second


def centered_rectangular_cell(a: Fraction) -> List[Tuple[Fraction, Fraction]]:
    """Voronoi cell of the lattice with basis (1, 0), (1/2, a) by half-plane clipping."""
    pts = [(Fraction(i) + Fraction(j, 2), j * a) for i in range(-3, 4) for j in range(-3, 4) if (i, j) != (0, 0)]
    big = Fraction(100)
    poly = [(-big, -big), (big, -big), (big, big), (-big, big)]
    for px, py in pts:
        c = (px * px + py * py) / 2
        out = []
        for k in range(len(poly)):
            x0, y0 = poly[k]
            x1, y1 = poly[(k + 1) % len(poly)]
            s0 = px * x0 + py * y0 - c
            s1 = px * x1 + py * y1 - c
            if s0 <= 0:
                out.append((x0, y0))
            if (s0 < 0 < s1) or (s1 < 0 < s0):
                t = s0 / (s0 - s1)
                out.append((x0 + t * (x1 - x0), y0 + t * (y1 - y0)))
        poly = out
    return poly
