"""Exact vectors and matrices with float shadows.

Every routine here is exact unless its name says otherwise (``rank_float``).
An optional ``gram`` argument turns the plain dot product into the bilinear
form ``x G y^T``; the lattice code works in basis coordinates and passes the
lattice Gram matrix here.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .exact import ExactScalar, as_exact, exact_sign, format_exact, parse_exact

__all__ = [
    "ShapeError",
    "RankDeficiencyError",
    "ExactVector",
    "ExactMatrix",
    "determinant",
    "solve",
    "solve_vertex_lift",
    "rank_float",
    "rank_exact",
    "project_complement",
    "gram_det",
    "inner",
]


class ShapeError(ValueError):
    pass


class RankDeficiencyError(ValueError):
    pass


_ZERO = Fraction(0)


class ExactVector:
    """Immutable exact vector; ``shadow`` is its float64 image."""

    __slots__ = ("components", "_shadow", "_key")

    def __init__(self, components: Iterable):
        self.components = tuple(as_exact(c) for c in components)
        self._shadow = None
        self._key = None

    @property
    def shadow(self) -> np.ndarray:
        if self._shadow is None:
            self._shadow = np.array([float(c) for c in self.components], dtype=float)
        return self._shadow

    def key(self) -> str:
        """Canonical serialization used for hashing and ordering."""
        if self._key is None:
            self._key = "(" + ",".join(format_exact(c) for c in self.components) + ")"
        return self._key

    def __len__(self):
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    def __getitem__(self, i):
        return self.components[i]

    def __eq__(self, other):
        return isinstance(other, ExactVector) and self.components == other.components

    def __hash__(self):
        return hash(self.components)

    def __add__(self, other):
        return ExactVector(a + b for a, b in zip(self, other))

    def __sub__(self, other):
        return ExactVector(a - b for a, b in zip(self, other))

    def __neg__(self):
        return ExactVector(-a for a in self)

    def __mul__(self, s):
        s = as_exact(s)
        return ExactVector(a * s for a in self)

    __rmul__ = __mul__

    def __truediv__(self, s):
        s = as_exact(s)
        return ExactVector(a / s for a in self)

    def dot(self, other, gram: Optional["ExactMatrix"] = None) -> ExactScalar:
        return inner(self, other, gram)

    def norm2(self, gram: Optional["ExactMatrix"] = None) -> ExactScalar:
        return inner(self, self, gram)

    def to_json(self) -> List[str]:
        return [format_exact(c) for c in self.components]

    @classmethod
    def from_json(cls, data: Sequence[str]) -> "ExactVector":
        return cls(parse_exact(s) for s in data)

    @classmethod
    def zeros(cls, n: int) -> "ExactVector":
        return cls([_ZERO] * n)

    def __repr__(self):
        return f"ExactVector{self.key()}"


def inner(x: Sequence, y: Sequence, gram: Optional["ExactMatrix"] = None) -> ExactScalar:
    if gram is None:
        acc: ExactScalar = _ZERO
        for a, b in zip(x, y):
            if a != 0 and b != 0:
                acc = acc + a * b
        return acc
    acc = _ZERO
    for i, a in enumerate(x):
        if a == 0:
            continue
        row = gram.rows[i]
        s: ExactScalar = _ZERO
        for g, b in zip(row, y):
            if g != 0 and b != 0:
                s = s + g * b
        acc = acc + a * s
    return acc


class ExactMatrix:
    """Immutable rectangular exact matrix stored row-major."""

    __slots__ = ("rows", "_shadow")

    def __init__(self, rows: Iterable[Iterable]):
        rows = [r if isinstance(r, ExactVector) else ExactVector(r) for r in rows]
        if not rows:
            raise ShapeError("matrix needs at least one row")
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            raise ShapeError("rows of unequal length")
        self.rows = tuple(rows)
        self._shadow = None

    @property
    def shape(self):
        return (len(self.rows), len(self.rows[0]))

    @property
    def shadow(self) -> np.ndarray:
        if self._shadow is None:
            self._shadow = np.array([r.shadow for r in self.rows])
        return self._shadow

    def __getitem__(self, ij):
        i, j = ij
        return self.rows[i][j]

    def __eq__(self, other):
        return isinstance(other, ExactMatrix) and self.rows == other.rows

    def __hash__(self):
        return hash(self.rows)

    @classmethod
    def identity(cls, n: int) -> "ExactMatrix":
        return cls([[Fraction(int(i == j)) for j in range(n)] for i in range(n)])

    @classmethod
    def diag(cls, entries: Sequence) -> "ExactMatrix":
        n = len(entries)
        return cls([[as_exact(entries[i]) if i == j else _ZERO for j in range(n)] for i in range(n)])

    @classmethod
    def block(cls, blocks: Sequence[Sequence[Optional["ExactMatrix"]]], sizes=None) -> "ExactMatrix":
        """Assemble from blocks; ``None`` blocks are zero of the inferred size."""
        heights = [next(b.shape[0] for b in row if b is not None) for row in blocks]
        widths = [
            next(blocks[i][j].shape[1] for i in range(len(blocks)) if blocks[i][j] is not None)
            for j in range(len(blocks[0]))
        ]
        rows = []
        for bi, row in enumerate(blocks):
            for r in range(heights[bi]):
                out = []
                for bj, b in enumerate(row):
                    if b is None:
                        out.extend([_ZERO] * widths[bj])
                    else:
                        out.extend(b.rows[r].components)
                rows.append(out)
        return cls(rows)

    def transpose(self) -> "ExactMatrix":
        k, m = self.shape
        return ExactMatrix([[self.rows[i][j] for i in range(k)] for j in range(m)])

    T = property(transpose)

    def __matmul__(self, other):
        if isinstance(other, ExactMatrix):
            cols = other.transpose().rows
            return ExactMatrix([[inner(r, c) for c in cols] for r in self.rows])
        raise TypeError("expected ExactMatrix")

    def __mul__(self, s):
        s = as_exact(s)
        return ExactMatrix([[a * s for a in r] for r in self.rows])

    __rmul__ = __mul__

    def __add__(self, other):
        return ExactMatrix([[a + b for a, b in zip(r1, r2)] for r1, r2 in zip(self.rows, other.rows)])

    def __sub__(self, other):
        return ExactMatrix([[a - b for a, b in zip(r1, r2)] for r1, r2 in zip(self.rows, other.rows)])

    def __neg__(self):
        return self * -1

    def vecmul(self, v: Sequence) -> ExactVector:
        """Row vector times matrix: ``v M``."""
        k, m = self.shape
        out = []
        for j in range(m):
            s: ExactScalar = _ZERO
            for i in range(k):
                a = v[i]
                if a != 0:
                    b = self.rows[i][j]
                    if b != 0:
                        s = s + a * b
            out.append(s)
        return ExactVector(out)

    def trace(self) -> ExactScalar:
        acc: ExactScalar = _ZERO
        for i in range(min(self.shape)):
            acc = acc + self.rows[i][i]
        return acc

    def is_symmetric(self) -> bool:
        return self == self.transpose()

    def inverse(self) -> "ExactMatrix":
        n, m = self.shape
        if n != m:
            raise ShapeError("inverse of non-square matrix")
        aug = [list(r.components) + [Fraction(int(i == j)) for j in range(n)] for i, r in enumerate(self.rows)]
        _gauss_jordan(aug, n)
        return ExactMatrix([row[n:] for row in aug])

    def to_json(self) -> List[List[str]]:
        return [r.to_json() for r in self.rows]

    @classmethod
    def from_json(cls, data) -> "ExactMatrix":
        return cls([[parse_exact(s) for s in row] for row in data])

    def __repr__(self):
        return "ExactMatrix(" + ", ".join(r.key() for r in self.rows) + ")"


def _gauss_jordan(aug: List[List[ExactScalar]], n: int) -> None:
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if piv is None:
            raise RankDeficiencyError("singular matrix")
        aug[col], aug[piv] = aug[piv], aug[col]
        inv = 1 / aug[col][col]
        aug[col] = [x * inv for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [x - f * y for x, y in zip(aug[r], aug[col])]


def determinant(m: ExactMatrix) -> ExactScalar:
    """Fraction-free (Bareiss) determinant."""
    n, k = m.shape
    if n != k:
        raise ShapeError("determinant of non-square matrix")
    a = [list(r.components) for r in m.rows]
    sign = 1
    prev: ExactScalar = Fraction(1)
    for col in range(n - 1):
        if a[col][col] == 0:
            piv = next((r for r in range(col + 1, n) if a[r][col] != 0), None)
            if piv is None:
                return Fraction(0)
            a[col], a[piv] = a[piv], a[col]
            sign = -sign
        p = a[col][col]
        for i in range(col + 1, n):
            for j in range(col + 1, n):
                a[i][j] = (a[i][j] * p - a[i][col] * a[col][j]) / prev
            a[i][col] = _ZERO
        prev = p
    return a[n - 1][n - 1] * sign


def solve(m: ExactMatrix, rhs: Sequence) -> ExactVector:
    """Solve ``M x^T = rhs`` exactly for square ``M``."""
    n, k = m.shape
    if n != k:
        raise ShapeError("solve needs a square matrix")
    aug = [list(r.components) + [as_exact(b)] for r, b in zip(m.rows, rhs)]
    _gauss_jordan(aug, n)
    return ExactVector(row[n] for row in aug)


def solve_vertex_lift(normals: Sequence[ExactVector], gram: Optional[ExactMatrix] = None) -> ExactVector:
    """The unique ``x`` with ``2 x.n_i = |n_i|^2`` for ``n`` independent normals."""
    if not normals:
        raise RankDeficiencyError("no normals")
    if gram is None:
        rows = [list(nv.components) for nv in normals]
    else:
        rows = [list(gram.vecmul(nv).components) for nv in normals]
    if len(rows) != len(rows[0]):
        raise ShapeError("need exactly n normals in dimension n")
    rhs = [inner(nv, nv, gram) / 2 for nv in normals]
    return solve(ExactMatrix(rows), rhs)


def rank_float(vectors: Sequence, eps: float = 1e-9) -> int:
    """Numerical rank of the shadows by complete-pivoting elimination.

    A pivot counts when it exceeds ``eps`` times the largest row norm.
    """
    if len(vectors) == 0:
        return 0
    a = np.array([v.shadow if isinstance(v, ExactVector) else np.asarray(v, float) for v in vectors], float)
    scale = max(float(np.max(np.linalg.norm(a, axis=1))), 1e-300)
    a = a / scale
    rank = 0
    rows, cols = a.shape
    while rank < min(rows, cols):
        sub = np.abs(a[rank:, :])
        i, j = np.unravel_index(np.argmax(sub), sub.shape)
        if sub[i, j] <= eps:
            break
        i += rank
        a[[rank, i]] = a[[i, rank]]
        a[rank + 1:] -= np.outer(a[rank + 1:, j] / a[rank, j], a[rank])
        rank += 1
    return rank


def rank_exact(vectors: Sequence) -> int:
    rows = [list(v) for v in vectors]
    if not rows:
        return 0
    m = len(rows[0])
    rank = 0
    for col in range(m):
        piv = next((r for r in range(rank, len(rows)) if rows[r][col] != 0), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        p = rows[rank][col]
        for r in range(rank + 1, len(rows)):
            if rows[r][col] != 0:
                f = rows[r][col] / p
                rows[r] = [x - f * y for x, y in zip(rows[r], rows[rank])]
        rank += 1
    return rank


def project_complement(
    basis: Sequence[ExactVector], target: ExactVector, gram: Optional[ExactMatrix] = None
) -> ExactVector:
    """Component of ``target`` orthogonal to ``span(basis)`` (unnormalized Gram-Schmidt)."""
    ortho: List[ExactVector] = []
    norms: List[ExactScalar] = []
    for b in basis:
        w = b
        for o, nrm in zip(ortho, norms):
            w = w - o * (inner(w, o, gram) / nrm)
        nrm = inner(w, w, gram)
        if nrm == 0:
            raise RankDeficiencyError("dependent basis")
        ortho.append(w)
        norms.append(nrm)
    out = target
    for o, nrm in zip(ortho, norms):
        out = out - o * (inner(out, o, gram) / nrm)
    return out


def gram_det(vectors: Sequence[ExactVector], gram: Optional[ExactMatrix] = None) -> ExactScalar:
    """Determinant of the matrix of pairwise inner products."""
    if not vectors:
        return Fraction(1)
    g = ExactMatrix([[inner(a, b, gram) for b in vectors] for a in vectors])
    return determinant(g)


def sign(x) -> int:
    return exact_sign(x)
