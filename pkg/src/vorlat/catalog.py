"""Named lattices with exact generators and symmetry generators."""

from __future__ import annotations

import json
import re
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .exact import QuadraticNumber, as_exact, parse_exact
from .lattice import Lattice, LatticeError, laminate
from .linalg import ExactMatrix, ExactVector

__all__ = [
    "get_lattice",
    "available_lattices",
    "load_generator_file",
    "cubic",
    "root_lattice_a",
    "root_lattice_d",
    "hexagonal",
    "coxeter_todd",
    "coxeter_todd_deep_hole",
    "laminated_coxeter_todd",
    "hexagonal_deep_hole",
    "signed_permutation_generators",
]

F = Fraction
S3 = QuadraticNumber.sqrt(3)
HALF = F(1, 2)


def _m(rows) -> ExactMatrix:
    return ExactMatrix([[as_exact(c) for c in r] for r in rows])


def _perm_matrix(perm: Sequence[int], signs: Optional[Sequence[int]] = None) -> np.ndarray:
    n = len(perm)
    out = np.zeros((n, n), dtype=np.int64)
    for i, p in enumerate(perm):
        out[i, p] = 1 if signs is None else signs[i]
    return out


def signed_permutation_generators(n: int) -> List[np.ndarray]:
    """Generators of the hyperoctahedral group acting on R^n by x -> x M."""
    gens = [_perm_matrix([(i + 1) % n for i in range(n)])]
    if n > 1:
        gens.append(_perm_matrix([1, 0] + list(range(2, n))))
    gens.append(_perm_matrix(list(range(n)), [-1] + [1] * (n - 1)))
    return gens


def _np_to_exact(a: np.ndarray) -> ExactMatrix:
    return ExactMatrix([[F(int(x)) for x in row] for row in a])


def cubic(n: int) -> Lattice:
    if n < 1:
        raise LatticeError("dimension must be positive")
    gen = ExactMatrix.identity(n)
    return Lattice(generator=gen, cartesian_symmetry=[_np_to_exact(g) for g in signed_permutation_generators(n)], name=f"Z{n}")


def hexagonal() -> Lattice:
    """A2 with minimal norm 1 and its dihedral symmetry of order 12."""
    gen = _m([[1, 0], [-HALF, S3 / 2]])
    rot60 = _m([[HALF, S3 / 2], [-S3 / 2, HALF]])
    refl = _m([[1, 0], [0, -1]])
    return Lattice(generator=gen, cartesian_symmetry=[rot60, refl], name="A2")


def _an_symmetries(n: int) -> List[np.ndarray]:
    """S_{n+1} x {+-1} acting on coordinates in the simple-root basis."""

    def basis_image(perm):
        rows = []
        for i in range(n):
            x = [0] * (n + 1)
            x[i], x[i + 1] = 1, -1
            y = [0] * (n + 1)
            for j, p in enumerate(perm):
                y[p] = x[j]
            rows.append(list(np.cumsum(y)[:n]))
        return np.array(rows, dtype=np.int64)

    gens = [basis_image([(i + 1) % (n + 1) for i in range(n + 1)]), basis_image([1, 0] + list(range(2, n + 1)))]
    gens.append(-np.eye(n, dtype=np.int64))
    return gens


def root_lattice_a(n: int) -> Lattice:
    """A_n; exact square generators for n <= 3, Gram (Cartan) form above."""
    if n < 1:
        raise LatticeError("dimension must be positive")
    if n == 1:
        return Lattice(generator=_m([[1]]), cartesian_symmetry=[_m([[-1]])], name="A1")
    if n == 2:
        return hexagonal()
    if n == 3:
        lat = root_lattice_d(3)
        lat.name = "A3"
        return lat
    gram = ExactMatrix([[F(2) if i == j else F(-1) if abs(i - j) == 1 else F(0) for j in range(n)] for i in range(n)])
    return Lattice(gram, symmetry=_an_symmetries(n), name=f"A{n}")


def root_lattice_d(n: int) -> Lattice:
    if n < 2:
        raise LatticeError("D_n needs n >= 2")
    rows = []
    first = [0] * n
    first[0], first[1] = -1, -1
    rows.append(first)
    for i in range(n - 1):
        r = [0] * n
        r[i], r[i + 1] = 1, -1
        rows.append(r)
    gen = _m(rows)
    syms = [_np_to_exact(g) for g in signed_permutation_generators(n)]
    if n == 4:
        h = [[1, 1, 1, 1], [1, 1, -1, -1], [1, -1, 1, -1], [1, -1, -1, 1]]
        syms.append(_m([[F(c, 2) for c in r] for r in h]))
    return Lattice(generator=gen, cartesian_symmetry=syms, name=f"D{n}")


def hexagonal_deep_hole() -> ExactVector:
    """Cartesian deep hole of :func:`hexagonal` (centroid of a Delaunay triangle)."""
    return ExactVector([HALF, S3 / 6])


# -- Coxeter-Todd lattice ----------------------------------------------------

_A = _m([[1, 0], [-HALF, S3 / 2]])
_W = _m([[-HALF, S3 / 2], [-HALF, -S3 / 2]])
_I2 = ExactMatrix.identity(2)
_S = _m([[1, 0], [0, -1]])
_V = _m([[HALF, S3 / 2], [-S3 / 2, HALF]])
_Y = _m([[-HALF, -S3 / 2], [-S3 / 2, HALF]])
_Yp = _m([[-HALF, S3 / 2], [S3 / 2, HALF]])


_Z2 = ExactMatrix([[F(0), F(0)], [F(0), F(0)]])


def _blocks(layout, scale=F(1)) -> ExactMatrix:
    """Assemble 2x2 blocks; a literal 0 stands for a zero block."""
    return ExactMatrix.block([[_Z2 if isinstance(b, int) else b for b in row] for row in layout]) * scale


def _coxeter_todd_generator() -> ExactMatrix:
    A2_, A, W = _A * 2, _A, _W
    return _blocks(
        [
            [A2_, 0, 0, 0, 0, 0],
            [0, A2_, 0, 0, 0, 0],
            [0, 0, A2_, 0, 0, 0],
            [A, W, W, A, 0, 0],
            [W, A, W, 0, A, 0],
            [W, W, A, 0, 0, A],
        ]
    )


def _coxeter_todd_symmetries() -> List[ExactMatrix]:
    I, S, V = _I2, _S, _V
    Vt, mI = _V.T, -_I2
    m1 = _blocks(
        [
            [0, I, 0, 0, 0, 0],
            [I, 0, 0, 0, 0, 0],
            [0, 0, I, 0, 0, 0],
            [0, 0, 0, 0, I, 0],
            [0, 0, 0, I, 0, 0],
            [0, 0, 0, 0, 0, I],
        ]
    )
    m2 = _blocks([[S if j == 5 - i else 0 for j in range(6)] for i in range(6)])
    m3 = _blocks(
        [
            [I, V, mI, 0, V, 0],
            [Vt, I, Vt, 0, mI, 0],
            [mI, V, I, 0, V, 0],
            [0, 0, 0, I * 2, 0, 0],
            [Vt, mI, Vt, 0, I, 0],
            [0, 0, 0, 0, 0, I * 2],
        ],
        HALF,
    )
    return [m1, m2, m3]


def coxeter_todd() -> Lattice:
    return Lattice(generator=_coxeter_todd_generator(), cartesian_symmetry=_coxeter_todd_symmetries(), name="K12")


def coxeter_todd_deep_hole() -> ExactVector:
    c = [F(0)] * 12
    c[9] = c[11] = 2 * S3 / 3
    return ExactVector(c)


def _embed(m: ExactMatrix, last) -> ExactMatrix:
    one = ExactMatrix([[as_exact(last)]])
    return ExactMatrix.block([[m, None], [None, one]])


def laminated_coxeter_todd_symmetries() -> List[ExactMatrix]:
    """Stored generators of the symmetry group of the deep-hole lamination of K12."""
    I, S, V, Y, Yp = _I2, _S, _V, _Y, _Yp
    Vt, mI, mS, mV, mY, mYp = _V.T, -_I2, -_S, -_V, -_Y, -_Yp
    m1 = _blocks(
        [
            [0, I, 0, V, mI, mV],
            [0, mV, V, 0, mI, I],
            [Vt * 2, 0, 0, 0, 0, 0],
            [0, 0, mI, V, V, I],
            [0, I, V, mI, V, 0],
            [0, V, I, I, 0, V],
        ],
        HALF,
    )
    m2 = _blocks(
        [
            [0, mS, 0, Y, mS, Y],
            [S * 2, 0, 0, 0, 0, 0],
            [0, Yp, 0, mS, mYp, S],
            [0, 0, mS * 2, 0, 0, 0],
            [0, Yp, 0, S, mYp, mS],
            [0, mS, 0, mY, mS, mY],
        ],
        HALF,
    )
    m3 = ExactMatrix.diag([1] * 8 + [-1] * 5)
    return [_embed(m1, 1), _embed(m2, 1), m3]


def laminated_coxeter_todd(a=F(34, 33), with_symmetry: bool = True) -> Lattice:
    base = coxeter_todd()
    lat = laminate(base, coxeter_todd_deep_hole(), a, name="K12-laminated")
    if with_symmetry:
        lat = Lattice(generator=lat.generator, cartesian_symmetry=laminated_coxeter_todd_symmetries(), name=lat.name)
    return lat


# -- lookup ------------------------------------------------------------------

_FIXED: Dict[str, Callable[[], Lattice]] = {
    "K12": coxeter_todd,
    "K12-laminated": laminated_coxeter_todd,
}


def available_lattices() -> List[str]:
    return ["Z<n>", "A<n>", "D<n>", "K12", "K12-laminated"]


def get_lattice(name: str, a=None) -> Lattice:
    """Look up ``Z<n>``, ``A<n>``, ``D<n>``, ``K12`` or ``K12-laminated``.

    ``a`` sets the layer spacing for ``K12-laminated``.
    """
    if name == "K12-laminated":
        return laminated_coxeter_todd(as_exact(a) if a is not None else F(34, 33))
    if name in _FIXED:
        return _FIXED[name]()
    m = re.fullmatch(r"([ZAD])(\d+)", name)
    if not m:
        raise KeyError(f"unknown lattice {name!r}; known: {', '.join(available_lattices())}")
    kind, n = m.group(1), int(m.group(2))
    return {"Z": cubic, "A": root_lattice_a, "D": root_lattice_d}[kind](n)


def load_generator_file(path: str) -> Lattice:
    """Read ``{"d": 3, "generator": [[...]], "symmetry": [[[...]]], "name": ...}``.

    Entries are exact-scalar strings such as ``"1/2"`` or ``"0+1/2*sqrt(3)"``;
    symmetry matrices act on Cartesian row vectors.
    """
    with open(path) as fh:
        data = json.load(fh)
    gen = ExactMatrix([[parse_exact(str(c)) for c in row] for row in data["generator"]])
    d = int(data.get("d", 1))
    for row in gen.rows:
        for c in row:
            if isinstance(c, QuadraticNumber) and c.d != d:
                raise LatticeError(f"entry {c} outside the declared field Q(sqrt({d}))")
    syms = [ExactMatrix([[parse_exact(str(c)) for c in row] for row in m]) for m in data.get("symmetry", [])]
    return Lattice(generator=gen, cartesian_symmetry=syms, name=data.get("name", path))
