"""Finite symmetry groups of lattices as permutation groups on relevant vectors.

Elements are integer matrices ``R`` acting on basis coordinates from the
right (``u -> u R``).  Since the relevant vectors span the space and are
permuted by every automorphism, each element is stored as the permutation it
induces on their indices.  Composition follows the row-vector convention:
``compose(a, b)`` applies ``a`` first, then ``b``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, Hashable, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .lattice import Lattice, RelevantVectorSet

__all__ = [
    "SymmetryError",
    "InvarianceError",
    "FaithfulnessError",
    "ClassMismatchError",
    "ResourceError",
    "compose",
    "inverse",
    "identity",
    "PermutationGroup",
    "MatrixGroup",
    "Coset",
    "ClassifiedVectorIndex",
    "orbit_with_witnesses",
    "to_permutation_group",
    "stabilizer",
    "set_stabilizer",
    "transformation_coset",
    "coset_intersect",
    "discover_laminated_symmetry",
    "ChainLevel",
    "TransporterChain",
    "GlobalOrbits",
    "BudgetExceeded",
    "search_transporters",
]


class SymmetryError(ValueError):
    pass


class InvarianceError(SymmetryError):
    pass


class FaithfulnessError(SymmetryError):
    pass


class ClassMismatchError(SymmetryError):
    pass


class ResourceError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# permutation helpers
# ---------------------------------------------------------------------------


def _dtype(degree: int):
    return np.int16 if degree < 2 ** 15 else np.int32


def identity(degree: int) -> np.ndarray:
    return np.arange(degree, dtype=_dtype(degree))


def compose(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``a`` then ``b``."""
    return b[a]


def inverse(a: np.ndarray) -> np.ndarray:
    out = np.empty_like(a)
    out[a] = np.arange(len(a), dtype=a.dtype)
    return out


def is_identity(a: np.ndarray) -> bool:
    return bool(np.all(a == np.arange(len(a))))


_MIX = np.uint64(0x9E3779B97F4A7C15)


def _mix64(x: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer; a nonlinear per-element hash for set keys."""
    with np.errstate(over="ignore"):
        z = x.astype(np.uint64) + _MIX
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def set_hash(indices: np.ndarray) -> int:
    with np.errstate(over="ignore"):
        return int(_mix64(np.asarray(indices)).sum(dtype=np.uint64))


# ---------------------------------------------------------------------------
# Schreier-Sims
# ---------------------------------------------------------------------------


class _Level:
    """One level of a stabilizer chain: base point, strong generators, Schreier tree."""

    __slots__ = ("base", "gens", "parent", "via", "orbit", "_reps", "_cache_cap")

    def __init__(self, base: int, degree: int, cache_cap: int):
        self.base = int(base)
        self.gens: List[np.ndarray] = []
        self.parent = np.full(degree, -1, dtype=np.int32)
        self.via = np.full(degree, -1, dtype=np.int32)
        self.parent[base] = base
        self.orbit = np.array([base], dtype=np.int64)
        self._reps: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}
        self._cache_cap = cache_cap

    def copy(self) -> "_Level":
        lv = _Level.__new__(_Level)
        lv.base = self.base
        lv.gens = list(self.gens)
        lv.parent = self.parent.copy()
        lv.via = self.via.copy()
        lv.orbit = self.orbit.copy()
        lv._reps = {}
        lv._cache_cap = self._cache_cap
        return lv

    def add_gen(self, g: np.ndarray) -> None:
        self.gens.append(g)
        gi = len(self.gens) - 1
        frontier = self._extend(self.orbit, [(gi, g)])
        allg = list(enumerate(self.gens))
        while len(frontier):
            frontier = self._extend(frontier, allg)
        self._reps.clear()

    def _extend(self, pts: np.ndarray, gens) -> np.ndarray:
        found = []
        for gi, g in gens:
            img = g[pts].astype(np.int64)
            mask = self.parent[img] < 0
            if not mask.any():
                continue
            img, src = img[mask], pts[mask]
            img, first = np.unique(img, return_index=True)
            self.parent[img] = src[first]
            self.via[img] = gi
            found.append(img)
        if not found:
            return np.zeros(0, dtype=np.int64)
        new = np.concatenate(found)
        self.orbit = np.concatenate([self.orbit, new])
        return new

    def contains(self, p: int) -> bool:
        return self.parent[p] >= 0

    def rep(self, p: int) -> Tuple[np.ndarray, np.ndarray]:
        """``(u, u^-1)`` with ``u`` mapping the base point to ``p``."""
        hit = self._reps.get(p)
        if hit is not None:
            return hit
        path = []
        q = int(p)
        while q != self.base:
            path.append(int(self.via[q]))
            q = int(self.parent[q])
        u = np.arange(len(self.parent), dtype=self.gens[0].dtype if self.gens else _dtype(len(self.parent)))
        for gi in reversed(path):
            u = self.gens[gi][u]
        out = (u, inverse(u))
        if len(self._reps) < self._cache_cap:
            self._reps[p] = out
        return out


class _Chain:
    def __init__(self, degree: int, levels: List[_Level]):
        self.degree = degree
        self.levels = levels

    @property
    def order(self) -> int:
        return math.prod(len(l.orbit) for l in self.levels)

    @property
    def base(self) -> List[int]:
        return [l.base for l in self.levels]

    def sift(self, g: np.ndarray, start: int = 0) -> Tuple[np.ndarray, int]:
        for i in range(start, len(self.levels)):
            lv = self.levels[i]
            b = int(g[lv.base])
            if lv.parent[b] < 0:
                return g, i
            if b != lv.base:
                g = lv.rep(b)[1][g]
        return g, len(self.levels)


def _cache_cap(degree: int) -> int:
    return max(64, 40_000_000 // max(degree, 1))


class _RandomSource:
    """Product-replacement random elements."""

    def __init__(self, gens: Sequence[np.ndarray], degree: int, seed: int = 0):
        self.rng = np.random.default_rng(seed)
        base = list(gens) if gens else [identity(degree)]
        k = max(10, 2 * len(base))
        self.slots = [base[i % len(base)].copy() for i in range(k)]
        self.acc = identity(degree)
        for _ in range(60):
            self.next()

    def next(self) -> np.ndarray:
        k = len(self.slots)
        i, j = self.rng.choice(k, size=2, replace=False)
        b = self.slots[j] if self.rng.random() < 0.5 else inverse(self.slots[j])
        if self.rng.random() < 0.5:
            self.slots[i] = compose(self.slots[i], b)
        else:
            self.slots[i] = compose(b, self.slots[i])
        self.acc = compose(self.acc, self.slots[i])
        return self.acc


def _schreier_sims(
    degree: int,
    gens: Sequence[np.ndarray],
    base_prefix: Sequence[int] = (),
    order: Optional[int] = None,
    seed: int = 0,
    source: Optional[Callable[[], np.ndarray]] = None,
) -> _Chain:
    """Randomized Schreier-Sims; exact when ``order`` is known, otherwise verified.

    Without a known order the random phase stops after a run of sifts that
    change nothing and a deterministic Schreier-generator check follows.
    ``source`` replaces the product-replacement generator, e.g. to feed
    random elements of a subgroup known only through a membership oracle.
    """
    cap = _cache_cap(degree)
    chain = _Chain(degree, [_Level(b, degree, cap) for b in base_prefix])
    ident = identity(degree)
    gens = [np.asarray(g, dtype=ident.dtype) for g in gens if not is_identity(g)]

    def add(h: np.ndarray, j: int) -> None:
        if j == len(chain.levels):
            moved = np.nonzero(h != ident)[0]
            chain.levels.append(_Level(int(moved[0]), degree, cap))
        for i in range(j + 1):
            chain.levels[i].add_gen(h)

    def absorb(g: np.ndarray) -> bool:
        h, j = chain.sift(g)
        if j < len(chain.levels) or not is_identity(h):
            add(h, j)
            return True
        return False

    for g in gens:
        absorb(g)
    if not gens and source is None:
        return chain
    nxt = source if source is not None else _RandomSource(gens, degree, seed).next
    if order is not None:
        stall = 0
        while chain.order < order:
            if absorb(nxt()):
                stall = 0
            else:
                stall += 1
                if stall > 2000:  # pragma: no cover
                    raise SymmetryError("random Schreier-Sims did not reach the expected order")
        if chain.order != order:
            raise SymmetryError(f"group order {chain.order} exceeds the expected {order}")
        return chain
    while True:
        quiet = 0
        while quiet < 40:
            quiet = 0 if absorb(nxt()) else quiet + 1
        if _verify(chain, add):
            return chain


def _verify(chain: _Chain, add) -> bool:
    """Sift every Schreier generator; adds a residue and returns False on failure."""
    for i in range(len(chain.levels) - 1, -1, -1):
        lv = chain.levels[i]
        for p in lv.orbit:
            u, _ = lv.rep(int(p))
            for s in lv.gens:
                q = int(s[u[lv.base]])
                sch = compose(compose(u, s), lv.rep(q)[1])
                h, j = chain.sift(sch, i + 1)
                if j < len(chain.levels) or not is_identity(h):
                    add(h, j)
                    return False
    return True


# ---------------------------------------------------------------------------
# permutation groups
# ---------------------------------------------------------------------------


class PermutationGroup:
    """Permutation group with a lazily built base and strong generating set."""

    def __init__(self, degree: int, gens: Sequence[np.ndarray], order: Optional[int] = None, seed: int = 0):
        self.degree = int(degree)
        dt = _dtype(self.degree)
        self.gens = [np.asarray(g, dtype=dt) for g in gens]
        for g in self.gens:
            if g.shape != (self.degree,) or not np.array_equal(np.sort(g), np.arange(self.degree)):
                raise SymmetryError("generator is not a permutation of the ground set")
        self._order = order
        self._seed = seed
        self._chain: Optional[_Chain] = None
        self._based: Dict[Tuple[int, ...], _Chain] = {}

    @classmethod
    def _from_chain(cls, degree: int, chain: _Chain, gens=None) -> "PermutationGroup":
        g = cls.__new__(cls)
        g.degree = degree
        g.gens = list(gens) if gens is not None else (list(chain.levels[0].gens) if chain.levels else [])
        g._order = chain.order
        g._seed = 0
        g._chain = chain
        g._based = {}
        return g

    @property
    def chain(self) -> _Chain:
        if self._chain is None:
            self._chain = _schreier_sims(self.degree, self.gens, order=self._order, seed=self._seed)
            self._order = self._chain.order
        return self._chain

    @property
    def order(self) -> int:
        if self._order is None:
            return self.chain.order
        return self._order

    def identity(self) -> np.ndarray:
        return identity(self.degree)

    def contains(self, g: np.ndarray) -> bool:
        h, j = self.chain.sift(np.asarray(g, dtype=_dtype(self.degree)))
        return j == len(self.chain.levels) and is_identity(h)

    def with_base(self, prefix: Sequence[int]) -> _Chain:
        key = tuple(int(p) for p in prefix)
        ch = self._based.get(key)
        if ch is None:
            ch = _schreier_sims(self.degree, self.gens, base_prefix=key, order=self.order, seed=self._seed + 1)
            if len(self._based) > 64:
                self._based.clear()
            self._based[key] = ch
        return ch

    def pointwise_stabilizer(self, points: Sequence[int]) -> "PermutationGroup":
        ch = self.with_base(points)
        k = len(points)
        rest = [lv.copy() for lv in ch.levels[k:]]
        return PermutationGroup._from_chain(self.degree, _Chain(self.degree, rest))

    def stabilizer(self, point: int) -> "PermutationGroup":
        return self.pointwise_stabilizer([point])

    def orbit(self, point: int) -> np.ndarray:
        seen = np.zeros(self.degree, dtype=bool)
        seen[point] = True
        frontier = np.array([point])
        while len(frontier):
            nxt = []
            for g in self.gens:
                img = g[frontier].astype(np.int64)
                img = np.unique(img[~seen[img]])
                seen[img] = True
                nxt.append(img)
            frontier = np.concatenate(nxt) if nxt else np.zeros(0, dtype=np.int64)
        return np.nonzero(seen)[0]

    def orbits(self) -> List[np.ndarray]:
        done = np.zeros(self.degree, dtype=bool)
        out = []
        for p in range(self.degree):
            if not done[p]:
                o = self.orbit(p)
                done[o] = True
                out.append(o)
        return out

    def random_elements(self, count: int, seed: int = 0) -> List[np.ndarray]:
        src = _RandomSource(self.gens, self.degree, seed)
        return [src.next().copy() for _ in range(count)]

    def elements(self, limit: int = 1_000_000) -> Iterator[np.ndarray]:
        """Every element (small groups only)."""
        if self.order > limit:
            raise ResourceError(f"group of order {self.order} too large to enumerate")
        levels = self.chain.levels
        reps = [[lv.rep(int(p))[0] for p in lv.orbit] for lv in levels]
        ident = identity(self.degree)
        if not levels:
            yield ident
            return
        for combo in itertools.product(*reversed(reps)):
            g = ident
            for u in combo:
                g = compose(g, u)
            yield g

    def subgroup(self, gens: Sequence[np.ndarray], order: Optional[int] = None) -> "PermutationGroup":
        return PermutationGroup(self.degree, gens, order=order, seed=self._seed + 7)

    def random_schreier_stabilizer(
        self,
        transversal: Callable[[np.ndarray], Optional[np.ndarray]],
        order: int,
        seed: int = 0,
    ) -> "PermutationGroup":
        """Subgroup of known ``order`` from random Schreier generators.

        ``transversal(g)`` returns an element ``t`` with ``g t^{-1}`` in the
        wanted stabilizer (for a point stabilizer: ``t`` maps the point to its
        image under ``g``).
        """
        if order == 1:
            return PermutationGroup(self.degree, [], order=1)
        if order == self.order:
            return PermutationGroup(self.degree, self.gens, order=order)
        src = _RandomSource(self.gens, self.degree, seed)

        def schreier() -> np.ndarray:
            g = src.next()
            return compose(g, inverse(transversal(g)))

        chain = _schreier_sims(self.degree, [], order=order, source=schreier)
        gens = chain.levels[0].gens if chain.levels else []
        return PermutationGroup._from_chain(self.degree, chain, gens)

    def __repr__(self):
        return f"PermutationGroup(degree={self.degree}, order={self.order})"


# ---------------------------------------------------------------------------
# Matrix groups and the permutation image
# ---------------------------------------------------------------------------


class MatrixGroup:
    """Automorphisms of a lattice as integer matrices acting on basis coordinates.

    The permutation image on the relevant vectors is attached by
    :func:`to_permutation_group`.
    """

    def __init__(self, lattice: Lattice, generators: Optional[Sequence[np.ndarray]] = None):
        self.lattice = lattice
        gens = lattice.symmetry if generators is None else generators
        self.generators = [np.asarray(g, dtype=np.int64) for g in gens]
        self.relevant: Optional[RelevantVectorSet] = None
        self.perm: Optional[PermutationGroup] = None
        self._frame = None

    @property
    def order(self) -> int:
        if self.perm is None:
            raise SymmetryError("permutation image not built")
        return self.perm.order

    # -- conversions -----------------------------------------------------
    def _frame_indices(self):
        if self._frame is None:
            vecs = self.relevant.vectors
            chosen: List[int] = []
            for i in range(len(vecs)):
                trial = vecs[chosen + [i]].astype(float)
                if np.linalg.matrix_rank(trial) == len(chosen) + 1:
                    chosen.append(i)
                    if len(chosen) == self.lattice.n:
                        break
            if len(chosen) < self.lattice.n:
                raise FaithfulnessError("relevant vectors do not span the space")
            vi = [[Fraction(int(x)) for x in vecs[i]] for i in chosen]
            from .linalg import ExactMatrix

            inv = ExactMatrix(vi).inverse()
            den = 1
            for row in inv.rows:
                for c in row:
                    den = den * c.denominator // math.gcd(den, c.denominator)
            adj = np.array([[int(c * den) for c in row] for row in inv.rows], dtype=object)
            self._frame = (np.array(chosen), adj, den)
        return self._frame

    def perm_of(self, r: np.ndarray) -> np.ndarray:
        rel = self.relevant
        img = rel.vectors @ np.asarray(r, dtype=np.int64)
        idx = np.fromiter((rel.index.get(row.tobytes(), -1) for row in img), dtype=np.int64, count=len(img))
        if np.any(idx < 0):
            raise InvarianceError("matrix does not permute the relevant vectors")
        return idx.astype(_dtype(len(rel)))

    def matrix_of(self, p: np.ndarray) -> np.ndarray:
        chosen, adj, den = self._frame_indices()
        target = self.relevant.vectors[np.asarray(p)[chosen]].astype(object)
        num = adj.dot(target)
        if any(int(x) % den for x in num.flat):
            raise SymmetryError("permutation is not induced by a lattice automorphism")
        return (num // den).astype(np.int64)

    def act(self, p: np.ndarray, coords: np.ndarray) -> np.ndarray:
        """Apply a group element (as permutation) to rows of integer numerators."""
        return np.asarray(coords) @ self.matrix_of(p)

    def cartesian_generators(self):
        return [self.lattice.cartesian_matrix_of(r) for r in self.generators]

    def __repr__(self):
        o = self.perm.order if self.perm is not None else "?"
        return f"MatrixGroup({self.lattice.name}, order={o})"


def to_permutation_group(G: MatrixGroup, ground: RelevantVectorSet, order: Optional[int] = None) -> PermutationGroup:
    """Permutation image on ``ground``; checks invariance and faithfulness."""
    G.relevant = ground
    if np.linalg.matrix_rank(ground.vectors.astype(float)) < G.lattice.n:
        raise FaithfulnessError("ground set does not span the space; action not faithful")
    perms = [G.perm_of(r) for r in G.generators]
    for r, p in zip(G.generators, perms):
        if not np.array_equal(G.matrix_of(p), r):  # pragma: no cover - spanning set makes this exact
            raise FaithfulnessError("permutation image does not determine the matrix")
    G.perm = PermutationGroup(len(ground), perms, order=order)
    G._frame = None
    G._frame_indices()
    return G.perm


# ---------------------------------------------------------------------------
# orbits and classification
# ---------------------------------------------------------------------------


def orbit_with_witnesses(
    gens: Sequence[np.ndarray],
    start,
    act: Callable,
    key: Callable = lambda x: x,
    cap: int = 10_000_000,
) -> Tuple[List, Dict, List[Tuple[int, int]]]:
    """Breadth-first orbit of ``start``.

    Returns ``(points, index, tree)`` with ``tree[i] = (parent, generator)``;
    ``witness_word`` turns a tree path into a generator word.
    """
    points = [start]
    index = {key(start): 0}
    tree = [(-1, -1)]
    i = 0
    while i < len(points):
        x = points[i]
        for gi, g in enumerate(gens):
            y = act(g, x)
            k = key(y)
            if k not in index:
                index[k] = len(points)
                points.append(y)
                tree.append((i, gi))
                if len(points) > cap:
                    raise ResourceError(f"orbit exceeds cap {cap}")
        i += 1
    return points, index, tree


def witness_word(tree: Sequence[Tuple[int, int]], i: int) -> List[int]:
    word = []
    while tree[i][0] >= 0:
        word.append(tree[i][1])
        i = tree[i][0]
    return word[::-1]


def evaluate_word(gens: Sequence[np.ndarray], word: Sequence[int], degree: int) -> np.ndarray:
    g = identity(degree)
    for w in word:
        g = compose(g, gens[w])
    return g


class ClassifiedVectorIndex:
    """Orbits of the relevant vectors with a witness for every member.

    ``witness(i)`` maps the class representative onto vector ``i``.  Class ids
    follow the order of representatives, which are the smallest index in each
    orbit (relevant vectors are stored in canonical order).
    """

    def __init__(self, group: PermutationGroup):
        self.group = group
        n = group.degree
        self.class_id = np.full(n, -1, dtype=np.int64)
        self.parent = np.full(n, -1, dtype=np.int64)
        self.via = np.full(n, -1, dtype=np.int64)
        self.representatives: List[int] = []
        for p in range(n):
            if self.class_id[p] >= 0:
                continue
            cid = len(self.representatives)
            self.representatives.append(p)
            self.class_id[p] = cid
            frontier = np.array([p])
            while len(frontier):
                nxt = []
                for gi, g in enumerate(group.gens):
                    img = g[frontier].astype(np.int64)
                    mask = self.class_id[img] < 0
                    img, src = img[mask], frontier[mask]
                    img, first = np.unique(img, return_index=True)
                    self.class_id[img] = cid
                    self.parent[img] = src[first]
                    self.via[img] = gi
                    nxt.append(img)
                frontier = np.concatenate(nxt) if nxt else np.zeros(0, dtype=np.int64)
        self._wit: Dict[int, np.ndarray] = {}
        self.sizes = np.bincount(self.class_id, minlength=len(self.representatives))
        self._stab: Dict[int, PermutationGroup] = {}

    def __len__(self):
        return len(self.representatives)

    def representative(self, i: int) -> int:
        return self.representatives[int(self.class_id[i])]

    def witness(self, i: int) -> np.ndarray:
        i = int(i)
        w = self._wit.get(i)
        if w is None:
            path = []
            q = i
            while self.parent[q] >= 0:
                path.append(int(self.via[q]))
                q = int(self.parent[q])
            w = evaluate_word(self.group.gens, path[::-1], self.group.degree)
            if len(self._wit) < _cache_cap(self.group.degree):
                self._wit[i] = w
        return w

    def representative_stabilizer(self, cid: int) -> PermutationGroup:
        """Cached stabilizer of a class representative."""
        st = self._stab.get(cid)
        if st is None:
            st = self.group.stabilizer(self.representatives[cid])
            self._stab[cid] = st
        return st

    def stabilizer_of(self, i: int) -> PermutationGroup:
        """Conjugate of the representative's stabilizer: ``w^-1 Stab(rep) w``."""
        cid = int(self.class_id[i])
        st = self.representative_stabilizer(cid)
        w = self.witness(i)
        wi = inverse(w)
        gens = [compose(compose(wi, s), w) for s in st.gens]
        return PermutationGroup(self.group.degree, gens, order=st.order)


def stabilizer(group: PermutationGroup, point: int) -> PermutationGroup:
    if not 0 <= point < group.degree:
        raise SymmetryError("point outside the ground set")
    return group.stabilizer(point)


# ---------------------------------------------------------------------------
# cosets and transporter chains
# ---------------------------------------------------------------------------


@dataclass
class Coset:
    """The set ``{h r : h in subgroup}`` (``h`` applied first); ``subgroup=None`` is empty."""

    subgroup: Optional[PermutationGroup]
    representative: Optional[np.ndarray]

    @classmethod
    def empty(cls) -> "Coset":
        return cls(None, None)

    @property
    def is_empty(self) -> bool:
        return self.subgroup is None

    def __len__(self):
        return 0 if self.is_empty else self.subgroup.order

    def contains(self, g: np.ndarray) -> bool:
        if self.is_empty:
            return False
        return self.subgroup.contains(compose(g, inverse(self.representative)))

    def sample(self, count: int, seed: int = 0) -> List[np.ndarray]:
        if self.is_empty:
            return []
        hs = self.subgroup.random_elements(count, seed) if self.subgroup.gens else [self.subgroup.identity()] * count
        return [compose(h, self.representative) for h in hs]


def transformation_coset(index: ClassifiedVectorIndex, x: int, y: int) -> Coset:
    """All elements taking ``x`` to ``y``: ``Stab(x) g_xy`` with ``g_xy = w_x^-1 w_y``."""
    if index.class_id[x] != index.class_id[y]:
        raise ClassMismatchError(f"vectors {x} and {y} are in different classes")
    g = compose(inverse(index.witness(x)), index.witness(y))
    return Coset(index.stabilizer_of(x), g)


def coset_intersect(a: Coset, b: Coset, threshold: int = 5000) -> Coset:
    """``H1 r1 ∩ H2 r2``; empty or a coset of ``H1 ∩ H2``.

    Enumerates the smaller subgroup when its order is at most ``threshold``;
    otherwise raises :class:`ResourceError` (transporter chains cover the
    large cases arising in face classification).
    """
    if a.is_empty or b.is_empty:
        return Coset.empty()
    if a.subgroup.order > b.subgroup.order:
        a, b = b, a
    if a.subgroup.order > threshold:
        raise ResourceError("coset intersection beyond the enumeration threshold")
    r2inv = inverse(b.representative)
    hits = []
    for h in a.subgroup.elements():
        g = compose(h, a.representative)
        if b.subgroup.contains(compose(g, r2inv)):
            hits.append(g)
    if not hits:
        return Coset.empty()
    rep = hits[0]
    rinv = inverse(rep)
    sub_gens = [compose(g, rinv) for g in hits[1:]]
    sub = PermutationGroup(a.subgroup.degree, sub_gens, order=len(hits))
    return Coset(sub, rep)


def set_stabilizer(group: PermutationGroup, points: Sequence[int], cap: int = 2_000_000) -> PermutationGroup:
    """Stabilizer of a set of ground points (orbit of the set, then Schreier generators)."""
    pts = np.unique(np.asarray(points, dtype=np.int64))
    if len(pts) == 0 or len(pts) == group.degree:
        return group
    if len(pts) == 1:
        return group.stabilizer(int(pts[0]))
    return TransporterChain.set_stabilizer(group, [("r", int(p)) for p in pts])


# Points for transporter chains are ("r", index) for relevant vectors or
# ("v", key) for other objects with an action callback.


@dataclass
class ChainLevel:
    point: Hashable
    group: PermutationGroup
    orbit_keys: Dict
    tree: List[Tuple[int, int]]
    gens: List[np.ndarray]
    lookup: Optional["GlobalOrbits"] = None  # witness tables for orbits under the full group

    def transversal(self, key) -> Optional[np.ndarray]:
        if self.lookup is not None:
            return self.lookup.transport(self.point, key)
        i = self.orbit_keys.get(key)
        if i is None:
            return None
        return evaluate_word(self.gens, witness_word(self.tree, i), self.group.degree)


class GlobalOrbits:
    """Protocol for orbit tables under the full group (class index with witnesses)."""

    def covers(self, x) -> bool:  # pragma: no cover - interface
        return False

    def orbit_size(self, x) -> int:  # pragma: no cover - interface
        raise NotImplementedError

    def transport(self, x, ykey) -> Optional[np.ndarray]:  # pragma: no cover - interface
        raise NotImplementedError


class TransporterChain:
    """Stabilizer chain along an ordered point sequence ``x_0, x_1, ...``.

    Level ``k`` holds ``S_k`` (pointwise stabilizer of ``x_0..x_{k-1}``) and
    the orbit of ``x_k`` under ``S_k`` with transversal words.  The elements
    taking ``x_0..x_k`` to ``y_0..y_k`` then form the coset
    ``S_{k+1} t_k(y_k^{g^-1}) g``, which is how the pools of remaining
    transformations are tracked.
    """

    def __init__(
        self,
        group: PermutationGroup,
        points: Sequence,
        act: Callable,
        key: Callable,
        global_lookup: Optional["GlobalOrbits"] = None,
        orbit_cap: int = 2_000_000,
    ):
        self.group = group
        self.points = list(points)
        self.act = act
        self.key = key
        self.levels: List[ChainLevel] = []
        S = group
        for k, x in enumerate(self.points):
            if S.order == 1:
                lv = ChainLevel(x, S, {key(x): 0}, [(-1, -1)], [])
                self.levels.append(lv)
                continue
            if k == 0 and global_lookup is not None and global_lookup.covers(x):
                lv = ChainLevel(x, S, {}, [], list(S.gens), lookup=global_lookup)
                size = global_lookup.orbit_size(x)
            else:
                pts, idx, tree = orbit_with_witnesses(S.gens, x, act, key, cap=orbit_cap)
                lv = ChainLevel(x, S, idx, tree, list(S.gens))
                size = len(pts)
            self.levels.append(lv)
            if S.order % size:
                raise SymmetryError("orbit size does not divide the group order")
            target = S.order // size

            def trans(g, lv=lv, x=x):
                return lv.transversal(key(act(g, x)))

            S = S.random_schreier_stabilizer(trans, target, seed=k)
        self.tail = S

    def transport(self, images: Sequence, budget: List[int], inv_act: Callable) -> Optional[np.ndarray]:
        """One element mapping ``points[k]`` to ``images[k]`` for all ``k``, if any (no choices)."""
        g = self.group.identity()
        for k, y in enumerate(images):
            lv = self.levels[k]
            yk = self.key(inv_act(g, y))
            budget[0] += 1
            t = lv.transversal(yk)
            if t is None:
                return None
            g = compose(t, g)
        return g

    @staticmethod
    def set_stabilizer(group: PermutationGroup, pts: Sequence, act=None, key=None) -> PermutationGroup:
        """Stabilizer of the set ``pts`` via a search over its images."""
        act = act or _act_point
        key = key or (lambda p: p)
        chain = TransporterChain(group, pts, act, key)
        elems = []
        keys = [key(p) for p in pts]
        for g in search_transporters([list(pts)], [list(pts)], chain, act, key, find_all=True):
            elems.append(g)
        order = len(elems) * chain.tail.order
        return group.subgroup(list(chain.tail.gens) + [e for e in elems if not is_identity(e)], order=order)


def _act_point(g: np.ndarray, p):
    kind, v = p
    if kind == "r":
        return ("r", int(g[v]))
    raise SymmetryError("no action for this point type")


def search_transporters(
    X: Sequence[Sequence],
    Y: Sequence[Sequence],
    chain: TransporterChain,
    act: Callable,
    key: Callable,
    find_all: bool = False,
    budget: int = 10_000_000,
    counter: Optional[List[int]] = None,
) -> Iterator[np.ndarray]:
    """Depth-first search for elements mapping each block ``X[j]`` onto ``Y[j]``.

    ``chain.points`` must be the concatenation of the ``X`` blocks.  Yields
    one element per admissible image assignment (modulo the pointwise
    stabilizer ``chain.tail``); stops after the first unless ``find_all``.
    """
    flat_y_blocks = []
    for j, (xs, ys) in enumerate(zip(X, Y)):
        if len(xs) != len(ys):
            return
        flat_y_blocks.extend([j] * len(xs))
    ys_keys = [[key(y) for y in ys] for ys in Y]
    N = len(flat_y_blocks)
    counter = counter if counter is not None else [0]
    used = [set() for _ in Y]
    pos_in_block = []
    for xs in X:
        pos_in_block.extend(range(len(xs)))
    ginv_cache: List[Optional[np.ndarray]] = [None] * (N + 1)

    def rec(k: int, g: np.ndarray):
        if k == N:
            yield g
            return
        j = flat_y_blocks[k]
        lv = chain.levels[k]
        gi = inverse(g)
        for yi, y in enumerate(Y[j]):
            if yi in used[j]:
                continue
            counter[0] += 1
            if counter[0] > budget:
                raise BudgetExceeded(f"permutation budget {budget} exhausted")
            yk = key(act(gi, y))
            t = lv.transversal(yk)
            if t is None:
                continue
            used[j].add(yi)
            yield from rec(k + 1, compose(t, g))
            used[j].discard(yi)
            if not find_all and _found[0]:
                return

    _found = [False]
    for g in rec(0, chain.group.identity()):
        _found[0] = True
        yield g
        if not find_all:
            return


class BudgetExceeded(ResourceError):
    pass


# ---------------------------------------------------------------------------
# laminated symmetry discovery
# ---------------------------------------------------------------------------


def discover_laminated_symmetry(
    base_group: MatrixGroup,
    laminated: Lattice,
    relevant: RelevantVectorSet,
    offset_coords: Sequence[Fraction],
) -> MatrixGroup:
    """Symmetries of a lamination inherited from the base lattice.

    Forms ``Gbar = {diag(R, +-1) : R in Aut(base)}`` acting on
    ``base (x) Q + R e_n`` and returns the stabilizer in ``Gbar`` of the
    relevant-vector set of ``laminated``.  ``offset_coords`` is the offset
    vector in base-lattice coordinates; the laminated basis is then
    ``[[B1, 0], [h, a]]``.
    """
    base = base_group.lattice
    n1 = base.n
    if base_group.perm is None:
        raise SymmetryError("base group needs its permutation image")
    den = 1
    for c in offset_coords:
        den = den * Fraction(c).denominator // math.gcd(den, Fraction(c).denominator)
    hnum = np.array([int(Fraction(c) * den) for c in offset_coords], dtype=np.int64)
    # laminated coordinates z -> (den * (z' + z_n h), z_n): exact integer rows
    z = relevant.vectors
    rows = np.column_stack([den * z[:, :n1] + np.outer(z[:, n1], hnum), z[:, n1]])
    # base group as (R, sign) pairs; the extra generator flips the last coordinate
    mats = [(np.asarray(r, dtype=np.int64), 1) for r in base_group.generators]
    mats.append((np.eye(n1, dtype=np.int64), -1))
    gen_order = 2 * base_group.perm.order

    weights = np.random.default_rng(12345).integers(1, 2 ** 62, size=n1 + 1, dtype=np.int64)

    def row_hash(m: np.ndarray) -> np.ndarray:
        with np.errstate(over="ignore"):
            return _mix64((m.astype(np.int64) * weights).sum(axis=1).astype(np.uint64))

    def act(gs, m: np.ndarray) -> np.ndarray:
        r, s = gs
        out = np.empty_like(m)
        out[:, :n1] = m[:, :n1] @ r
        out[:, n1] = s * m[:, n1]
        return out

    def set_key(m: np.ndarray) -> int:
        with np.errstate(over="ignore"):
            return int(row_hash(m).sum(dtype=np.uint64))

    pts, idx, tree = orbit_with_witnesses(mats, rows, act, set_key, cap=100_000)
    orbit_size = len(pts)
    if gen_order % orbit_size:
        raise SymmetryError("set orbit size does not divide |Gbar|")
    stab_order = gen_order // orbit_size

    def word_mat(word):
        r = np.eye(n1, dtype=np.int64)
        s = 1
        for w in word:
            r = r @ mats[w][0]
            s *= mats[w][1]
        return r, s

    # Schreier generators t(p) s t(p^s)^-1 stabilize the set
    hashes = row_hash(rows)
    lookup = {int(h): i for i, h in enumerate(hashes)}
    if len(lookup) != len(rows):  # pragma: no cover
        raise SymmetryError("hash collision among relevant vectors")
    cand: Dict[bytes, np.ndarray] = {}
    for i in range(orbit_size):
        ri, si = word_mat(witness_word(tree, i))
        for gi, (r, s) in enumerate(mats):
            j = idx[set_key(act((r, s), pts[i]))]
            rj, sj = word_mat(witness_word(tree, j))
            rji = np.rint(np.linalg.inv(rj.astype(float))).astype(np.int64)
            if not np.array_equal(rj @ rji, np.eye(n1, dtype=np.int64)):  # pragma: no cover
                raise SymmetryError("witness matrix is not unimodular")
            rr = ri @ r @ rji
            ss = si * s * sj
            img = act((rr, ss), rows)
            perm = np.array([lookup.get(int(h), -1) for h in row_hash(img)], dtype=np.int64)
            if np.any(perm < 0):  # pragma: no cover - Schreier generators stabilize the set
                raise SymmetryError("Schreier generator does not stabilize the set")
            if not is_identity(perm):
                cand[perm.astype(np.int32).tobytes()] = perm
    lat_group = MatrixGroup(laminated, [])
    lat_group.relevant = relevant
    gens = list(cand.values())
    # keep a small generating set: add generators until the order is reached
    chosen: List[np.ndarray] = []
    sub = PermutationGroup(len(relevant), [], order=1)
    for p in sorted(gens, key=lambda a: a.tobytes()):
        if sub.order == stab_order:
            break
        if sub.contains(p):
            continue
        chosen.append(p)
        sub = PermutationGroup(len(relevant), chosen)
    if sub.order != stab_order:
        raise SymmetryError(f"set stabilizer order {sub.order} != {stab_order}")
    out = MatrixGroup(laminated, [lat_group.matrix_of(p) for p in chosen])
    out.relevant = relevant
    out.perm = PermutationGroup(len(relevant), [p.astype(_dtype(len(relevant))) for p in chosen], order=stab_order)
    out._frame_indices()
    out.discovery = {"gbar_order": gen_order, "set_orbit": orbit_size, "order": stab_order}
    return out
