"""Vertices and the symmetry-reduced face hierarchy of a Voronoi cell.

A vertex ``v`` is identified with the sorted array of relevant-vector indices
``N(v)`` whose bisector planes pass through it.  That set determines ``v``
and is permuted by the symmetry group exactly like the relevant vectors, so
the group acts on vertices without touching coordinates.  A face is stored by
its vertex ids; its normal set ``N(F)`` is the intersection of the ``N(v)``
and its dimension is ``n - rank N(F)``.
"""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import cdd
import numpy as np
from scipy.optimize import linprog

from .lattice import Lattice, RelevantVectorSet
from .linalg import ExactMatrix, ExactVector, rank_exact, solve
from .symmetry import (
    BudgetExceeded,
    ClassifiedVectorIndex,
    GlobalOrbits,
    MatrixGroup,
    PermutationGroup,
    SymmetryError,
    TransporterChain,
    compose,
    evaluate_word,
    inverse,
    is_identity,
    search_transporters,
    set_stabilizer,
    _mix64,
)

__all__ = [
    "VoronoiError",
    "VertexIndex",
    "Face",
    "Facet",
    "FaceHierarchy",
    "find_vertices",
    "vertices_from_representatives",
    "assemble_facets",
    "get_normals",
    "fingerprint",
    "choose_defining_set",
    "find_transformation",
    "classify_faces",
    "iterated_classify",
    "intersect_faces",
    "construct_face_hierarchy",
    "subgroup_chain",
]

log = logging.getLogger(__name__)


class VoronoiError(RuntimeError):
    pass


def _row_set_hash(rows: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return _mix64(rows.astype(np.int64)).sum(axis=1, dtype=np.uint64)


# ---------------------------------------------------------------------------
# exact vertex tests
# ---------------------------------------------------------------------------


class _Tester:
    """Integer form of ``2 u.n <= |n|^2`` for all relevant ``n``."""

    def __init__(self, lat: Lattice, rel: RelevantVectorSet):
        self.lat = lat
        self.rel = rel
        self.gn = (lat.gram_int @ rel.vectors.T).astype(object)  # n x M, scaled by gram_scale
        self.norms = ((rel.vectors @ lat.gram_int) * rel.vectors).sum(axis=1).astype(object)

    def slack(self, u: Sequence[Fraction]) -> Tuple[np.ndarray, int]:
        """Numerators of ``|n|^2 - 2 u.n`` over the common denominator."""
        q = 1
        for c in u:
            q = q * c.denominator // math.gcd(q, c.denominator)
        p = np.array([int(c * q) for c in u], dtype=object)
        lhs = 2 * p.dot(self.gn)
        return q * self.norms - lhs, q

    def tight_set(self, u: Sequence[Fraction]) -> Optional[np.ndarray]:
        """Indices with equality, or ``None`` if ``u`` lies outside the cell."""
        s, _ = self.slack(u)
        if any(x < 0 for x in s):
            return None
        return np.array([i for i, x in enumerate(s) if x == 0], dtype=np.int64)


def _lift(lat: Lattice, rel: RelevantVectorSet, normals: Sequence[int]) -> ExactVector:
    """Exact point with ``2 u G n_i = |n_i|^2`` for ``n`` independent normals."""
    g = lat.gram
    rows = []
    rhs = []
    for i in normals:
        gn = g.vecmul(rel.exact(i))
        rows.append([2 * c for c in gn])
        rhs.append(rel.norm2(i))
    return solve(ExactMatrix(rows), rhs)


def _independent(vecs: np.ndarray, candidates: Sequence[int], n: int) -> Optional[List[int]]:
    chosen: List[int] = []
    for i in candidates:
        trial = vecs[chosen + [int(i)]].astype(float)
        if np.linalg.matrix_rank(trial, tol=1e-9 * max(1.0, np.abs(trial).max())) == len(chosen) + 1:
            chosen.append(int(i))
            if len(chosen) == n:
                return chosen
    return None


def _rank_int(rows: np.ndarray) -> int:
    if len(rows) == 0:
        return 0
    r = np.linalg.matrix_rank(rows.astype(float))
    return r


# ---------------------------------------------------------------------------
# vertex index
# ---------------------------------------------------------------------------


@dataclass
class _VertexClass:
    rep_coords: ExactVector
    sets: np.ndarray  # (orbit, k) sorted incidence rows
    parent: np.ndarray
    via: np.ndarray
    stab_order: int = 0


class VertexIndex(GlobalOrbits):
    """All vertices, grouped in orbits under the full group, with witnesses.

    Vertex ids are ``offset[class] + position``; ``witness(v)`` maps the
    class representative onto vertex ``v``.
    """

    def __init__(self, lat: Lattice, group: MatrixGroup, rel_index: ClassifiedVectorIndex):
        self.lat = lat
        self.group = group
        self.rel = group.relevant
        self.rel_index = rel_index
        self.perm = group.perm
        self.tester = _Tester(lat, self.rel)
        self.classes: List[_VertexClass] = []
        self.offsets: List[int] = [0]
        self._hash_sorted = np.zeros(0, dtype=np.uint64)
        self._hash_ids = np.zeros(0, dtype=np.int64)
        self._wit: Dict[int, np.ndarray] = {}
        self._coords: Dict[int, ExactVector] = {}
        # set by find_vertices when every class was expanded along all edges
        self.certified_complete = False

    # -- building ----------------------------------------------------------
    def __len__(self):
        return self.offsets[-1]

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def _orbit(self, start: np.ndarray, cap: int = 50_000_000):
        k = len(start)
        gens = self.perm.gens
        sets = [start[None, :].astype(np.int32)]
        parents = [np.array([-1], dtype=np.int64)]
        vias = [np.array([-1], dtype=np.int8)]
        seen = np.array([_row_set_hash(sets[0])[0]], dtype=np.uint64)
        frontier = sets[0]
        fstart = 0
        total = 1
        while len(frontier):
            new_rows, new_par, new_via = [], [], []
            for gi, g in enumerate(gens):
                img = np.sort(g[frontier].astype(np.int32), axis=1)
                h = _row_set_hash(img)
                h, first = np.unique(h, return_index=True)
                mask = ~np.isin(h, seen, assume_unique=False)
                if new_rows:
                    prev = np.concatenate([_row_set_hash(r) for r in new_rows])
                    mask &= ~np.isin(h, prev)
                if not mask.any():
                    continue
                pick = first[mask]
                new_rows.append(img[pick])
                new_par.append(fstart + pick)
                new_via.append(np.full(len(pick), gi, dtype=np.int8))
            if not new_rows:
                break
            frontier = np.concatenate(new_rows)
            sets.append(frontier)
            parents.append(np.concatenate(new_par))
            vias.append(np.concatenate(new_via))
            seen = np.union1d(seen, _row_set_hash(frontier))
            fstart = total
            total += len(frontier)
            if total > cap:
                raise VoronoiError("vertex orbit exceeds cap")
        return np.concatenate(sets), np.concatenate(parents), np.concatenate(vias)

    def _rebuild_lookup(self):
        hs, ids = [], []
        for c, vc in enumerate(self.classes):
            hs.append(_row_set_hash(vc.sets))
            ids.append(np.arange(len(vc.sets)) + self.offsets[c])
        if hs:
            h = np.concatenate(hs)
            i = np.concatenate(ids)
            order = np.argsort(h, kind="stable")
            self._hash_sorted = h[order]
            self._hash_ids = i[order]

    def add_vertex(self, u: ExactVector, tight: np.ndarray) -> bool:
        """Record ``u`` (exact, inside the cell, tight set given); False if known."""
        if self.find(tight) >= 0:
            return False
        sets, parent, via = self._orbit(np.sort(tight))
        self.classes.append(_VertexClass(u, sets, parent, via))
        self.offsets.append(self.offsets[-1] + len(sets))
        self._rebuild_lookup()
        self._wit.clear()
        self._coords.clear()
        return True

    def canonicalize(self) -> None:
        """Reorder classes and representatives canonically (independent of discovery order).

        The representative of a class is the orbit member whose sorted
        incidence row is lexicographically smallest; classes are ordered by
        that row.
        """
        reps = []
        for vc in self.classes:
            order = np.lexsort(vc.sets.T[::-1])
            reps.append(vc.sets[order[0]])
        order = sorted(range(len(self.classes)), key=lambda c: tuple(int(x) for x in reps[c]))
        new = []
        for c in order:
            row = reps[c].astype(np.int64)
            u = self._solve_from_incidence(row)
            sets, parent, via = self._orbit(row)
            new.append(_VertexClass(u, sets, parent, via))
        self.classes = new
        self.offsets = [0]
        for vc in new:
            self.offsets.append(self.offsets[-1] + len(vc.sets))
        self._rebuild_lookup()
        self._wit.clear()
        self._coords.clear()

    def _solve_from_incidence(self, row: np.ndarray) -> ExactVector:
        idx = _independent(self.rel.vectors, row, self.lat.n)
        if idx is None:
            raise VoronoiError("incidence set does not determine a point")
        return _lift(self.lat, self.rel, idx)

    # -- queries -------------------------------------------------------------
    def find(self, incidence: np.ndarray) -> int:
        row = np.sort(np.asarray(incidence, dtype=np.int64))
        h = _row_set_hash(row[None, :])[0]
        lo = np.searchsorted(self._hash_sorted, h, side="left")
        hi = np.searchsorted(self._hash_sorted, h, side="right")
        for pos in range(lo, hi):
            vid = int(self._hash_ids[pos])
            if np.array_equal(self.incidence(vid), row):
                return vid
        return -1

    def find_many(self, rows: np.ndarray) -> np.ndarray:
        """Ids for sorted incidence rows of equal length (hash lookup, verified)."""
        h = _row_set_hash(rows)
        pos = np.searchsorted(self._hash_sorted, h)
        pos = np.minimum(pos, len(self._hash_sorted) - 1)
        ok = self._hash_sorted[pos] == h
        ids = np.where(ok, self._hash_ids[pos], -1)
        for j in np.nonzero(ok)[0]:
            if not np.array_equal(self.incidence(int(ids[j])), rows[j]):  # pragma: no cover - 64-bit collision
                ids[j] = self.find(rows[j])
        return ids

    def locate(self, vid: int) -> Tuple[int, int]:
        c = int(np.searchsorted(self.offsets, vid, side="right") - 1)
        return c, vid - self.offsets[c]

    def class_of(self, vid: int) -> int:
        return self.locate(vid)[0]

    def class_ids(self, vids: np.ndarray) -> np.ndarray:
        return np.searchsorted(self.offsets, vids, side="right") - 1

    def incidence(self, vid: int) -> np.ndarray:
        c, p = self.locate(vid)
        return self.classes[c].sets[p].astype(np.int64)

    def representative(self, c: int) -> int:
        return self.offsets[c]

    def witness(self, vid: int) -> np.ndarray:
        vid = int(vid)
        w = self._wit.get(vid)
        if w is None:
            c, p = self.locate(vid)
            vc = self.classes[c]
            path = []
            while vc.parent[p] >= 0:
                path.append(int(vc.via[p]))
                p = int(vc.parent[p])
            w = evaluate_word(self.perm.gens, path[::-1], self.perm.degree)
            if len(self._wit) < 4096:
                self._wit[vid] = w
        return w

    def coords(self, vid: int) -> ExactVector:
        """Exact basis coordinates of a vertex."""
        vid = int(vid)
        u = self._coords.get(vid)
        if u is None:
            c, _ = self.locate(vid)
            rep = self.classes[c].rep_coords
            if vid == self.offsets[c]:
                u = rep
            else:
                m = self.group.matrix_of(self.witness(vid))
                u = ExactVector(sum((rep[i] * int(m[i, j]) for i in range(len(rep))), Fraction(0)) for j in range(m.shape[1]))
            self._coords[vid] = u
        return u

    def coords_float(self, vids: Sequence[int]) -> np.ndarray:
        return np.array([[float(c) for c in self.coords(v)] for v in vids])

    def act(self, g: np.ndarray, vid: int) -> int:
        row = np.sort(g[self.incidence(vid)].astype(np.int64))
        out = self.find(row)
        if out < 0:
            raise VoronoiError("vertex image not found; vertex set incomplete")
        return out

    def act_many(self, g: np.ndarray, vids: np.ndarray) -> np.ndarray:
        out = np.empty(len(vids), dtype=np.int64)
        by_len = defaultdict(list)
        for j, v in enumerate(vids):
            by_len[len(self.incidence(int(v)))].append(j)
        for _, js in by_len.items():
            rows = np.sort(g[np.array([self.incidence(int(vids[j])) for j in js])].astype(np.int64), axis=1)
            ids = self.find_many(rows)
            if np.any(ids < 0):
                raise VoronoiError("vertex image not found; vertex set incomplete")
            out[js] = ids
        return out

    def all_vertex_ids_with(self, r: int) -> np.ndarray:
        """Ids of vertices whose incidence contains relevant vector ``r``."""
        out = []
        for c, vc in enumerate(self.classes):
            hit = np.nonzero(np.any(vc.sets == r, axis=1))[0]
            out.append(hit + self.offsets[c])
        return np.sort(np.concatenate(out)) if out else np.zeros(0, dtype=np.int64)

    # -- GlobalOrbits protocol (full group) --------------------------------
    def covers(self, x) -> bool:
        return x[0] in ("v", "r")

    def orbit_size(self, x) -> int:
        if x[0] == "v":
            return len(self.classes[self.class_of(x[1])].sets)
        return int(self.rel_index.sizes[self.rel_index.class_id[x[1]]])

    def transport(self, x, ykey) -> Optional[np.ndarray]:
        kind, a = x
        kb, b = ykey
        if kind != kb:
            return None
        if kind == "v":
            if self.class_of(a) != self.class_of(b):
                return None
            return compose(inverse(self.witness(a)), self.witness(b))
        ci = self.rel_index
        if ci.class_id[a] != ci.class_id[b]:
            return None
        return compose(inverse(ci.witness(a)), ci.witness(b))


# ---------------------------------------------------------------------------
# vertex search
# ---------------------------------------------------------------------------


def _edge_walk(lat, rel, tester, u: ExactVector, tight: np.ndarray, a_ub: np.ndarray, rng) -> Optional[ExactVector]:
    """Neighbour of ``u`` along a random edge, exactly.

    A random extreme ray of the cone ``{d : n.d <= 0, n tight at u}`` comes
    from a small LP; the ray is lifted exactly as the null direction of
    ``n - 1`` of its tight rows and followed until the first other bisector.
    """
    n = lat.n
    at = a_ub[tight]
    c = rng.standard_normal(n)
    res = linprog(-c, A_ub=at, b_ub=np.zeros(len(tight)), A_eq=-at.sum(axis=0)[None, :], b_eq=[1.0],
                  bounds=[(None, None)] * n, method="highs")
    if res.status != 0:
        return None
    val = np.abs(at @ res.x)
    order = tight[np.argsort(val)]
    rows = _independent(rel.vectors, order, n - 1)
    if rows is None:
        return None
    g = lat.gram
    eqs = [list(g.vecmul(rel.exact(i))) for i in rows]
    for _ in range(8):
        extra = [Fraction(int(x)) for x in rng.integers(-3, 4, size=n)]
        try:
            d = solve(ExactMatrix(eqs + [extra]), [Fraction(0)] * (n - 1) + [Fraction(1)])
            break
        except Exception:
            continue
    else:
        return None
    return _follow(tester, u, np.array(list(d), dtype=object), tight)


def _follow(tester, u: ExactVector, dd: np.ndarray, tight: np.ndarray) -> Optional[ExactVector]:
    """Walk from ``u`` along ``+-dd`` (whichever keeps the tight rows feasible) to the next bisector."""
    gn = tester.gn  # scaled by gram_scale
    rate = dd.dot(gn)
    if any(r > 0 for r in rate[tight]):
        dd = -dd
        rate = -rate
        if any(r > 0 for r in rate[tight]):
            return None
    uu = np.array(list(u), dtype=object)
    slack = tester.norms - 2 * uu.dot(gn)  # scaled
    best = None
    for j in np.nonzero([r > 0 for r in rate])[0]:
        step = slack[j] / (2 * rate[j])
        if best is None or step < best:
            best = step
    if best is None or best == 0:
        return None
    return ExactVector(uu + best * dd)


def _all_edges(lat, tester, u: ExactVector, tight: np.ndarray, limit: int) -> Optional[List[ExactVector]]:
    """Every neighbour of ``u``, or None when more than ``limit`` normals are tight.

    The extreme rays of the tangent cone ``{d : n.d <= 0, n tight at u}``
    come from an exact double-description run (cddlib); each is followed to
    the next bisector.
    """
    if len(tight) > limit:
        return None
    rows = tester.gn[:, tight].T  # exact integers, one row per tight normal
    mat = cdd.Matrix([[0] + [-int(c) for c in r] for r in rows], number_type="fraction")
    mat.rep_type = cdd.RepType.INEQUALITY
    gens = cdd.Polyhedron(mat).get_generators()
    if gens.lin_set:
        raise VoronoiError("tangent cone is not pointed")
    out: List[ExactVector] = []
    for i in range(gens.row_size):
        g = gens[i]
        if g[0] != 0:
            continue  # the apex
        w = _follow(tester, u, np.array([Fraction(x) for x in g[1:]], dtype=object), tight)
        if w is not None:
            out.append(w)
    return out


def find_vertices(
    lat: Lattice,
    group: MatrixGroup,
    rel_index: ClassifiedVectorIndex,
    streak: int = 500,
    seed: int = 0,
    max_rounds: int = 100_000,
    eps: float = 1e-9,
    progress=None,
    edge_limit: int = 64,
) -> VertexIndex:
    """Vertex classes from LP extreme points, translations and orbits.

    Rounds alternate.  Odd rounds maximize a perturbed relevant vector over
    the cell and lift the optimum exactly from ``n`` independent tight
    normals.  Even rounds walk from a known vertex along a random edge
    (:func:`_edge_walk`), which reaches vertices whose normal cones are too
    thin for the first kind.  Every candidate is checked exactly against all
    relevant vectors.  New classes also seed ``v - n`` for their tight
    normals ``n``.  Stops after ``streak`` rounds without a new class.

    Each new class with at most ``edge_limit`` tight normals also has all
    of its edges followed.  The vertex graph is
    connected, so once every class has been expanded this way the search is
    complete and stops early.
    """
    rel = group.relevant
    n = lat.n
    vi = VertexIndex(lat, group, rel_index)
    tester = vi.tester
    a_ub = 2.0 * (rel.vectors.astype(float) @ lat.gram_float)
    b_ub = rel.norms.astype(float) / lat.gram_scale
    rng = np.random.default_rng(seed)
    quiet = 0
    rounds = 0
    pending: List[ExactVector] = []
    known: List[Tuple[ExactVector, np.ndarray]] = []
    free = [(None, None)] * n

    explore: List[Tuple[ExactVector, np.ndarray]] = []
    exhaustive = [True]

    def process(u: ExactVector) -> bool:
        t = tester.tight_set(list(u))
        if t is None or _rank_int(rel.vectors[t]) < n:
            return False
        if vi.add_vertex(u, t):
            known.append((u, t))
            explore.append((u, t))
            for r in t:
                pending.append(u - rel.exact(int(r)))
            return True
        return False

    def drain() -> bool:
        new = False
        while pending or explore:
            while pending:
                new |= process(pending.pop())
            if explore:
                u, t = explore.pop()
                edges = _all_edges(lat, tester, u, t, edge_limit)
                if edges is None:
                    exhaustive[0] = False
                    continue
                for w in edges:
                    new |= process(w)
        return new

    while quiet < streak and rounds < max_rounds:
        if known and exhaustive[0]:
            if progress:
                progress(f"vertex search complete: every class expanded along all edges ({vi.n_classes} classes)")
            break
        rounds += 1
        if known and rounds % 2 == 0:
            u, t = known[int(rng.integers(len(known)))]
            w = _edge_walk(lat, rel, tester, u, t, a_ub, rng)
            new = False
            if w is not None:
                new = process(w)
                new |= drain()
            quiet = 0 if new else quiet + 1
            if progress and new:
                progress(f"round {rounds}: {vi.n_classes} vertex classes, {len(vi)} vertices")
            continue
        else:
            k = int(rng.integers(len(rel)))
            c = a_ub[k] / 2.0
            c = c + 1e-3 * np.linalg.norm(c) * rng.uniform(-1, 1, size=n)
            res = linprog(-c, A_ub=a_ub, b_ub=b_ub, bounds=free, method="highs")
            if res.status == 3:
                raise VoronoiError("LP unbounded: relevant vector set inconsistent")
        if res.status != 0:
            quiet += 1
            continue
        x = res.x
        slack = b_ub - a_ub @ x
        tight = np.nonzero(np.abs(slack) <= eps * np.maximum(1.0, np.abs(b_ub)) * 1e3)[0]
        order = tight[np.argsort(np.abs(slack[tight]))]
        idx = _independent(rel.vectors, order, n)
        new = False
        if idx is not None:
            u = _lift(lat, rel, idx)
            new = process(u)
            new |= drain()
        quiet = 0 if new else quiet + 1
        if progress and new:
            progress(f"round {rounds}: {vi.n_classes} vertex classes, {len(vi)} vertices")
    vi.canonicalize()
    # every class expanded along all of its edges: the vertex graph is closed
    vi.certified_complete = bool(known) and exhaustive[0]
    return vi


def vertices_from_representatives(
    lat: Lattice, group: MatrixGroup, rel_index: ClassifiedVectorIndex, reps: Sequence[Sequence[Fraction]]
) -> VertexIndex:
    """Rebuild the vertex index from one exact point per class.

    Every point must satisfy all bisector inequalities and be tight on ``n``
    independent relevant vectors; the vertex set must be closed under
    ``v -> v - r`` for tight ``r``, which holds for the full cell.
    """
    rel = group.relevant
    vi = VertexIndex(lat, group, rel_index)
    for u in reps:
        u = ExactVector(Fraction(c) for c in u)
        t = vi.tester.tight_set(list(u))
        if t is None:
            raise VoronoiError(f"point {list(map(str, u))} lies outside the cell")
        if _rank_int(rel.vectors[t]) < lat.n:
            raise VoronoiError(f"point {list(map(str, u))} is not a vertex")
        vi.add_vertex(u, t)
    for c in range(vi.n_classes):
        vid = vi.representative(c)
        u = vi.coords(vid)
        for r in vi.incidence(vid):
            w = u - rel.exact(int(r))
            t = vi.tester.tight_set(list(w))
            if t is None or vi.find(np.sort(t)) < 0:
                raise VoronoiError("vertex set is not closed under translation by tight relevant vectors")
    for r in rel_index.representatives:
        ids = vi.all_vertex_ids_with(int(r))
        pts = [vi.coords(int(v)) for v in ids[: 64 * lat.n]]
        if len(pts) < lat.n or rank_exact([p - pts[0] for p in pts[1:]]) != lat.n - 1:
            raise VoronoiError(f"facet of relevant vector {int(r)} is not spanned by the given vertices")
    vi.canonicalize()
    return vi


# ---------------------------------------------------------------------------
# faces
# ---------------------------------------------------------------------------


class Face:
    __slots__ = (
        "dim",
        "_verts",
        "parents",
        "children",
        "class_id",
        "representative",
        "transformation",
        "_normals",
        "props",
        "uid",
        "_chains",
        "_defining",
    )

    def __init__(self, dim: int, verts: Optional[np.ndarray] = None):
        self.dim = dim
        self._verts = None if verts is None else np.asarray(verts, dtype=np.int64)
        self.parents: List["Face"] = []
        self.children: List["Face"] = []
        self.class_id: Optional[int] = None
        self.representative: Optional["Face"] = None
        self.transformation: Optional[np.ndarray] = None
        self._normals: Optional[np.ndarray] = None
        self.props = None
        self.uid = -1
        self._chains = {}
        self._defining = None

    @property
    def verts(self) -> np.ndarray:
        return self._verts

    @property
    def is_representative(self) -> bool:
        return self.representative is None

    def key(self) -> bytes:
        return self.verts.tobytes()

    def root(self) -> Tuple["Face", np.ndarray]:
        """Class representative and the element mapping it onto this face."""
        if self.representative is None:
            return self, None
        rep, g = self.representative.root()
        t = self.transformation
        return rep, (t if g is None else compose(g, t))

    def __repr__(self):
        tag = f"class {self.class_id}" if self.class_id is not None else "member"
        return f"<Face dim={self.dim} |V|={len(self.verts) if self._verts is not None else '?'} {tag}>"


class Facet(Face):
    __slots__ = ("normal", "_vindex")

    def __init__(self, dim: int, normal: int, vindex: VertexIndex):
        super().__init__(dim)
        self.normal = int(normal)
        self._vindex = vindex

    @property
    def verts(self) -> np.ndarray:
        if self._verts is None:
            self._verts = self._vindex.all_vertex_ids_with(self.normal)
        return self._verts


def get_normals(face: Face, vindex: VertexIndex) -> np.ndarray:
    """``N(F)``: relevant vectors whose facet contains every vertex of ``F`` (cached)."""
    if face._normals is None:
        if isinstance(face, Facet):
            face._normals = _common_incidence(face.verts, vindex)
        else:
            face._normals = _common_incidence(face.verts, vindex)
    return face._normals


def _common_incidence(vids: np.ndarray, vindex: VertexIndex) -> np.ndarray:
    if len(vids) == 0:
        return np.zeros(0, dtype=np.int64)
    common = vindex.incidence(int(vids[0]))
    for v in vids[1:]:
        common = np.intersect1d(common, vindex.incidence(int(v)), assume_unique=True)
        if len(common) == 0:
            break
    return common


def face_dimension(vids: np.ndarray, vindex: VertexIndex, exact: bool = False) -> int:
    """``n - rank N(F)`` for the face spanned by ``vids``."""
    normals = _common_incidence(vids, vindex)
    n = vindex.lat.n
    if exact:
        return n - rank_exact([vindex.rel.exact(int(i)) for i in normals]) if len(normals) else n
    return n - _rank_int(vindex.rel.vectors[normals])


def assemble_facets(vindex: VertexIndex, materialize: bool = True) -> List[Facet]:
    """One facet per relevant vector; inclusions come from the exact tight sets."""
    n = vindex.lat.n
    facets = [Facet(n - 1, r, vindex) for r in range(len(vindex.rel))]
    if materialize:
        for f in facets:
            if len(f.verts) < n:
                raise VoronoiError(f"facet {f.normal} has too few vertices; vertex set incomplete")
    return facets


# ---------------------------------------------------------------------------
# fingerprints, defining sets, transformations
# ---------------------------------------------------------------------------


def fingerprint(face: Face, vindex: VertexIndex) -> Tuple:
    """Per-class counts over ``V(F)`` and ``N(F)`` (full-group classes)."""
    vc = np.bincount(vindex.class_ids(face.verts))
    normals = get_normals(face, vindex)
    nc = np.bincount(vindex.rel_index.class_id[normals]) if len(normals) else np.zeros(0, dtype=np.int64)
    return (
        tuple((int(c), int(k)) for c, k in enumerate(vc) if k),
        tuple((int(c), int(k)) for c, k in enumerate(nc) if k),
    )


def _perm_count(class_ids: np.ndarray) -> int:
    return math.prod(math.factorial(int(k)) for k in np.bincount(class_ids) if k) if len(class_ids) else 1


def choose_defining_set(face: Face, vindex: VertexIndex) -> Tuple[str, List[List[Tuple[str, int]]]]:
    """Pick ``V(F)`` or ``N(F)`` and split it into class blocks.

    The set with fewer class-respecting permutations wins; ties go to the
    smaller set, then to ``N(F)``.  Blocks are ordered by class id and then
    stably by size.
    """
    if face._defining is not None:
        return face._defining
    verts = face.verts
    normals = get_normals(face, vindex)
    vcls = vindex.class_ids(verts)
    ncls = vindex.rel_index.class_id[normals]
    pv, pn = _perm_count(vcls), _perm_count(ncls)
    if (pv, len(verts)) < (pn, len(normals)):
        kind, items, cls = "v", verts, vcls
    else:
        kind, items, cls = "r", normals, ncls
    blocks: Dict[int, List[Tuple[str, int]]] = defaultdict(list)
    for it, c in zip(items, cls):
        blocks[int(c)].append((kind, int(it)))
    ordered = [blocks[c] for c in sorted(blocks)]
    ordered.sort(key=len)  # stable
    face._defining = (kind, ordered)
    return face._defining


class _Action:
    def __init__(self, vindex: VertexIndex):
        self.vindex = vindex

    def __call__(self, g: np.ndarray, x):
        kind, i = x
        if kind == "r":
            return ("r", int(g[i]))
        return ("v", self.vindex.act(g, i))


@dataclass
class TransformStats:
    calls: int = 0
    checked: int = 0
    worst: int = 0


def _chain_for(face: Face, group: PermutationGroup, vindex: VertexIndex, is_full: bool) -> TransporterChain:
    key = id(group)
    ch = face._chains.get(key)
    if ch is None:
        _, blocks = choose_defining_set(face, vindex)
        pts = [x for b in blocks for x in b]
        ch = TransporterChain(group, pts, _Action(vindex), lambda p: p, global_lookup=vindex if is_full else None)
        face._chains[key] = ch
    return ch


def find_transformation(
    rep: Face,
    other: Face,
    group: PermutationGroup,
    vindex: VertexIndex,
    is_full: bool = True,
    budget: int = 10_000_000,
    stats: Optional[TransformStats] = None,
) -> Optional[np.ndarray]:
    """An element ``g`` of ``group`` with ``other = rep^g``, or ``None``.

    Depth-first over images of the representative's defining blocks; the
    pool of remaining elements at depth ``k`` is a coset of the pointwise
    stabilizer of the first ``k`` defining vectors, tracked through the
    representative's transporter chain.
    """
    kind_a, xb = choose_defining_set(rep, vindex)
    kind_b, yb = choose_defining_set(other, vindex)
    if kind_a != kind_b or [len(b) for b in xb] != [len(b) for b in yb]:
        return None
    chain = _chain_for(rep, group, vindex, is_full)
    counter = [0]
    act = _Action(vindex)
    try:
        for g in search_transporters(xb, yb, chain, act, lambda p: p, budget=budget, counter=counter):
            if stats is not None:
                stats.calls += 1
                stats.checked += counter[0]
                stats.worst = max(stats.worst, counter[0])
            return g
    except BudgetExceeded:
        raise
    if stats is not None:
        stats.calls += 1
        stats.checked += counter[0]
        stats.worst = max(stats.worst, counter[0])
    return None


def _verify_witness(rep: Face, face: Face, g: np.ndarray, vindex: VertexIndex) -> None:
    img = np.sort(vindex.act_many(g, rep.verts))
    if not np.array_equal(img, face.verts):
        raise VoronoiError("transformation witness does not map the vertex sets")


def classify_faces(
    faces: Sequence[Face],
    group: PermutationGroup,
    vindex: VertexIndex,
    is_full: bool = True,
    budget: int = 10_000_000,
    stats: Optional[TransformStats] = None,
    verify: bool = True,
) -> List[Face]:
    """Assign each face a representative (or make it one); returns the representatives.

    Faces are bucketed by fingerprint; inside a bucket each face is tested
    against the representatives found so far.  Class ids are assigned at the
    end in order of the representatives' sorted vertex ids.
    """
    buckets: Dict[Tuple, List[Face]] = defaultdict(list)
    for f in faces:
        buckets[fingerprint(f, vindex)].append(f)
    reps: List[Face] = []
    for fp in sorted(buckets):
        local: List[Face] = []
        for f in buckets[fp]:
            for r in local:
                g = find_transformation(r, f, group, vindex, is_full, budget, stats)
                if g is not None:
                    if verify:
                        _verify_witness(r, f, g, vindex)
                    f.representative = r
                    f.transformation = g
                    f.class_id = None
                    break
            else:
                f.representative = None
                f.transformation = None
                local.append(f)
        reps.extend(local)
    reps.sort(key=lambda f: tuple(int(v) for v in f.verts))
    for cid, r in enumerate(reps):
        r.class_id = cid
    return reps


def iterated_classify(
    faces: Sequence[Face],
    chain: Sequence[PermutationGroup],
    full: PermutationGroup,
    vindex: VertexIndex,
    budget: int = 10_000_000,
    stats: Optional[TransformStats] = None,
    verify: bool = True,
) -> List[Face]:
    """Classify under each subgroup in turn, then under the full group.

    Later rounds only compare the current representatives; a representative
    absorbed into another class takes its members along (their witnesses are
    composed and, with ``verify``, re-checked).
    """
    groups = [g for g in chain if g is not full] + [full]
    current = list(faces)
    for grp in groups:
        is_full = grp is full
        # fresh classification among the current representatives
        for f in current:
            f.representative = None
            f.transformation = None
        current = classify_faces(current, grp, vindex, is_full, budget, stats, verify=verify)
        # chains are only valid for this round; they dominate memory on large cells
        for f in faces:
            f._chains.pop(id(grp), None)
    # flatten: every member points straight at its final representative
    for f in faces:
        if f.representative is not None:
            rep, g = f.root()
            f.representative, f.transformation = rep, g
            if verify:
                _verify_witness(rep, f, g, vindex)
    return current


# ---------------------------------------------------------------------------
# intersections and the hierarchy
# ---------------------------------------------------------------------------


def _representative_parent(face: Face) -> Face:
    for p in face.parents:
        if p.representative is None:
            return p
    raise VoronoiError("face has no representative parent")


def intersect_faces(parents: Sequence[Face], vindex: VertexIndex, top: Optional[Face] = None) -> List[Face]:
    """Children of the representative faces among ``parents``.

    Each representative is intersected with the children of one of its
    representative parents; hulls of the right dimension become faces, and a
    vertex set reached twice gives one face with merged parents.
    """
    children: Dict[bytes, Face] = {}
    n = vindex.lat.n
    for p1 in parents:
        if p1.representative is not None:
            continue
        target = p1.dim - 1
        if isinstance(p1, Facet):
            siblings = None  # all facets; intersect through the incidence rows
        else:
            siblings = _representative_parent(p1).children
        verts = p1.verts
        if siblings is None:
            groups: Dict[int, List[int]] = defaultdict(list)
            for v in verts:
                for r in vindex.incidence(int(v)):
                    if r != p1.normal:
                        groups[int(r)].append(int(v))
            facet_of = {f.normal: f for f in (top.children if top is not None else [])}
            cands = [(facet_of.get(r), np.array(vs, dtype=np.int64)) for r, vs in sorted(groups.items())]
        else:
            cands = [(p2, np.intersect1d(verts, p2.verts, assume_unique=True)) for p2 in siblings if p2 is not p1]
        for p2, vs in cands:
            if len(vs) == 0:
                continue
            k = vs.tobytes()
            f = children.get(k)
            if f is None:
                if len(vs) < target + 1:
                    continue
                if face_dimension(vs, vindex) != target:
                    continue
                f = Face(target, vs)
                children[k] = f
            for p in (p1, p2):
                if p is not None and all(q is not p for q in f.parents):
                    f.parents.append(p)
                    p.children.append(f)
    out = list(children.values())
    out.sort(key=lambda f: tuple(int(v) for v in f.verts))
    return out


@dataclass
class FaceHierarchy:
    n: int
    levels: List[List[Face]]
    top: Face
    vindex: VertexIndex
    group: PermutationGroup
    stats: TransformStats = field(default_factory=TransformStats)

    def representatives(self, d: int) -> List[Face]:
        return [f for f in self.levels[d] if f.representative is None]

    def class_counts(self) -> List[int]:
        return [len(self.representatives(d)) for d in range(self.n + 1)]

    @property
    def total_classes(self) -> int:
        return sum(self.class_counts())

    def check_children_complete(self, d: int) -> bool:
        """Property (i): intersecting each representative with a parent's children reproduces its child set."""
        for f in self.representatives(d):
            if d == 0:
                continue
            got = {c.key() for c in f.children}
            again = intersect_faces([_detached(f)], self.vindex, self.top)
            if {c.key() for c in again} != got:
                return False
        return True

    def to_catalog(self) -> List[dict]:
        out = []
        for d in range(self.n + 1):
            for f in self.representatives(d):
                out.append(
                    {
                        "dim": d,
                        "class_id": f.class_id,
                        "num_vertices": int(len(f.verts)),
                        "num_normals": int(len(get_normals(f, self.vindex))) if d < self.n else len(self.vindex.rel),
                        "vertices": [int(v) for v in f.verts[:64]],
                        "children": sorted({c.root()[0].class_id for c in f.children}),
                    }
                )
        return out


def _detached(face: Face) -> Face:
    """Copy with the same vertices and parents but no registered children."""
    if isinstance(face, Facet):
        g = Facet(face.dim, face.normal, face._vindex)
    else:
        g = Face(face.dim, face.verts)
    g.parents = list(face.parents)
    return g


def subgroup_chain(
    hierarchy_levels: Dict[int, List[Face]],
    full: PermutationGroup,
    vindex: VertexIndex,
    min_order: int = 12,
    cap: int = 16,
) -> List[PermutationGroup]:
    """Stabilizers of representative faces as classification subgroups.

    Orders below ``min_order`` and the full group itself are skipped; at
    most ``cap`` subgroups, sorted by order.
    """
    out: List[PermutationGroup] = []
    seen = set()
    for d in sorted(hierarchy_levels, reverse=True):
        for f in hierarchy_levels[d]:
            if f.representative is not None:
                continue
            normals = get_normals(f, vindex)
            st = set_stabilizer(full, normals)
            if st.order < min_order or st.order >= full.order:
                continue
            sig = (st.order, tuple(int(x) for x in normals))
            if sig in seen:
                continue
            seen.add(sig)
            out.append(st)
    out.sort(key=lambda g: g.order)
    return out[:cap]


def construct_face_hierarchy(
    vindex: VertexIndex,
    group: PermutationGroup,
    facets: Optional[List[Facet]] = None,
    use_subgroups: bool = True,
    budget: int = 10_000_000,
    verify: bool = True,
    subgroup_cap: int = 16,
    progress=None,
) -> FaceHierarchy:
    """Alg. of record: classify each level, then intersect representatives' children."""
    n = vindex.lat.n
    facets = facets if facets is not None else assemble_facets(vindex, materialize=False)
    top = Face(n, np.arange(len(vindex), dtype=np.int64))
    top.class_id = 0
    top.children = list(facets)
    for f in facets:
        f.parents = [top]
    levels: List[List[Face]] = [[] for _ in range(n + 1)]
    levels[n] = [top]
    levels[n - 1] = list(facets)
    stats = TransformStats()
    # facets are classified by their normals
    ri = vindex.rel_index
    for f in facets:
        rep_r = ri.representative(f.normal)
        if rep_r == f.normal:
            f.representative = None
            f.transformation = None
        else:
            f.representative = facets[rep_r]
            f.transformation = ri.witness(f.normal)
    for cid, r in enumerate(ri.representatives):
        facets[r].class_id = cid
    subgroups: List[PermutationGroup] = []
    if use_subgroups:
        subgroups = subgroup_chain({n - 1: levels[n - 1]}, group, vindex, cap=subgroup_cap)
    for d in range(n - 2, -1, -1):
        children = intersect_faces(levels[d + 1], vindex, top)
        levels[d] = children
        if progress:
            progress(f"dim {d}: {len(children)} faces constructed")
        iterated_classify(children, subgroups, group, vindex, budget=budget, stats=stats, verify=verify)
        if progress:
            progress(f"dim {d}: {sum(1 for f in children if f.representative is None)} classes")
        if use_subgroups and d == n - 2:
            subgroups = subgroup_chain({n - 1: levels[n - 1], n - 2: levels[n - 2]}, group, vindex, cap=subgroup_cap)
    return FaceHierarchy(n, levels, top, vindex, group, stats)
