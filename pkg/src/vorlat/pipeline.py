"""End-to-end analysis of one lattice: relevant vectors to quantizer constant."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .lattice import Lattice, RelevantVectorSet, relevant_vectors
from .moments import FacePropertiesCache, MomentError, SecondMomentResult, quantizer_constant
from .symmetry import ClassifiedVectorIndex, MatrixGroup, PermutationGroup, to_permutation_group
from .voronoi import FaceHierarchy, VertexIndex, construct_face_hierarchy, find_vertices, fingerprint

log = logging.getLogger(__name__)

__all__ = ["Analysis", "StageError", "analyze_lattice", "default_group"]


class StageError(RuntimeError):
    """Failure inside one pipeline stage; ``stage`` names it."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class Analysis:
    lattice: Lattice
    relevant: RelevantVectorSet
    group: MatrixGroup
    rel_index: ClassifiedVectorIndex
    vertices: VertexIndex
    hierarchy: FaceHierarchy
    moments: FacePropertiesCache
    result: SecondMomentResult
    float_agreement: Optional[float] = None
    timings: Dict[str, float] = field(default_factory=dict)

    @property
    def perm(self) -> PermutationGroup:
        return self.group.perm

    def class_structure(self) -> Tuple:
        """Per-dimension class counts and fingerprint multisets (comparable across a family)."""
        h = self.hierarchy
        counts = tuple(h.class_counts())
        fps = tuple(
            tuple(sorted(fingerprint(f, self.vertices) for f in h.representatives(d))) for d in range(h.n)
        )
        return counts, fps, tuple(int(s) for s in self.rel_index.sizes), tuple(len(c.sets) for c in self.vertices.classes)


def default_group(lat: Lattice) -> MatrixGroup:
    """Stored symmetries, or just ``-I`` when none are known."""
    gens = lat.symmetry or [-np.eye(lat.n, dtype=np.int64)]
    return MatrixGroup(lat, gens)


def _stage(name: str, fn, timings: Dict[str, float]):
    t0 = time.perf_counter()
    try:
        out = fn()
    except (KeyboardInterrupt, MemoryError):
        raise
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc
    timings[name] = time.perf_counter() - t0
    return out


def analyze_lattice(
    lat: Lattice,
    group: Optional[MatrixGroup] = None,
    *,
    relevant: Optional[RelevantVectorSet] = None,
    group_order: Optional[int] = None,
    streak: int = 500,
    seed: int = 0,
    budget: int = 10_000_000,
    use_subgroups: bool = True,
    subgroup_cap: int = 16,
    eps: float = 1e-9,
    edge_limit: int = 64,
    check_float: bool = True,
    certify: bool = True,
    digits: int = 30,
    parameter=None,
    progress: Optional[Callable[[str], None]] = None,
) -> Analysis:
    """Run every stage and return the exact result with its intermediate structures."""
    timings: Dict[str, float] = {}
    say = progress or (lambda m: None)
    rel = relevant if relevant is not None else _stage("relevant", lambda: relevant_vectors(lat), timings)
    say(f"{len(rel)} relevant vectors")
    grp = group if group is not None else default_group(lat)

    def build_group():
        if grp.perm is None or grp.relevant is not rel:
            to_permutation_group(grp, rel, order=group_order)
        return ClassifiedVectorIndex(grp.perm)

    index = _stage("symmetry", build_group, timings)
    say(f"group order {grp.perm.order}, {len(index)} relevant-vector classes")
    verts = _stage(
        "vertices",
        lambda: find_vertices(lat, grp, index, streak=streak, seed=seed, eps=eps, edge_limit=edge_limit, progress=progress),
        timings,
    )
    say(f"{len(verts)} vertices in {verts.n_classes} classes")
    hier = _stage(
        "hierarchy",
        lambda: construct_face_hierarchy(
            verts, grp.perm, use_subgroups=use_subgroups, budget=budget, subgroup_cap=subgroup_cap, progress=progress
        ),
        timings,
    )
    say(f"{hier.total_classes} face classes {hier.class_counts()}")
    cache = FacePropertiesCache(hier, grp, exact=True)
    top = _stage("moments", lambda: cache.compute(progress=progress), timings)
    agreement = None
    if check_float:
        fcache = FacePropertiesCache(hier, grp, exact=False)
        _stage("moments-float", lambda: fcache.compute(), timings)
        agreement, worst = _compare(cache, fcache, hier)
        if agreement > 1e-9:
            # the exact result stands on its own certificate; keep it and report the disagreement
            log.warning("float and exact calculators differ by %.3g (worst at %s)", agreement, worst)
            say(f"float and exact calculators differ by {agreement:.3g} (worst at {worst})")
    result = _stage(
        "result", lambda: quantizer_constant(lat, top, parameter=parameter, digits=digits, certify=certify), timings
    )
    return Analysis(lat, rel, grp, index, verts, hier, cache, result, agreement, timings)


def _compare(exact: FacePropertiesCache, approx: FacePropertiesCache, hier: FaceHierarchy) -> Tuple[float, Optional[str]]:
    """Largest relative deviation over volumes, barycenters and tensors of all representatives."""
    worst = 0.0
    where = None
    for d in range(hier.n + 1):
        for k, f in enumerate(hier.representatives(d)):
            e, a = exact.get(f), approx.get(f)
            pairs = [(float(e.rho), a.rho)]
            pairs += list(zip(map(float, e.barycenter), a.barycenter))
            pairs += list(zip(map(float, e.tensor.ravel()), a.tensor.ravel()))
            scale = max(1.0, max(abs(x) for x, _ in pairs))
            dev = max(abs(x - y) for x, y in pairs) / scale
            if dev > worst:
                worst, where = dev, f"dim {d} class {k}"
    return worst, where
