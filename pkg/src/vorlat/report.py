"""Run configuration, deterministic JSON reports and report verification."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Callable, Dict, List, Optional

import mpmath
import numpy as np

from .catalog import get_lattice, load_generator_file
from .exact import as_exact, format_exact, parse_exact
from .family import ParametricFamily, ValidityWindow, OptimizationResult
from .lattice import Lattice, ParameterError, monte_carlo_G, relevant_vectors, zador_bound
from .moments import FacePropertiesCache, quantizer_constant
from .pipeline import Analysis, default_group
from .symmetry import ClassifiedVectorIndex, to_permutation_group
from .voronoi import VoronoiError, construct_face_hierarchy, vertices_from_representatives

__all__ = [
    "RunConfig",
    "resolve_lattice",
    "deep_hole",
    "analysis_report",
    "family_report",
    "class_catalog_csv",
    "verify_report",
    "dumps",
]

REPORT_VERSION = 1


@dataclass
class RunConfig:
    command: str
    lattice: Optional[str] = None
    generator_file: Optional[str] = None
    offset: Optional[str] = None
    a0: Optional[str] = None
    eps: float = 1e-9
    edge_limit: int = 64
    budget: int = 10_000_000
    subgroup_cap: int = 16
    threads: int = 1
    seed: int = 0
    digits: int = 30
    streak: int = 500
    samples: int = 1_000_000
    out: Optional[str] = None

    def validate(self) -> "RunConfig":
        if self.command in ("analyze", "optimize-family", "mc-estimate") and not (self.lattice or self.generator_file):
            raise ParameterError("give --lattice or --generator-file")
        if self.lattice and self.generator_file:
            raise ParameterError("--lattice and --generator-file are exclusive")
        if self.eps <= 0 or self.eps >= 1e-3:
            raise ParameterError("--eps must lie in (0, 1e-3)")
        if self.edge_limit < 0:
            raise ParameterError("--edge-limit must be non-negative")
        for name in ("threads", "digits", "streak", "budget", "subgroup_cap"):
            if getattr(self, name) < 1:
                raise ParameterError(f"--{name.replace('_', '-')} must be positive")
        if self.a0 is not None:
            a = as_exact(self.a0)
            if a <= 0:
                raise ParameterError("--a0 must be positive")
        return self

    def to_json(self) -> dict:
        d = asdict(self)
        d.pop("out")
        return d


def resolve_lattice(cfg: RunConfig) -> Lattice:
    if cfg.generator_file:
        return load_generator_file(cfg.generator_file)
    if cfg.lattice == "K12-laminated" and cfg.a0 is not None:
        return get_lattice(cfg.lattice, a=as_exact(cfg.a0))
    return get_lattice(cfg.lattice)


def deep_hole(analysis: Analysis) -> List[object]:
    """A vertex of maximal norm: Cartesian when the lattice has a generator, else basis coordinates."""
    lat = analysis.lattice
    vi = analysis.vertices
    best = max(
        (vi.coords(vi.representative(c)) for c in range(vi.n_classes)),
        key=lambda u: Fraction(lat.norm2(list(u))),
    )
    if lat.generator is not None:
        return list(lat.to_cartesian(list(best)))
    return list(best)


def _s(x) -> Optional[str]:
    return None if x is None else format_exact(x)


def analysis_report(cfg: RunConfig, analysis: Analysis) -> dict:
    lat = analysis.lattice
    order = analysis.perm.order
    ri = analysis.rel_index
    vi = analysis.vertices
    rel_classes = []
    for cid, r in enumerate(ri.representatives):
        size = int(ri.sizes[cid])
        rel_classes.append(
            {
                "representative": [int(x) for x in analysis.relevant.vectors[r]],
                "norm2": _s(analysis.relevant.norm2(int(r))),
                "orbit_size": size,
                "stabilizer_order": order // size,
            }
        )
    vert_classes = []
    for c in range(vi.n_classes):
        vid = vi.representative(c)
        vert_classes.append(
            {
                "representative": [_s(x) for x in vi.coords(vid)],
                "norm2": _s(lat.norm2(list(vi.coords(vid)))),
                "orbit_size": int(len(vi.classes[c].sets)),
                "tight_normals": int(len(vi.incidence(vid))),
            }
        )
    res = analysis.result
    z = zador_bound(lat.n)
    return {
        "report_version": REPORT_VERSION,
        "config": cfg.to_json(),
        "lattice": {
            "name": lat.name,
            "n": lat.n,
            "det_gram": _s(lat.det_gram),
            "generator": None if lat.generator is None else [[_s(c) for c in row] for row in lat.generator.rows],
            "gram": [[_s(c) for c in row] for row in lat.gram.rows],
        },
        "group": {"order": order, "generators": len(analysis.group.generators)},
        "relevant_vectors": {"count": len(analysis.relevant), "classes": rel_classes},
        "vertices": {"count": len(vi), "classes": vert_classes},
        "faces": {
            "class_counts": analysis.hierarchy.class_counts(),
            "total_classes": analysis.hierarchy.total_classes,
        },
        "result": res.to_json(),
        "checks": {
            "volume_certificate": res.certificate,
            "vertex_search_complete": bool(analysis.vertices.certified_complete),
            "float_exact_agreement": None if analysis.float_agreement is None else f"{analysis.float_agreement:.3e}",
            "zador_bound": mpmath.nstr(z, 12),
            "above_zador": bool(mpmath.mpf(res.G_decimal) > z),
        },
    }


def family_report(
    cfg: RunConfig, fam: ParametricFamily, window: ValidityWindow, opt: OptimizationResult, alpha=None, beta=None
) -> dict:
    samples = []
    for a in sorted(fam.samples):
        smp = fam.samples[a]
        samples.append(
            {
                "a": _s(a),
                "G_decimal": smp.analysis.result.G_decimal[:20],
                "U": _s(smp.analysis.result.U),
                "total_classes": smp.analysis.hierarchy.total_classes,
                "isotropy_defect": None if smp.isotropy_defect != smp.isotropy_defect else f"{smp.isotropy_defect:.6e}",
            }
        )
    return {
        "report_version": REPORT_VERSION,
        "config": cfg.to_json(),
        "base": fam.base.name,
        "offset": [_s(c) for c in fam.offset],
        "a0": _s(fam.a0),
        "class_counts": list(fam.structure[0]),
        "samples": samples,
        "basis": fam.basis,
        "U_over_base_volume": fam.P.to_json(),
        "base_volume": _s(fam.scale),
        "alpha": None if alpha is None else alpha.to_json(),
        "beta": None if beta is None else beta.to_json(),
        "window": window.describe(),
        "optimum": opt.describe(),
        "digits": opt.digits,
    }


def class_catalog_csv(analysis: Analysis) -> str:
    h = analysis.hierarchy
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dim", "class_id", "num_vertices", "num_normals", "child_classes"])
    for row in h.to_catalog():
        w.writerow([row["dim"], row["class_id"], row["num_vertices"], row["num_normals"], " ".join(map(str, row["children"]))])
    return buf.getvalue()


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------


def _lattice_from_report(report: dict) -> Lattice:
    cfg = report["config"]
    rc = RunConfig(command="verify", lattice=cfg.get("lattice"), generator_file=cfg.get("generator_file"), a0=cfg.get("a0"))
    return resolve_lattice(rc)


def verify_report(
    report: dict,
    mc_samples: int = 200_000,
    seed: int = 0,
    check_stabilizers: bool = True,
    progress: Optional[Callable[[str], None]] = None,
) -> Dict[str, dict]:
    """Recompute the cell from the report's vertex representatives and re-check it.

    Returns ``{check: {"pass": bool, "detail": str}}``.
    """
    say = progress or (lambda m: None)
    checks: Dict[str, dict] = {}

    def put(name, ok, detail=""):
        checks[name] = {"pass": bool(ok), "detail": detail}

    lat = _lattice_from_report(report)
    rel = relevant_vectors(lat)
    put("relevant_count", len(rel) == report["relevant_vectors"]["count"], f"{len(rel)} relevant vectors")
    grp = default_group(lat)
    to_permutation_group(grp, rel)
    order = grp.perm.order
    put("group_order", order == report["group"]["order"], f"order {order}")
    ri = ClassifiedVectorIndex(grp.perm)
    say("group ready")

    # orbit-stabilizer on facet classes with independently computed stabilizers
    ok = True
    details = []
    for cid, r in enumerate(ri.representatives):
        size = int(ri.sizes[cid])
        stab = ri.representative_stabilizer(cid).order if check_stabilizers else order // size
        details.append(f"{size}*{stab}")
        ok &= size * stab == order
    for entry in report["relevant_vectors"]["classes"]:
        ok &= entry["orbit_size"] * entry["stabilizer_order"] == order
    put("orbit_stabilizer", ok, ", ".join(details) + f" = {order}")

    # relevant-vector witnesses
    bad = 0
    for i in range(len(rel)):
        w = ri.witness(i)
        if int(w[ri.representative(i)]) != i:
            bad += 1
    put("relevant_witnesses", bad == 0, f"{bad} unsound of {len(rel)}")

    reps = [[parse_exact(c) for c in e["representative"]] for e in report["vertices"]["classes"]]
    try:
        vi = vertices_from_representatives(lat, grp, ri, reps)
    except VoronoiError as exc:
        put("vertex_inequalities", False, str(exc))
        put("volume_certificate", False, "cell cannot be rebuilt from the reported vertices")
        return checks
    put(
        "vertex_inequalities",
        len(vi) == report["vertices"]["count"],
        f"{len(vi)} vertices rebuilt in {vi.n_classes} classes",
    )
    say(f"{len(vi)} vertices rebuilt")
    try:
        hier = construct_face_hierarchy(vi, grp.perm, verify=True)
    except Exception as exc:  # any failure here means the vertex data is unsound
        put("witness_soundness", False, f"{type(exc).__name__}: {exc}")
        put("volume_certificate", False, "face hierarchy could not be built")
        return checks
    bad = 0
    total = 0
    for d in range(hier.n):
        for f in hier.levels[d]:
            rep, g = f.root()
            if rep is f:
                continue
            total += 1
            img = np.sort(vi.act_many(g, rep.verts))
            if not np.array_equal(img, np.sort(f.verts)):
                bad += 1
    put("witness_soundness", bad == 0, f"{bad} unsound of {total} classified faces")
    put(
        "class_counts",
        hier.class_counts() == report["faces"]["class_counts"],
        f"{hier.class_counts()}",
    )
    say("hierarchy rebuilt")
    cache = FacePropertiesCache(hier, grp, exact=True)
    top = cache.compute()
    res = quantizer_constant(lat, top, certify=False, digits=int(report["result"].get("G_digits", 30)))
    put("volume_certificate", res.certificate, f"volume {_s(res.volume)}")
    put(
        "result_match",
        _s(res.G) == report["result"]["G"] and _s(res.U) == report["result"]["U"],
        f"G = {_s(res.G)}",
    )
    if res.tensor is not None and res.U is not None:
        tr = sum((res.tensor[i][i] for i in range(lat.n)), Fraction(0))
        put("trace_identity", tr == res.U, f"trace {_s(tr)}")
    else:
        gram = np.array([[Fraction(c) for c in row] for row in lat.gram.rows], dtype=object)
        tr = sum(res.chart_tensor.dot(gram)[i, i] for i in range(lat.n))
        put("trace_identity", tr == res.chart_trace, f"chart trace {_s(tr)}")
    if mc_samples:
        mc = monte_carlo_G(lat, samples=mc_samples, seed=seed, relevant=rel)
        g = float(mpmath.mpf(res.G_decimal))
        dev = abs(mc.G - g) / mc.stderr
        put("monte_carlo_3sigma", dev <= 3, f"MC {mc.G:.7f} +- {mc.stderr:.1e} ({dev:.2f} sigma)")
    z = zador_bound(lat.n)
    put("zador", mpmath.mpf(res.G_decimal) > z, f"bound {mpmath.nstr(z, 10)}")
    return checks
