"""Command-line entry point: ``vorlat <verb> [flags]``."""

from __future__ import annotations

import argparse
import json
import sys
from typing import List, Optional

from .catalog import available_lattices
from .exact import as_exact, format_exact
from .family import FamilyError, analyze_family, minimize_G, tensor_decomposition, validity_window
from .lattice import LatticeError, ParameterError, monte_carlo_G
from .pipeline import StageError, analyze_lattice
from .report import RunConfig, analysis_report, class_catalog_csv, deep_hole, dumps, family_report, resolve_lattice, verify_report

EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_STAGE = 3


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--lattice", help=f"catalog name ({', '.join(available_lattices())})")
    common.add_argument("--generator-file", help="JSON generator file with exact-scalar strings")
    common.add_argument("--offset", help="laminating offset: 'deep-hole' or comma-separated exact scalars")
    common.add_argument("--a0", help="layer spacing (family centre, or K12-laminated parameter)")
    common.add_argument("--eps", type=float, default=1e-9, help="LP tight-set tolerance for the vertex search")
    common.add_argument("--edge-limit", type=int, default=64, help="enumerate all edges at vertex classes with at most this many tight normals")
    common.add_argument("--budget", type=int, default=10_000_000, help="transporter search budget per equivalence test")
    common.add_argument("--subgroup-cap", type=int, default=16, help="maximum subgroups in the classification chain")
    common.add_argument("--threads", type=int, default=1, help="worker count (recorded; work runs in one process)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--digits", type=int, default=30, help="decimal digits in reports")
    common.add_argument("--streak", type=int, default=500, help="quiet rounds before the vertex search stops")
    common.add_argument("--samples", type=int, default=None, help="Monte Carlo sample count")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("-v", "--verbose", action="store_true", help="progress on stderr")

    p = argparse.ArgumentParser(prog="vorlat", description="Exact Voronoi-cell second moments of lattices.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common], help="full exact analysis of one lattice")
    sub.add_parser("optimize-family", parents=[common], help="optimize the layer spacing of a laminated family")
    v = sub.add_parser("verify", parents=[common], help="re-check an analysis report")
    v.add_argument("report", nargs="?", help="analysis report (default: analyze --lattice afresh)")
    sub.add_parser("catalog", parents=[common], help="list lattices, or export a face-class catalog as CSV")
    sub.add_parser("mc-estimate", parents=[common], help="Monte Carlo estimate of G")
    return p


def _config(args) -> RunConfig:
    samples = args.samples
    if samples is None:
        samples = 200_000 if args.command == "verify" else 1_000_000
    return RunConfig(
        command=args.command,
        lattice=args.lattice,
        generator_file=args.generator_file,
        offset=args.offset,
        a0=args.a0,
        eps=args.eps,
        edge_limit=args.edge_limit,
        budget=args.budget,
        subgroup_cap=args.subgroup_cap,
        threads=args.threads,
        seed=args.seed,
        digits=args.digits,
        streak=args.streak,
        samples=samples,
        out=args.out,
    )


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _analyze(cfg: RunConfig, say):
    lat = resolve_lattice(cfg)
    return analyze_lattice(
        lat,
        streak=cfg.streak,
        seed=cfg.seed,
        budget=cfg.budget,
        subgroup_cap=cfg.subgroup_cap,
        eps=cfg.eps,
        edge_limit=cfg.edge_limit,
        digits=cfg.digits,
        parameter=as_exact(cfg.a0) if cfg.a0 is not None and cfg.lattice == "K12-laminated" else None,
        progress=say,
    )


def cmd_analyze(cfg: RunConfig, say) -> int:
    an = _analyze(cfg, say)
    _emit(dumps(analysis_report(cfg, an)), cfg.out)
    return 0


def cmd_optimize_family(cfg: RunConfig, say) -> int:
    base = resolve_lattice(cfg)
    if cfg.a0 is None:
        raise ParameterError("optimize-family needs --a0")
    if cfg.offset is None or cfg.offset == "deep-hole":
        offset = deep_hole(analyze_lattice(base, streak=cfg.streak, seed=cfg.seed, check_float=False))
    else:
        offset = [as_exact(c.strip()) for c in cfg.offset.split(",")]
    say(f"offset {[format_exact(c) for c in offset]}")
    fam = analyze_family(base, offset, as_exact(cfg.a0), streak=cfg.streak, seed=cfg.seed, progress=say)
    win = validity_window(fam, progress=say)
    opt = minimize_G(fam, win, digits=cfg.digits)
    alpha = beta = None
    if fam.alpha is not None:
        alpha, beta = tensor_decomposition(fam)
    _emit(dumps(family_report(cfg, fam, win, opt, alpha, beta)), cfg.out)
    return 0


def cmd_verify(cfg: RunConfig, report_path: Optional[str], say) -> int:
    if report_path:
        with open(report_path) as fh:
            report = json.load(fh)
    else:
        if not (cfg.lattice or cfg.generator_file):
            raise ParameterError("give a report path, --lattice or --generator-file")
        report = json.loads(dumps(analysis_report(cfg, _analyze(cfg, say))))
    checks = verify_report(report, mc_samples=cfg.samples, seed=cfg.seed, progress=say)
    ok = all(c["pass"] for c in checks.values())
    summary = {"all_pass": ok, "checks": checks, "failed": sorted(k for k, c in checks.items() if not c["pass"])}
    _emit(json.dumps(summary, indent=2, sort_keys=True) + "\n", cfg.out)
    return 0 if ok else EXIT_FAIL


def cmd_catalog(cfg: RunConfig, say) -> int:
    if not (cfg.lattice or cfg.generator_file):
        _emit(json.dumps({"lattices": available_lattices()}, indent=2) + "\n", cfg.out)
        return 0
    an = _analyze(cfg, say)
    _emit(class_catalog_csv(an), cfg.out)
    return 0


def cmd_mc_estimate(cfg: RunConfig, say) -> int:
    lat = resolve_lattice(cfg)
    est = monte_carlo_G(lat, samples=cfg.samples, seed=cfg.seed)
    rep = {
        "config": cfg.to_json(),
        "lattice": lat.name,
        "G": f"{est.G:.10f}",
        "stderr": f"{est.stderr:.3e}",
        "samples": est.samples,
    }
    _emit(json.dumps(rep, indent=2, sort_keys=True) + "\n", cfg.out)
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    args = _parser().parse_args(argv)
    say = (lambda m: print(m, file=sys.stderr, flush=True)) if args.verbose else (lambda m: None)
    try:
        cfg = _config(args)
        if args.command != "verify" or not args.report:
            cfg.validate()
        if args.command == "analyze":
            return cmd_analyze(cfg, say)
        if args.command == "optimize-family":
            return cmd_optimize_family(cfg, say)
        if args.command == "verify":
            return cmd_verify(cfg, args.report, say)
        if args.command == "catalog":
            return cmd_catalog(cfg, say)
        return cmd_mc_estimate(cfg, say)
    except StageError as exc:
        print(f"error: stage {exc.stage}: {exc.cause}", file=sys.stderr)
        return EXIT_STAGE
    except (ParameterError, LatticeError, KeyError, ValueError, FamilyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
