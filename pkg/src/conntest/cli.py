"""Command-line harness around the library.

Subcommands: gen (instance files), test (tester runs on an image file),
sweep (query-count scaling over a list of eps values, CSV plus figures),
audit (farness and per-square cost accounting), lowerbound (query-strategy
analysis against the hard distribution), oracle (exact distances on small
images).  Exit codes: 0 done, 2 invalid input, 3 internal invariant broken.
"""

from __future__ import annotations

import argparse
import re
import sys
import time
from fractions import Fraction

import numpy as np

from . import pbm, report
from .cost import (AnalyticDotCost, CostUnavailable, OutputNotConnected,
                   PatternViolation, TooLarge, exact_dist_border_connected,
                   exact_dist_connected, mod3_border_fix, structural_audit)
from .experiments import run_trials, run_trials_from_file
from .geometry import InvalidEps, as_eps
from .hardlb import (InvalidParams, classify_windows, farness_audit,
                     make_hard_params, measure_cstar,
                     revealing_probability_exact, revealing_probability_mc,
                     sample_hard, strategy_bridges, strategy_grid,
                     strategy_uniform)
from .image import Image
from .instances import DensityInfeasible, gen_connected, gen_dot_far
from .oracle import AllWhiteSource, PhaseViolation
from .testers import (PremiseViolated, UnsoundCertificate, normalize,
                      query_report, test_connectedness, verify_verdict)


class UsageError(ValueError):
    pass


_EPS_POW = re.compile(r"2\^-(\d+)")
_EPS_FRAC = re.compile(r"(\d+)/(\d+)")


def parse_eps(text: str, allow_rounding: bool = False) -> Fraction:
    """Accept eps as "1/16" or "2^-4"; other shapes are rejected, and
    non-dyadic values are rounded down only when allow_rounding is set."""
    text = text.strip()
    m = _EPS_POW.fullmatch(text)
    if m:
        value = Fraction(1, 2 ** int(m.group(1)))
    else:
        m = _EPS_FRAC.fullmatch(text)
        if not m:
            raise UsageError(f"eps must look like 1/16 or 2^-4, got {text!r}")
        if int(m.group(2)) == 0:
            raise UsageError("eps denominator must be nonzero")
        value = Fraction(int(m.group(1)), int(m.group(2)))
    if not 0 < value < 1:
        raise UsageError(f"eps must be in (0, 1), got {text!r}")
    try:
        return as_eps(value)
    except InvalidEps:
        if not allow_rounding:
            raise UsageError(
                f"eps = {text} is not a power of 1/2; pass --normalize "
                f"to round down"
            ) from None
    level = 0
    while Fraction(1, 1 << level) > value:
        level += 1
    return Fraction(1, 1 << level)


def minimal_premise_side(eps) -> int:
    """Smallest normalized side 2^j + 1 satisfying n^2 >= 64 / eps^3."""
    eps = as_eps(eps)
    j = 0
    while (((1 << j) + 1) ** 2) * eps ** 3 < 64:
        j += 1
    return (1 << j) + 1


def _emit(args, doc) -> None:
    text = report.to_json_text(doc)
    if getattr(args, "out", None):
        report.write_json(doc, args.out)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)


def _sidecar_path(out: str) -> str:
    return re.sub(r"\.pbm$", "", out) + ".json"


# --- gen -------------------------------------------------------------------

def cmd_gen_dots(args) -> int:
    eps = parse_eps(args.eps, args.normalize)
    inst = gen_dot_far(args.n, eps, seed=args.seed, spacing=args.spacing,
                       placement=args.placement, count=args.count)
    out = args.out or "dots.pbm"
    pbm.save(out, inst.image, binary=not args.ascii)
    meta = inst.meta()
    meta.update({"seed": args.seed, "image": out})
    doc = report.json_document("gen-dots", meta)
    report.write_json(doc, _sidecar_path(out))
    print(f"wrote {out} and {_sidecar_path(out)} "
          f"(dots={inst.count}, certifiedFar={inst.certified_far})")
    return 0


def cmd_gen_hard(args) -> int:
    eps = parse_eps(args.eps, args.normalize)
    params = make_hard_params(args.n, eps)
    image, meta = sample_hard(params, args.seed)
    out = args.out or "hard.pbm"
    pbm.save(out, image, binary=not args.ascii)
    audit = farness_audit(image, eps, area_side=params.n)
    doc = report.json_document("gen-hard", {
        "n": params.n,
        "eps": str(params.eps),
        "seed": args.seed,
        "level": meta.level,
        "windowIndex": meta.window_index,
        "windowOrigin": list(meta.window_origin),
        "discOffsets": meta.disc_offsets.tolist(),
        "componentCount": audit["componentCount"],
        "distanceLowerBound": str(audit["distanceLowerBound"]),
        "isEpsFar": audit["isEpsFar"],
        "image": out,
    })
    report.write_json(doc, _sidecar_path(out))
    print(f"wrote {out} and {_sidecar_path(out)} "
          f"(level={meta.level}, components={audit['componentCount']})")
    return 0


def cmd_gen_connected(args) -> int:
    image = gen_connected(args.n, family=args.family, seed=args.seed)
    out = args.out or f"{args.family}.pbm"
    pbm.save(out, image, binary=not args.ascii)
    doc = report.json_document("gen-connected", {
        "family": args.family,
        "n": args.n,
        "seed": args.seed,
        "blackCount": int(image.bits.sum()),
        "connected": True,
        "image": out,
    })
    report.write_json(doc, _sidecar_path(out))
    print(f"wrote {out} and {_sidecar_path(out)}")
    return 0


# --- test ------------------------------------------------------------------

def _check_normalized(side: int, eps: Fraction, allow: bool) -> None:
    n2, eps2 = normalize(side, eps)
    if not allow and (n2 != side or eps2 != eps):
        raise UsageError(
            f"side {side} with eps {eps} would be padded to side {n2} with "
            f"effective eps {eps2}; pass --normalize to accept that"
        )


def cmd_test(args) -> int:
    eps = parse_eps(args.eps, args.normalize)
    image = pbm.load(args.image)
    _check_normalized(image.side, eps, args.normalize)
    t0 = time.perf_counter()
    if args.trials == 1:
        verdict = test_connectedness(
            image, eps, variant=args.variant, seed=args.seed,
            budget_factor=args.budget_factor,
        )
        result = query_report(verdict)
        result["verdict"] = report.verdict_dict(verdict)
        if not verdict.accepted and not args.no_verify:
            verify_verdict(image, verdict)
            result["certificateVerified"] = True
        doc = report.json_document("test-run", result,
                                   timing_s=time.perf_counter() - t0)
    else:
        summary = run_trials_from_file(
            args.image, eps, args.variant, args.trials, root_seed=args.seed,
            verify=not args.no_verify, budget_factor=args.budget_factor,
            jobs=args.jobs,
        )
        body = summary.to_dict()
        runtime = body.pop("runtime_s")
        doc = report.json_document("test-summary", body, timing_s=runtime)
    _emit(args, doc)
    return 0


# --- sweep -----------------------------------------------------------------

def _sweep_pool(family: str, eps: Fraction, n: int | None, root_seed: int,
                pool_size: int):
    if family == "white":
        side = n or minimal_premise_side(eps)
        return [AllWhiteSource(side)]
    if family == "dots":
        side = n or 1025
        return [
            gen_dot_far(side, eps, seed=root_seed + 31 * j, spacing=2)
            .image
            for j in range(pool_size)
        ]
    side = n or 513
    return [
        gen_connected(side, family=family, seed=root_seed + 31 * j)
        for j in range(pool_size)
    ]


def cmd_sweep(args) -> int:
    eps_values = [parse_eps(tok, args.normalize)
                  for tok in args.eps.split(",") if tok.strip()]
    rows = []
    for eps in eps_values:
        pool = _sweep_pool(args.family, eps, args.n, args.seed, args.pool)
        summary = run_trials(pool, eps, args.variant, args.trials,
                             root_seed=args.seed, verify=not args.no_verify)
        rows.append({
            "eps": str(eps),
            "meanQueries": summary.mean_queries,
            "maxQueries": summary.max_queries,
            "rejectionRate": summary.rejection_rate,
            "runtime": summary.runtime_s,
        })
        print(f"eps={eps}: mean={summary.mean_queries:.1f} "
              f"max={summary.max_queries} reject={summary.rejection_rate:.3f}")
    out = args.out or "sweep.csv"
    report.write_csv(rows, out)
    print(f"wrote {out}")
    if rows and not args.no_figures:
        for path in report.render_sweep_figures(rows, out):
            print(f"wrote {path}")
    return 0


# --- audit -----------------------------------------------------------------

def cmd_audit(args) -> int:
    eps = parse_eps(args.eps, args.normalize)
    image = pbm.load(args.image)
    t0 = time.perf_counter()
    far = farness_audit(image, eps)
    result = {
        "side": image.side,
        "eps": str(eps),
        "farness": {
            "componentCount": far["componentCount"],
            "distanceLowerBound": str(far["distanceLowerBound"]),
            "epsArea": str(far["epsArea"]),
            "isEpsFar": far["isEpsFar"],
        },
    }
    try:
        provider = AnalyticDotCost.from_image(image, eps)
        audit = structural_audit(image.side, eps, provider)
        result["structural"] = {
            "perLevel": [str(v) for v in audit.per_level],
            "total": str(audit.total),
            "threshold": str(audit.threshold),
            "passes": audit.passes,
            "nearThreshold": audit.near_threshold,
            "provenance": audit.provenance,
        }
    except (PatternViolation, CostUnavailable) as exc:
        if args.require_structural:
            raise UsageError(f"structural audit unavailable: {exc}") from exc
        result["structural"] = {"skipped": str(exc)}
    doc = report.json_document("audit", result,
                               timing_s=time.perf_counter() - t0)
    _emit(args, doc)
    return 0


# --- lowerbound --------------------------------------------------------------

def _load_queries(path):
    data = np.loadtxt(path, delimiter=",", dtype=np.int64, ndmin=2)
    if data.shape[1] != 2:
        raise UsageError("query file needs two comma-separated columns: x,y")
    return data[:, 0], data[:, 1]


def cmd_lowerbound(args) -> int:
    eps = parse_eps(args.eps, args.normalize)
    params = make_hard_params(args.n, eps)
    t0 = time.perf_counter()
    if args.strategy == "file":
        if not args.queries:
            raise UsageError("--queries FILE is required with strategy=file")
        qx, qy = _load_queries(args.queries)
    elif args.strategy == "uniform":
        qx, qy = strategy_uniform(params, args.q, seed=args.seed)
    elif args.strategy == "bridges":
        qx, qy = strategy_bridges(params, args.q)
    else:
        qx, qy = strategy_grid(params, args.q)
    exact = revealing_probability_exact(params, qx, qy)
    mc, stderr = revealing_probability_mc(params, qx, qy, args.trials,
                                          seed=args.seed)
    stats = classify_windows(params, qx, qy)
    result = {
        "n": params.n,
        "eps": str(params.eps),
        "strategy": args.strategy,
        "seed": args.seed,
        "queriesRequested": args.q,
        "queriesDistinct": stats.q,
        "revealingExact": exact,
        "revealingMc": mc,
        "revealingMcStderr": stderr,
        "mcTrials": args.trials,
        "windowStats": {
            "perLevel": stats.per_level,
            "lowerBoundAssociated": str(stats.lower_bound_assoc),
            "lowerBoundSeries": str(stats.lower_bound_series),
            "holdsAssociated": stats.holds_assoc,
            "holdsTopLevel": stats.holds_top,
            "holdsRecursion": stats.holds_recursion,
            "holdsSeries": stats.holds_series,
        },
    }
    if args.cstar:
        result["cStar"] = measure_cstar(params, seeds=(args.seed,))
    doc = report.json_document("lowerbound", result,
                               timing_s=time.perf_counter() - t0)
    _emit(args, doc)
    return 0


# --- oracle ------------------------------------------------------------------

def cmd_oracle(args) -> int:
    image = pbm.load(args.image)
    result = {"side": image.side, "method": args.method}
    if args.method == "exact":
        dist = (exact_dist_border_connected(image.bits)
                if args.border else exact_dist_connected(image.bits))
        result["target"] = "border-connected" if args.border else "connected"
        result["distance"] = dist
    else:
        fixed, cost = mod3_border_fix(image)
        result["target"] = "border-connected"
        result["cost"] = cost
        result["blackAfter"] = int(fixed.bits.sum())
    doc = report.json_document("oracle", result)
    _emit(args, doc)
    return 0


# --- wiring ------------------------------------------------------------------

def _add_common(p, eps_default=None) -> None:
    p.add_argument("--eps", required=eps_default is None, default=eps_default)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--normalize", action="store_true",
                   help="accept sides and eps values that need rounding")
    p.add_argument("--out")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="conntest",
        description="Property tester for connectedness of binary images.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate instance files")
    gsub = gen.add_subparsers(dest="what", required=True)

    g_dots = gsub.add_parser("dots", help="scattered isolated dots, far")
    g_dots.add_argument("--n", type=int, required=True)
    g_dots.add_argument("--spacing", type=int, default=2)
    g_dots.add_argument("--placement", choices=("lattice", "blocks"),
                        default="lattice")
    g_dots.add_argument("--count", type=int)
    g_dots.add_argument("--ascii", action="store_true")
    _add_common(g_dots)
    g_dots.set_defaults(func=cmd_gen_dots)

    g_hard = gsub.add_parser("hard", help="hard window instance")
    g_hard.add_argument("--n", type=int, required=True)
    g_hard.add_argument("--ascii", action="store_true")
    _add_common(g_hard)
    g_hard.set_defaults(func=cmd_gen_hard)

    g_conn = gsub.add_parser("connected", help="connected control images")
    g_conn.add_argument("--n", type=int, required=True)
    g_conn.add_argument("--family",
                        choices=("blob", "rects", "serpentine", "solid"),
                        default="blob")
    g_conn.add_argument("--ascii", action="store_true")
    _add_common(g_conn, eps_default="1/16")
    g_conn.set_defaults(func=cmd_gen_connected)

    t = sub.add_parser("test", help="run the tester on an image file")
    t.add_argument("--image", required=True)
    t.add_argument("--variant", choices=("adaptive", "nonadaptive"),
                   default="adaptive")
    t.add_argument("--trials", type=int, default=1)
    t.add_argument("--jobs", type=int, default=1)
    t.add_argument("--budget-factor", type=float, default=8.0)
    t.add_argument("--no-verify", action="store_true")
    _add_common(t)
    t.set_defaults(func=cmd_test)

    s = sub.add_parser("sweep", help="query scaling across eps values")
    s.add_argument("--eps", required=True,
                   help="comma-separated, like 2^-4,2^-5,2^-6")
    s.add_argument("--variant", choices=("adaptive", "nonadaptive"),
                   default="nonadaptive")
    s.add_argument("--family",
                   choices=("white", "dots", "blob", "rects", "serpentine",
                            "solid"),
                   default="white")
    s.add_argument("--n", type=int)
    s.add_argument("--trials", type=int, default=20)
    s.add_argument("--pool", type=int, default=4)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--normalize", action="store_true")
    s.add_argument("--no-verify", action="store_true")
    s.add_argument("--no-figures", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_sweep)

    a = sub.add_parser("audit", help="farness and per-square cost audit")
    a.add_argument("--image", required=True)
    a.add_argument("--require-structural", action="store_true")
    _add_common(a)
    a.set_defaults(func=cmd_audit)

    lb = sub.add_parser("lowerbound", help="query strategies vs hard family")
    lb.add_argument("--n", type=int, required=True)
    lb.add_argument("--strategy",
                    choices=("uniform", "bridges", "grid", "file"),
                    default="uniform")
    lb.add_argument("--q", type=int, default=1024)
    lb.add_argument("--queries", help="CSV of x,y rows for strategy=file")
    lb.add_argument("--trials", type=int, default=20000)
    lb.add_argument("--cstar", action="store_true")
    _add_common(lb)
    lb.set_defaults(func=cmd_lowerbound)

    o = sub.add_parser("oracle", help="exact distances on small images")
    o.add_argument("--image", required=True)
    o.add_argument("--method", choices=("exact", "mod3"), default="exact")
    o.add_argument("--border", action="store_true")
    o.add_argument("--out")
    o.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, InvalidEps, InvalidParams, PremiseViolated,
            DensityInfeasible, TooLarge, CostUnavailable, PatternViolation,
            pbm.PbmError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (UnsoundCertificate, OutputNotConnected, PhaseViolation,
            AssertionError) as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
