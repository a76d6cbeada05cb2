"""Command-line entry point.

Subcommands: generate (poisson | binomial | cox), cluster, stats, baseline,
detect, chains. Structured artifacts are JSON, tabular outputs are CSV.
Every command is deterministic given its full flag set; CHN2_THREADS caps
worker parallelism for seed fan-out.
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from . import chains as chainmod
from . import stats as statsmod
from .geometry import Metric, Window
from .hierarchy import build_hierarchy, genealogy_newick, load_hierarchy, save_hierarchy
from .pointprocess import (
    CoxBallSpec,
    gen_binomial,
    gen_cox_balls,
    gen_poisson,
    load_sample,
    save_sample,
)


class CliError(ValueError):
    pass


def parse_window(text: str) -> Window:
    """Comma-separated lo then hi per axis, e.g. '0,0,110,110' in 2-D."""
    vals = [float(v) for v in text.split(",") if v.strip() != ""]
    if len(vals) % 2 or not vals:
        raise CliError(f"window needs an even number of coordinates, got {text!r}")
    d = len(vals) // 2
    return Window(np.asarray(vals[:d]), np.asarray(vals[d:]))


def parse_centers(text: str) -> np.ndarray:
    """Semicolon-separated coordinate tuples, e.g. '60,60;140,80'."""
    rows = [
        [float(v) for v in chunk.split(",")]
        for chunk in text.split(";")
        if chunk.strip()
    ]
    if not rows or len({len(r) for r in rows}) != 1:
        raise CliError(f"malformed centers: {text!r}")
    return np.asarray(rows, dtype=float)


def parse_seed_range(text: str):
    """'a..b' inclusive, or a single seed."""
    if ".." in text:
        a, b = text.split("..", 1)
        lo, hi = int(a), int(b)
        if hi < lo:
            raise CliError(f"empty seed range {text!r}")
        return list(range(lo, hi + 1))
    return [int(text)]


def metric_for(name: str, window: Window) -> Metric:
    if name == "euclidean":
        return Metric.euclidean()
    if name == "torus":
        return Metric.torus(window)
    raise CliError(f"unknown metric {name!r}")


def cmd_generate(args) -> int:
    window = parse_window(args.window)
    dim = args.dim or window.dim
    if dim != window.dim:
        raise CliError(f"--dim {dim} does not match window dimension {window.dim}")
    if args.process == "poisson":
        sample = gen_poisson(args.lam, window, dim, args.seed)
    elif args.process == "binomial":
        if args.count is None:
            raise CliError("binomial needs --count")
        sample = gen_binomial(args.count, window, dim, args.seed)
    else:
        if args.centers is not None:
            if args.radii is None:
                raise CliError("fixed-mode cox needs --radii")
            spec = CoxBallSpec(
                lam=args.lam,
                centers=parse_centers(args.centers),
                radii=np.asarray([float(v) for v in args.radii.split(",")]),
            )
        else:
            if args.center_intensity is None or args.radius_range is None:
                raise CliError(
                    "random-mode cox needs --center-intensity and --radius-range"
                )
            r_min, r_max = (float(v) for v in args.radius_range.split(","))
            spec = CoxBallSpec(
                lam=args.lam,
                center_intensity=args.center_intensity,
                radius_range=(r_min, r_max),
            )
        sample = gen_cox_balls(spec, window, dim, args.seed)
        if sample.warning:
            print(f"warning: {sample.warning}", file=sys.stderr)
    save_sample(sample, args.out)
    print(f"wrote {sample.n} points to {args.out}")
    return 0


def cmd_cluster(args) -> int:
    sample = load_sample(args.input)
    metric = metric_for(args.metric, sample.window)
    h = build_hierarchy(sample, metric, max_levels=args.max_levels)
    save_hierarchy(h, args.out)
    print(
        f"wrote hierarchy ({len(h.levels)} levels, termination={h.termination}) to {args.out}"
    )
    if args.newick:
        with open(args.newick, "w", encoding="utf-8") as fh:
            fh.write(genealogy_newick(h))
        print(f"wrote newick genealogy to {args.newick}")
    return 0


def cmd_stats(args) -> int:
    h = load_hierarchy(args.hierarchy)
    rows = statsmod.level_stats(h)
    statsmod.write_levels_csv(rows, args.out)
    print(f"wrote {len(rows)} level rows to {args.out}")
    return 0


def cmd_baseline(args) -> int:
    window = parse_window(args.window)
    metric = metric_for(args.metric, window)
    seeds = parse_seed_range(args.seeds)
    baseline = statsmod.poisson_baseline(
        window,
        expected_count=args.count,
        n_seeds=len(seeds),
        metric=metric,
        seeds=seeds,
    )
    # Reuse the levels CSV schema: only the distance series and the per-level
    # seed support are meaningful for an averaged baseline.
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(statsmod.LEVELS_CSV_FIELDS)
        for k, (val, sup) in enumerate(zip(baseline.values, baseline.support)):
            writer.writerow([k, "", "", sup, "", "", repr(val)])
    print(f"wrote baseline series ({len(baseline.values)} levels) to {args.out}")
    return 0


def cmd_detect(args) -> int:
    target = statsmod.read_series_csv(args.target)
    baseline = statsmod.read_series_csv(args.baseline)
    cfg = statsmod.DetectorConfig(tau=args.tau)
    t, b = statsmod.align_series(target, baseline)
    result = statsmod.detect_aggregation(t, b, cfg)
    statsmod.write_detector_csv(t, b, result, args.out)
    if result.detected:
        print(f"aggregation detected at level {result.level}")
    else:
        print("no aggregation detected")
    return 0


def cmd_chains(args) -> int:
    rows = []
    for n in args.n:
        closed = chainmod.expected_chain_count_formula(args.lam, args.R, args.dim, n)
        recursive = chainmod.expected_chain_count_recursive(args.lam, args.R, args.dim, n)
        if args.mode == "mc":
            cfg = chainmod.ChainCountConfig(
                lam=args.lam, R=args.R, d=args.dim, n=n, trials=args.trials, seed=args.seed
            )
            mean, stderr = chainmod.mc_chain_count(cfg)
            rows.append((n, closed, recursive, mean, stderr, args.trials))
        else:
            rows.append((n, closed, recursive, "", "", ""))
    out = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        writer = csv.writer(out)
        writer.writerow(["n", "closed_form", "recursive", "mc_mean", "mc_stderr", "trials"])
        for row in rows:
            writer.writerow(row)
    finally:
        if args.out:
            out.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chn2",
        description="Clustroid hierarchical nearest-neighbor clustering on point samples",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a sample file")
    g.add_argument("process", choices=["poisson", "binomial", "cox"])
    g.add_argument("--lambda", dest="lam", type=float, default=1.0,
                   help="intensity (poisson, cox)")
    g.add_argument("--count", type=int, help="fixed count (binomial)")
    g.add_argument("--window", required=True, help="lo,...,hi,... per axis")
    g.add_argument("--dim", type=int)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--centers", help="cox fixed mode: 'x,y;x,y;...'")
    g.add_argument("--radii", help="cox fixed mode: 'r1,r2,...'")
    g.add_argument("--center-intensity", type=float, help="cox random mode")
    g.add_argument("--radius-range", help="cox random mode: 'r_min,r_max'")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    c = sub.add_parser("cluster", help="build the hierarchy for a sample file")
    c.add_argument("--input", required=True)
    c.add_argument("--metric", choices=["euclidean", "torus"], default="euclidean")
    c.add_argument("--max-levels", type=int, default=64)
    c.add_argument("--out", required=True)
    c.add_argument("--newick", help="also write the genealogy dendrogram")
    c.set_defaults(func=cmd_cluster)

    s = sub.add_parser("stats", help="per-level statistics CSV for a hierarchy")
    s.add_argument("--hierarchy", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_stats)

    b = sub.add_parser("baseline", help="seed-averaged Poisson mean-distance series")
    b.add_argument("--window", required=True)
    b.add_argument("--count", type=float, required=True,
                   help="expected point count matching the target sample")
    b.add_argument("--seeds", required=True, help="'a..b' or a single master seed")
    b.add_argument("--metric", choices=["euclidean", "torus"], default="euclidean")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_baseline)

    d = sub.add_parser("detect", help="ratio-jump detection target vs baseline")
    d.add_argument("--target", required=True, help="levels CSV of the target")
    d.add_argument("--baseline", required=True, help="levels CSV of the baseline")
    d.add_argument("--tau", type=float, default=0.3)
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_detect)

    ch = sub.add_parser("chains", help="expected/Monte-Carlo chain counts")
    ch.add_argument("mode", choices=["mc", "formula"])
    ch.add_argument("--lambda", dest="lam", type=float, default=1.0)
    ch.add_argument("--R", type=float, default=1.0)
    ch.add_argument("--dim", type=int, default=2)
    ch.add_argument("--n", type=int, nargs="+", required=True)
    ch.add_argument("--trials", type=int, default=10000)
    ch.add_argument("--seed", type=int, default=0)
    ch.add_argument("--out")
    ch.set_defaults(func=cmd_chains)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
