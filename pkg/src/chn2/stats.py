"""Per-level statistics, intensity decay, Poisson baselines, and the
ratio-jump aggregation detector.

The "mean distance between clusters at level k" is the mean merge-edge
length over all level-k pairs, i.e. the single-linkage distance from each
pair to its nearest foreign pair; it is the only per-level distance the
construction computes. The detector compares a target series against a
seed-averaged Poisson baseline through the ratio R_k = target_k/baseline_k
and fires at the first level whose relative increase in R exceeds tau.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .geometry import Metric, Window
from .hierarchy import Hierarchy, build_hierarchy
from .pointprocess import derive_seed, gen_poisson


class SeriesError(ValueError):
    pass


class InsufficientDepthError(SeriesError):
    """Fewer than 2 common levels: detection is not meaningful."""


@dataclass(frozen=True)
class LevelStats:
    level: int
    n_components: int
    n_heads: int
    n_exit_points: int
    head_intensity: float
    exit_intensity: float
    mean_merge_distance: float | None


LEVELS_CSV_FIELDS = (
    "level",
    "n_components",
    "n_heads",
    "n_exit",
    "head_intensity",
    "exit_intensity",
    "mean_merge_distance",
)


def level_stats(h: Hierarchy, window: Window | None = None) -> list:
    """One row per level. Exit points exist at every non-terminal level,
    one per component; the terminal level has none."""
    window = window or h.sample.window
    volume = window.volume
    rows = []
    last = len(h.levels) - 1
    for k, (g, pairs) in enumerate(zip(h.levels, h.pairs_by_level)):
        merged = [p.merge_distance for p in pairs if p.merge_sq is not None]
        n_exit = len(merged)
        if k < last and n_exit != g.n_components:
            raise SeriesError("non-terminal level with incomplete merge data")
        rows.append(
            LevelStats(
                level=k,
                n_components=g.n_components,
                n_heads=2 * g.n_components,
                n_exit_points=n_exit,
                head_intensity=2 * g.n_components / volume,
                exit_intensity=n_exit / volume,
                mean_merge_distance=(sum(merged) / n_exit) if n_exit else None,
            )
        )
    return rows


def decay_ratios(stats) -> list:
    """exit_intensity(k+1)/exit_intensity(k) over non-terminal levels."""
    if len(stats) < 2:
        return []
    out = []
    for a, b in zip(stats[:-1], stats[1:]):
        if b.n_exit_points == 0 or a.exit_intensity == 0:
            continue
        out.append(b.exit_intensity / a.exit_intensity)
    return out


def mean_distance_series(h: Hierarchy) -> list:
    """Mean merge distance per level, for levels that performed a merge."""
    return [
        row.mean_merge_distance
        for row in level_stats(h)
        if row.mean_merge_distance is not None
    ]


def _worker_count() -> int:
    env = os.environ.get("CHN2_THREADS")
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


@dataclass(frozen=True)
class BaselineSeries:
    """Seed-averaged mean-distance series with per-level seed support."""

    values: list
    support: list
    n_seeds: int


def poisson_baseline(
    window: Window,
    expected_count: float,
    n_seeds: int,
    metric: Metric | None = None,
    master_seed: int = 0,
    dim: int | None = None,
    seeds=None,
) -> BaselineSeries:
    """Arithmetic mean over seeds of the Poisson mean-distance series.

    The intensity is expected_count/volume so the baseline is comparable to
    the target sample. Seeds are derived from master_seed unless given
    explicitly. Level k is averaged over the seeds whose hierarchy reaches
    it; `support` records how many did.
    """
    if seeds is None:
        seeds = [derive_seed(master_seed, i) for i in range(n_seeds)]
    else:
        seeds = list(seeds)
        n_seeds = len(seeds)
    if n_seeds < 1:
        raise SeriesError("n_seeds must be >= 1")
    metric = metric or Metric.euclidean()
    dim = dim or window.dim
    lam = expected_count / window.volume

    def one(seed):
        sample = gen_poisson(lam, window, dim, seed)
        return mean_distance_series(build_hierarchy(sample, metric))

    with ThreadPoolExecutor(max_workers=_worker_count()) as pool:
        series_list = list(pool.map(one, seeds))

    depth = max((len(s) for s in series_list), default=0)
    values, support = [], []
    for k in range(depth):
        at_k = [s[k] for s in series_list if len(s) > k]
        values.append(sum(at_k) / len(at_k))
        support.append(len(at_k))
    return BaselineSeries(values=values, support=support, n_seeds=n_seeds)


@dataclass(frozen=True)
class DetectorConfig:
    tau: float = 0.3
    baseline_seeds: int = 20

    def __post_init__(self):
        if not self.tau > 0:
            raise SeriesError("tau must be positive")


@dataclass(frozen=True)
class DetectionResult:
    level: int | None
    ratios: list
    rel_increase: list
    flagged: list = field(default_factory=list)

    @property
    def detected(self) -> bool:
        return self.level is not None


def detect_aggregation(
    target_series, baseline_series, cfg: DetectorConfig | None = None
) -> DetectionResult:
    """First level k >= 1 with (R_k - R_{k-1})/R_{k-1} > tau, if any.

    Both series must already be aligned level by level; `flagged` lists all
    super-threshold levels, `level` the first one.
    """
    cfg = cfg or DetectorConfig()
    target = list(target_series)
    baseline = list(baseline_series)
    if len(target) != len(baseline):
        raise SeriesError(
            f"series length mismatch: {len(target)} vs {len(baseline)}"
        )
    if len(target) < 2:
        raise SeriesError("need at least 2 levels to detect a jump")
    if any(not b > 0 for b in baseline):
        raise SeriesError("baseline entries must be positive")
    ratios = [t / b for t, b in zip(target, baseline)]
    rel = [float("nan")]
    flagged = []
    for k in range(1, len(ratios)):
        inc = (ratios[k] - ratios[k - 1]) / ratios[k - 1]
        rel.append(inc)
        if inc > cfg.tau:
            flagged.append(k)
    return DetectionResult(
        level=flagged[0] if flagged else None,
        ratios=ratios,
        rel_increase=rel,
        flagged=flagged,
    )


def align_series(target, baseline):
    """Truncate both series to their common levels; at least 2 required."""
    common = min(len(target), len(baseline))
    if common < 2:
        raise InsufficientDepthError(
            f"only {common} common level(s) between target and baseline"
        )
    return list(target[:common]), list(baseline[:common])


def detect_against_baseline(
    target: Hierarchy, baseline: BaselineSeries, cfg: DetectorConfig | None = None
) -> DetectionResult:
    t, b = align_series(mean_distance_series(target), baseline.values)
    return detect_aggregation(t, b, cfg)


def write_levels_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(LEVELS_CSV_FIELDS)
        for r in rows:
            writer.writerow(
                [
                    r.level,
                    r.n_components,
                    r.n_heads,
                    r.n_exit_points,
                    repr(r.head_intensity),
                    repr(r.exit_intensity),
                    "" if r.mean_merge_distance is None else repr(r.mean_merge_distance),
                ]
            )


def read_series_csv(path) -> list:
    """Mean-distance series from a levels CSV (skips empty terminal rows)."""
    out = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            cell = row.get("mean_merge_distance", "")
            if cell:
                out.append(float(cell))
    return out


DETECTOR_CSV_FIELDS = (
    "level",
    "target_d",
    "baseline_d",
    "R",
    "rel_increase",
    "detected_flag",
)


def write_detector_csv(target, baseline, result: DetectionResult, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(DETECTOR_CSV_FIELDS)
        for k, (t, b, r) in enumerate(zip(target, baseline, result.ratios)):
            inc = result.rel_increase[k]
            writer.writerow(
                [
                    k,
                    repr(t),
                    repr(b),
                    repr(r),
                    "" if math.isnan(inc) else repr(inc),
                    int(k in result.flagged),
                ]
            )
