"""Seeded generation of Poisson, fixed-count, and ball-union Cox samples.

Every generator is a pure function of (parameters, seed): the same inputs
reproduce the same sample bit for bit within one build of this package.
Cross-language or cross-numpy-version bit equality is not a goal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .geometry import Window


class SampleError(ValueError):
    pass


def derive_seed(master_seed: int, index: int) -> int:
    """Deterministic child seed for fan-out over trials or baseline runs."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(index,))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class Sample:
    """A finite point configuration in a window plus generator metadata.

    Point ids are the row indices of `points` (0..n-1). All points lie in
    the window and are pairwise distinct.
    """

    points: np.ndarray
    window: Window
    dim: int
    generator: dict
    seed: int
    warning: str | None = field(default=None)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.size == 0:
            pts = pts.reshape(0, self.dim)
        if pts.ndim != 2 or pts.shape[1] != self.dim:
            raise SampleError(f"points must be an (n, {self.dim}) array")
        if self.window.dim != self.dim:
            raise SampleError("window dimension does not match sample dimension")
        if not np.all(np.isfinite(pts)):
            raise SampleError("points must be finite")
        if pts.shape[0] and not np.all(self.window.contains(pts)):
            raise SampleError("all points must lie inside the window")
        if pts.shape[0] and len(np.unique(pts, axis=0)) != pts.shape[0]:
            raise SampleError("duplicate points are rejected at ingestion")
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def to_json(self) -> dict:
        obj = {
            "dim": self.dim,
            "window": self.window.to_json(),
            "seed": self.seed,
            "generator": self.generator,
            "points": self.points.tolist(),
        }
        if self.warning:
            obj["warning"] = self.warning
        return obj

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, obj: dict) -> "Sample":
        try:
            return cls(
                points=np.asarray(obj["points"], float).reshape(-1, obj["dim"]),
                window=Window.from_json(obj["window"]),
                dim=int(obj["dim"]),
                generator=dict(obj["generator"]),
                seed=int(obj["seed"]),
                warning=obj.get("warning"),
            )
        except KeyError as exc:
            raise SampleError(f"malformed sample object: missing {exc}") from exc

    @classmethod
    def loads(cls, text: str) -> "Sample":
        return cls.from_json(json.loads(text))


def _uniform_points(rng, n, window: Window) -> np.ndarray:
    return rng.uniform(window.lo, window.hi, size=(n, window.dim))


def _dedupe(rng, pts, window: Window) -> np.ndarray:
    # Duplicate coordinates have probability ~0 but would create spurious
    # zero-length cycles downstream; redraw offenders until distinct.
    while pts.shape[0]:
        _, first = np.unique(pts, axis=0, return_index=True)
        dup = np.setdiff1d(np.arange(pts.shape[0]), first)
        if dup.size == 0:
            break
        pts[dup] = _uniform_points(rng, dup.size, window)
    return pts


def gen_poisson(lam: float, window: Window, dim: int, seed: int) -> Sample:
    """Homogeneous Poisson sample: count ~ Poisson(lam * volume), uniform positions."""
    if lam < 0:
        raise SampleError("intensity must be nonnegative")
    if window.dim != dim:
        raise SampleError("window dimension does not match dim")
    rng = np.random.default_rng(seed)
    n = int(rng.poisson(lam * window.volume)) if lam > 0 else 0
    pts = _dedupe(rng, _uniform_points(rng, n, window), window)
    gen = {"kind": "poisson", "lambda": lam}
    return Sample(pts, window, dim, gen, seed)


def gen_binomial(n: int, window: Window, dim: int, seed: int) -> Sample:
    """Exactly n i.i.d. uniform points in the window."""
    if n < 0:
        raise SampleError("count must be nonnegative")
    if window.dim != dim:
        raise SampleError("window dimension does not match dim")
    rng = np.random.default_rng(seed)
    pts = _dedupe(rng, _uniform_points(rng, n, window), window)
    gen = {"kind": "binomial", "count": n}
    return Sample(pts, window, dim, gen, seed)


@dataclass(frozen=True)
class CoxBallSpec:
    """Driving region for the ball-union Cox process.

    Fixed mode: `centers` and `radii` give the balls explicitly. Random mode:
    centers are drawn as a Poisson process of intensity `center_intensity`
    (on the window dilated by the largest possible radius, so balls whose
    centers fall just outside still contribute), with radii i.i.d. uniform
    in `radius_range`. `lam` is the point intensity inside the region.
    """

    lam: float
    centers: np.ndarray | None = None
    radii: np.ndarray | None = None
    center_intensity: float | None = None
    radius_range: tuple[float, float] | None = None

    def __post_init__(self):
        if not self.lam > 0:
            raise SampleError("cox intensity lam must be positive")
        fixed = self.centers is not None
        if fixed:
            centers = np.atleast_2d(np.asarray(self.centers, float))
            radii = np.asarray(self.radii, float)
            if centers.shape[0] != radii.size:
                raise SampleError("need one radius per center")
            if not np.all(radii > 0):
                raise SampleError("radii must be positive")
            object.__setattr__(self, "centers", centers)
            object.__setattr__(self, "radii", radii)
        else:
            if self.center_intensity is None or self.radius_range is None:
                raise SampleError("random mode needs center_intensity and radius_range")
            r_min, r_max = self.radius_range
            if not (0 < r_min <= r_max):
                raise SampleError("radius_range must satisfy 0 < r_min <= r_max")

    @property
    def fixed(self) -> bool:
        return self.centers is not None


def _in_union_of_balls(pts, centers, radii) -> np.ndarray:
    inside = np.zeros(pts.shape[0], dtype=bool)
    for c, r in zip(centers, radii):
        d2 = np.sum((pts - c) ** 2, axis=1)
        inside |= d2 <= r * r
    return inside


def gen_cox_balls(spec: CoxBallSpec, window: Window, dim: int, seed: int) -> Sample:
    """Cox sample: Poisson(lam) on the window, thinned to a union of balls.

    Conditioned on the balls, the result is a homogeneous Poisson process
    restricted to their union. The generator metadata records the balls
    actually used; an empty intersection with the window yields an empty
    sample with a warning flag rather than an error.
    """
    if window.dim != dim:
        raise SampleError("window dimension does not match dim")
    rng = np.random.default_rng(seed)
    if spec.fixed:
        centers, radii = spec.centers, spec.radii
        if centers.shape[1] != dim:
            raise SampleError("center dimension does not match dim")
    else:
        r_min, r_max = spec.radius_range
        dilated = Window(window.lo - r_max, window.hi + r_max)
        m = int(rng.poisson(spec.center_intensity * dilated.volume))
        centers = _uniform_points(rng, m, dilated)
        radii = rng.uniform(r_min, r_max, size=m)

    n_all = int(rng.poisson(spec.lam * window.volume))
    candidates = _uniform_points(rng, n_all, window)
    warning = None
    if centers.shape[0]:
        pts = candidates[_in_union_of_balls(candidates, centers, radii)]
    else:
        pts = candidates[:0]
    if pts.shape[0] == 0:
        warning = "empty region: the ball union does not meet the window"
    if pts.shape[0]:
        # Drop float-collision duplicates in draw order; a uniform redraw
        # could land outside the ball union.
        _, first = np.unique(pts, axis=0, return_index=True)
        pts = pts[np.sort(first)]

    gen = {
        "kind": "cox_balls",
        "lambda": spec.lam,
        "mode": "fixed" if spec.fixed else "random",
        "centers": np.asarray(centers, float).tolist(),
        "radii": np.asarray(radii, float).tolist(),
    }
    if not spec.fixed:
        gen["center_intensity"] = spec.center_intensity
        gen["radius_range"] = list(spec.radius_range)
    return Sample(pts, window, dim, gen, seed, warning=warning)


def load_sample(path) -> Sample:
    with open(path, "r", encoding="utf-8") as fh:
        return Sample.from_json(json.load(fh))


def save_sample(sample: Sample, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(sample.to_json(), fh)
        fh.write("\n")
