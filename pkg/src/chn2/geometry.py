"""Points, windows, metrics, and the single-linkage pseudo-distance.

All argmin-style operations in this package share one total order so that
every construction is deterministic even when floating-point distances tie
exactly: candidates are compared by (squared distance, source id, target id).
Squared distances are used for comparisons; reported values are true
distances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class Point:
    """A point with a dense integer id and real coordinates."""

    id: int
    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise GeometryError("coords must be a non-empty 1-D vector")
        if not np.all(np.isfinite(c)):
            raise GeometryError("coords must be finite")
        object.__setattr__(self, "coords", c)

    @property
    def dim(self) -> int:
        return self.coords.size


@dataclass(frozen=True)
class Window:
    """Axis-aligned box [lo, hi] with positive volume."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1 or lo.size == 0:
            raise GeometryError("window lo/hi must be 1-D vectors of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise GeometryError("window bounds must be finite")
        if not np.all(lo < hi):
            raise GeometryError("window requires lo < hi on every axis")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def side_lengths(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def volume(self) -> float:
        return float(np.prod(self.side_lengths))

    def contains(self, coords) -> np.ndarray:
        c = np.atleast_2d(np.asarray(coords, dtype=float))
        return np.all((c >= self.lo) & (c <= self.hi), axis=1)

    def to_json(self) -> dict:
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "Window":
        return cls(np.asarray(obj["lo"], float), np.asarray(obj["hi"], float))


EUCLIDEAN = "euclidean"
TORUS = "torus"


@dataclass(frozen=True)
class Metric:
    """Base distance: plain Euclidean, or Euclidean on the torus of a window.

    The torus variant wraps each axis before the norm, so distances never
    exceed half the window side per axis; it is used to suppress boundary
    effects in stationarity-sensitive statistics.
    """

    kind: str = EUCLIDEAN
    window: Window | None = field(default=None)

    def __post_init__(self):
        if self.kind not in (EUCLIDEAN, TORUS):
            raise GeometryError(f"unknown metric kind: {self.kind!r}")
        if self.kind == TORUS and self.window is None:
            raise GeometryError("torus metric requires a window")

    @classmethod
    def euclidean(cls) -> "Metric":
        return cls(EUCLIDEAN)

    @classmethod
    def torus(cls, window: Window) -> "Metric":
        return cls(TORUS, window)

    def to_json(self) -> dict:
        obj = {"kind": self.kind}
        if self.window is not None:
            obj["window"] = self.window.to_json()
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "Metric":
        window = Window.from_json(obj["window"]) if "window" in obj else None
        return cls(obj["kind"], window)


def sq_dist_many(coords_a, coords_b, metric: Metric) -> np.ndarray:
    """Squared distances between rows of coords_a and coords_b (broadcasting)."""
    a = np.asarray(coords_a, dtype=float)
    b = np.asarray(coords_b, dtype=float)
    delta = np.abs(a - b)
    if metric.kind == TORUS:
        period = metric.window.side_lengths
        delta = np.minimum(delta, period - delta)
    return np.sum(delta * delta, axis=-1)


def sq_dist(a, b, metric: Metric) -> float:
    return float(sq_dist_many(np.asarray(a, float), np.asarray(b, float), metric))


def distance(a: Point, b: Point, m: Metric | None = None) -> float:
    """True distance between two points; raises on dimension mismatch."""
    m = m or Metric.euclidean()
    if a.dim != b.dim:
        raise GeometryError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return math.sqrt(sq_dist(a.coords, b.coords, m))


def single_linkage(S, T, m: Metric | None = None):
    """Minimum cross distance between two nonempty point sets.

    Returns (value, (point_in_S, point_in_T)) where the witness pair achieves
    the minimum; ties resolved by (squared distance, source id, target id).
    Symmetric in value; not a metric (zero whenever the sets share a point).
    """
    m = m or Metric.euclidean()
    S = list(S)
    T = list(T)
    if not S or not T:
        raise GeometryError("single_linkage requires nonempty sets")
    dims = {p.dim for p in S} | {p.dim for p in T}
    if len(dims) != 1:
        raise GeometryError("all points must share one dimension")
    best = None
    for x in S:
        for y in T:
            key = (sq_dist(x.coords, y.coords, m), x.id, y.id)
            if best is None or key < best[0]:
                best = (key, x, y)
    (dsq, _, _), x, y = best
    return math.sqrt(dsq), (x, y)


def scale_sample(points, c: float):
    """Multiply every coordinate by c > 0, preserving ids."""
    if not c > 0:
        raise GeometryError("scale factor must be positive")
    return [Point(p.id, p.coords * c) for p in points]
