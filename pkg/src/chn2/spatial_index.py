"""Nearest-neighbor index over grouped points with exact tie-breaking.

A k-d tree supplies candidates; the final comparison always recomputes
squared distances from the original coordinates, so query results are
bit-identical to a brute-force linear scan under the package's total order
(squared distance, then entry id). Torus queries are served by indexing the
3^d shifted copies of the data and re-evaluating candidates with the exact
wrapped metric.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.spatial import cKDTree

from .geometry import Metric, TORUS, sq_dist_many

_BRUTE_FORCE_MAX = 64
# Candidate gathering slack: wide enough to absorb the rounding incurred by
# shifted torus copies, far below any genuine distance gap.
_REL_SLACK = 1e-9


class IndexBuildError(ValueError):
    pass


class NoForeignNeighborError(LookupError):
    """Raised when every indexed entry belongs to the excluded group."""


class NnIndex:
    """Immutable nearest-neighbor structure over (point, group) entries."""

    def __init__(self, coords, groups, metric: Metric | None = None):
        coords = np.atleast_2d(np.asarray(coords, dtype=float))
        if coords.shape[0] == 0:
            raise IndexBuildError("cannot build an index over an empty point set")
        self.coords = coords
        self.groups = np.asarray(groups, dtype=np.int64)
        if self.groups.shape != (coords.shape[0],):
            raise IndexBuildError("need exactly one group id per point")
        self.metric = metric or Metric.euclidean()
        self.n, self.dim = coords.shape
        self._abs_slack = 16 * np.finfo(float).eps * max(
            1.0, float(np.max(np.abs(coords)))
        )
        self._brute = self.n <= _BRUTE_FORCE_MAX
        if self._brute:
            self._tree = None
            self._aug_to_orig = None
        elif self.metric.kind == TORUS:
            period = self.metric.window.side_lengths
            shifts = np.array(
                list(itertools.product((-1.0, 0.0, 1.0), repeat=self.dim))
            )
            blocks = [coords + s * period for s in shifts]
            self._aug_to_orig = np.tile(np.arange(self.n), len(shifts))
            self._tree = cKDTree(np.vstack(blocks))
        else:
            self._aug_to_orig = np.arange(self.n)
            self._tree = cKDTree(coords)

    def __len__(self) -> int:
        return self.n

    def _cut(self, dist: float) -> float:
        return dist * (1.0 + _REL_SLACK) + self._abs_slack

    def _exact_sq(self, query, ids) -> np.ndarray:
        return sq_dist_many(self.coords[ids], np.asarray(query, float), self.metric)

    def _candidate_ids(self, query, radius: float) -> np.ndarray:
        if self._brute:
            return np.arange(self.n)
        hits = self._tree.query_ball_point(np.asarray(query, float), r=radius)
        return np.unique(self._aug_to_orig[np.asarray(hits, dtype=np.int64)])

    def nearest_foreign_ties(self, query, own_group: int):
        """All entries outside own_group at the exact minimum squared distance.

        Returns (sq_distance, ids) with ids sorted ascending.
        """
        query = np.asarray(query, dtype=float)
        if self._brute:
            ids = np.flatnonzero(self.groups != own_group)
            if ids.size == 0:
                raise NoForeignNeighborError("no entry outside the excluded group")
            sq = self._exact_sq(query, ids)
            best = sq.min()
            return float(best), np.sort(ids[sq == best])

        k = min(8, self._tree.n)
        while True:
            dists, aug_idx = self._tree.query(query, k=k)
            dists = np.atleast_1d(dists)
            aug_idx = np.atleast_1d(aug_idx)
            orig = self._aug_to_orig[aug_idx]
            foreign = self.groups[orig] != own_group
            if foreign.any():
                approx_best = float(dists[foreign][0])
                exhausted = k >= self._tree.n
                if exhausted or float(dists[-1]) > self._cut(approx_best):
                    ids = self._candidate_ids(query, self._cut(approx_best))
                    ids = ids[self.groups[ids] != own_group]
                    sq = self._exact_sq(query, ids)
                    best = sq.min()
                    return float(best), np.sort(ids[sq == best])
            elif k >= self._tree.n:
                raise NoForeignNeighborError("no entry outside the excluded group")
            k = min(2 * k, self._tree.n)

    def nearest_foreign(self, query, own_group: int):
        """Closest entry whose group differs from own_group.

        Returns (entry id, group id, distance); ties resolved by smallest id.
        """
        sq, ids = self.nearest_foreign_ties(query, own_group)
        i = int(ids[0])
        return i, int(self.groups[i]), math.sqrt(sq)

    def successor_map(self):
        """For every indexed point, the id of its nearest foreign entry.

        Vectorized fast path with a per-point exact fallback wherever the
        k-d tree answer could be ambiguous under the tie-break order.
        Returns (ids, sq_distances).
        """
        out = np.full(self.n, -1, dtype=np.int64)
        out_sq = np.full(self.n, np.inf)
        if self._brute:
            for i in range(self.n):
                sq, ids = self.nearest_foreign_ties(self.coords[i], self.groups[i])
                out[i] = ids[0]
                out_sq[i] = sq
            return out, out_sq

        k = min(4, self._tree.n)
        dists, aug_idx = self._tree.query(self.coords, k=k)
        orig = self._aug_to_orig[aug_idx]
        fallback = []
        for i in range(self.n):
            row_ids = orig[i]
            row_d = dists[i]
            foreign = np.flatnonzero(self.groups[row_ids] != self.groups[i])
            if foreign.size == 0:
                fallback.append(i)
                continue
            j = foreign[0]
            cut = self._cut(float(row_d[j]))
            # Ambiguous if another candidate (seen or beyond the k-th) could
            # tie or beat the leader within slack.
            if float(row_d[-1]) <= cut and k < self._tree.n:
                fallback.append(i)
                continue
            rest = foreign[1:]
            if rest.size and float(row_d[rest[0]]) <= cut:
                fallback.append(i)
                continue
            out[i] = row_ids[j]
            out_sq[i] = float(
                sq_dist_many(self.coords[row_ids[j]], self.coords[i], self.metric)
            )
        for i in fallback:
            sq, ids = self.nearest_foreign_ties(self.coords[i], self.groups[i])
            out[i] = ids[0]
            out_sq[i] = sq
        return out, out_sq


def build(points_with_groups, metric: Metric | None = None) -> NnIndex:
    """Build an index from an iterable of (Point, group id)."""
    pts = list(points_with_groups)
    if not pts:
        raise IndexBuildError("cannot build an index over an empty point set")
    coords = np.vstack([p.coords for p, _ in pts])
    groups = np.array([g for _, g in pts], dtype=np.int64)
    return NnIndex(coords, groups, metric)
