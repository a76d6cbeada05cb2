"""The clustroid hierarchy engine.

Level 0 sends every point to its nearest neighbor, which organizes the
sample into components that each carry exactly one mutual-nearest-neighbor
2-cycle. The two cycle vertices act as the component's representative pair.
Each subsequent level links pairs to their nearest foreign pair under the
single-linkage pseudo-distance and relinks only the witnessing exit point,
so the successor map stays total while components coarsen strictly until a
single pair remains.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .geometry import Metric, sq_dist_many
from .pointprocess import Sample
from .spatial_index import NnIndex

D = "d"
DELTA = "delta"
_KIND_CODE = {D: 0, DELTA: 1}
_KIND_NAME = {0: D, 1: DELTA}

SINGLE_PAIR = "single_pair"
MAX_LEVELS = "max_levels"
DEGENERATE = "degenerate"


class StructureError(RuntimeError):
    """A level graph violated the one-2-cycle-per-component structure."""


class HierarchyError(ValueError):
    pass


@dataclass(frozen=True)
class EdgeTag:
    kind: str
    level: int


def functional_structure(succ):
    """Components and cycles of a total successor map, with no assumption
    on cycle lengths.

    Returns (component_id, cycles, head_of) where cycles[c] is the tuple of
    cycle vertices of component c (components ordered by smallest cycle
    vertex) and head_of[x] is the first cycle vertex on the path from x.
    """
    succ = np.asarray(succ, dtype=np.int64)
    n = succ.size
    indeg = np.bincount(succ, minlength=n)
    alive = np.ones(n, dtype=bool)
    stack = list(np.flatnonzero(indeg == 0))
    while stack:
        v = stack.pop()
        alive[v] = False
        w = succ[v]
        indeg[w] -= 1
        if indeg[w] == 0 and alive[w]:
            stack.append(w)
    cyclic = alive

    cycles = []
    seen = np.zeros(n, dtype=bool)
    for v in np.flatnonzero(cyclic):
        if seen[v]:
            continue
        cyc = []
        w = v
        while not seen[w]:
            seen[w] = True
            cyc.append(int(w))
            w = succ[w]
        cycles.append(tuple(cyc))
    cycles.sort(key=min)

    head_of = np.arange(n, dtype=np.int64)
    pending = ~cyclic[head_of]
    while pending.any():
        head_of[pending] = succ[head_of[pending]]
        pending = ~cyclic[head_of]

    cycle_rank = np.empty(n, dtype=np.int64)
    for rank, cyc in enumerate(cycles):
        cycle_rank[list(cyc)] = rank
    component_id = cycle_rank[head_of]
    return component_id, cycles, head_of


@dataclass(frozen=True)
class LevelGraph:
    """One level of the hierarchy: a total successor map with edge tags."""

    level: int
    successor: np.ndarray
    tag_kind: np.ndarray
    tag_level: np.ndarray
    component_id: np.ndarray
    cycles: tuple

    @classmethod
    def from_successors(cls, level, successor, tag_kind, tag_level):
        successor = np.asarray(successor, dtype=np.int64)
        n = successor.size
        if n == 0 or np.any(successor < 0) or np.any(successor >= n):
            raise StructureError("successor map must be total")
        if np.any(successor == np.arange(n)):
            raise StructureError("self-loops are not allowed")
        component_id, cycles, _ = functional_structure(successor)
        for cyc in cycles:
            if len(cyc) != 2:
                raise StructureError(
                    f"level {level}: component cycle {cyc} has length {len(cyc)}, expected 2"
                )
        norm = tuple((min(c), max(c)) for c in cycles)
        return cls(
            level=level,
            successor=successor,
            tag_kind=np.asarray(tag_kind, dtype=np.uint8),
            tag_level=np.asarray(tag_level, dtype=np.int32),
            component_id=component_id,
            cycles=norm,
        )

    @property
    def n(self) -> int:
        return self.successor.size

    @property
    def n_components(self) -> int:
        return len(self.cycles)

    @property
    def heads(self) -> np.ndarray:
        if not self.cycles:
            return np.empty(0, dtype=np.int64)
        return np.sort(np.asarray(self.cycles, dtype=np.int64).ravel())

    def edge_tag(self, i: int) -> EdgeTag:
        return EdgeTag(_KIND_NAME[int(self.tag_kind[i])], int(self.tag_level[i]))


@dataclass
class Pair:
    """A component's representative pair: the two heads of its 2-cycle.

    The exit fields are filled once the next level is computed: `exit` is
    the head achieving the single-linkage minimum to the nearest foreign
    pair, `exit_target` its image there, and `merge_sq` the squared minimum.
    """

    index: int
    level: int
    heads: tuple
    exit: int | None = None
    exit_target: int | None = None
    merge_sq: float | None = None
    target_pair: int | None = None

    @property
    def merge_distance(self) -> float | None:
        return None if self.merge_sq is None else float(np.sqrt(self.merge_sq))


def level0(sample: Sample, metric: Metric | None = None) -> LevelGraph:
    """Nearest-neighbor successor map over the sample (needs >= 2 points)."""
    metric = metric or Metric.euclidean()
    n = sample.n
    if n < 2:
        raise HierarchyError("level 0 needs at least 2 points")
    index = NnIndex(sample.points, np.arange(n), metric)
    succ, _ = index.successor_map()
    return LevelGraph.from_successors(
        0, succ, np.zeros(n, np.uint8), np.zeros(n, np.int32)
    )


def extract_pairs(g: LevelGraph) -> list:
    """One Pair per component, indexed in order of the smallest head id."""
    return [Pair(index=i, level=g.level, heads=cyc) for i, cyc in enumerate(g.cycles)]


@dataclass(frozen=True)
class NnStepResult:
    nn_map: np.ndarray
    exits: list
    mutual: list


def _canonical_witness(heads_p, heads_q, coords, metric):
    """Shared single-linkage witness for an unordered pair of pairs.

    Both directions of a mutual link must agree on the witnessing points,
    so the argmin is taken once, over the four cross distances, under the
    order (squared distance, id on the lower-indexed side, id on the other).
    """
    best = None
    for x in heads_p:
        sq = sq_dist_many(coords[list(heads_q)], coords[x], metric)
        for y, s in zip(heads_q, sq):
            key = (float(s), x, y)
            if best is None or key < best:
                best = key
    return best  # (sq, x in p, y in q)


def nn_k_step(pairs, coords, metric: Metric | None = None) -> NnStepResult:
    """Nearest foreign pair, exit points, and mutual links for one level.

    nn_map[i] is the pair minimizing the single-linkage distance to pair i
    (ties by pair index); exits[i] = (exit id, target id, squared distance).
    """
    metric = metric or Metric.euclidean()
    m = len(pairs)
    if m < 2:
        raise HierarchyError("need at least 2 pairs to advance a level")
    head_ids = np.fromiter(
        (h for p in pairs for h in p.heads), dtype=np.int64, count=2 * m
    )
    groups = np.repeat(np.arange(m, dtype=np.int64), 2)
    index = NnIndex(coords[head_ids], groups, metric)
    entry_best, entry_sq = index.successor_map()

    nn_map = np.empty(m, dtype=np.int64)
    for i in range(m):
        e1, e2 = 2 * i, 2 * i + 1
        # Lexicographic (squared distance, target pair index); entry order
        # within the index is monotone in pair index, so index-level ties
        # already resolve to the smallest pair.
        k1 = (entry_sq[e1], groups[entry_best[e1]])
        k2 = (entry_sq[e2], groups[entry_best[e2]])
        nn_map[i] = (k1 if k1 <= k2 else k2)[1]

    exits = []
    for i in range(m):
        j = int(nn_map[i])
        p, q = (i, j) if i < j else (j, i)
        sq, xp, yq = _canonical_witness(pairs[p].heads, pairs[q].heads, coords, metric)
        if i == p:
            exits.append((xp, yq, sq))
        else:
            exits.append((yq, xp, sq))

    mutual = [
        (i, int(nn_map[i]))
        for i in range(m)
        if nn_map[nn_map[i]] == i and i < nn_map[i]
    ]
    return NnStepResult(nn_map=nn_map, exits=exits, mutual=mutual)


def advance_level(g: LevelGraph, pairs, step: NnStepResult) -> LevelGraph:
    """Relink every exit point to its target, leaving all other images fixed."""
    if len(step.exits) != len(pairs) or len(pairs) != g.n_components:
        raise HierarchyError("pairs and step result do not match the graph")
    succ = g.successor.copy()
    tag_kind = g.tag_kind.copy()
    tag_level = g.tag_level.copy()
    new_level = g.level + 1
    for exit_id, target_id, _ in step.exits:
        succ[exit_id] = target_id
        tag_kind[exit_id] = _KIND_CODE[DELTA]
        tag_level[exit_id] = new_level
    return LevelGraph.from_successors(new_level, succ, tag_kind, tag_level)


@dataclass
class Hierarchy:
    """The full level sequence with pair genealogy up to termination."""

    sample: Sample
    metric: Metric
    levels: list
    pairs_by_level: list
    genealogy: dict
    termination: str

    @property
    def termination_level(self) -> int:
        return len(self.levels) - 1


def build_hierarchy(
    sample: Sample, metric: Metric | None = None, max_levels: int = 64
) -> Hierarchy:
    """Iterate the level construction until a single pair remains.

    Termination is `single_pair` in the regular case; `degenerate` for
    samples with fewer than 2 points; `max_levels` only if the guard binds
    first (it cannot, given halving, unless max_levels is set very low).
    """
    metric = metric or Metric.euclidean()
    if sample.n < 2:
        return Hierarchy(sample, metric, [], [], {}, DEGENERATE)

    coords = sample.points
    g = level0(sample, metric)
    levels = [g]
    pairs_by_level = []
    genealogy = {}
    termination = None
    while True:
        pairs = extract_pairs(g)
        pairs_by_level.append(pairs)
        if len(pairs) == 1:
            termination = SINGLE_PAIR
            break
        if g.level >= max_levels:
            termination = MAX_LEVELS
            break
        step = nn_k_step(pairs, coords, metric)
        for pair, (exit_id, target_id, sq), j in zip(pairs, step.exits, step.nn_map):
            pair.exit = int(exit_id)
            pair.exit_target = int(target_id)
            pair.merge_sq = float(sq)
            pair.target_pair = int(j)
        g = advance_level(g, pairs, step)
        levels.append(g)

        # Every pair's component joins the component headed by the mutual
        # link of its pair-level cluster; record that as its parent.
        pair_comp, pair_cycles, _ = functional_structure(step.nn_map)
        new_index_of_head = {min(c): idx for idx, c in enumerate(g.cycles)}
        comp_to_new = {}
        for cyc in pair_cycles:
            exit_heads = [pairs[i].exit for i in cyc]
            comp_to_new[pair_comp[cyc[0]]] = new_index_of_head[min(exit_heads)]
        k = pairs[0].level
        for pair in pairs:
            genealogy[(k, pair.index)] = (k + 1, comp_to_new[pair_comp[pair.index]])
    return Hierarchy(sample, metric, levels, pairs_by_level, genealogy, termination)


def cluster_subtrees(g: LevelGraph) -> dict:
    """Forest obtained by deleting the two cycle edges of each component.

    Maps each head to the sorted ids of the vertices whose directed path
    reaches it first; the subtrees partition all ids.
    """
    _, _, head_of = functional_structure(g.successor)
    out = {}
    for head in g.heads:
        out[int(head)] = np.flatnonzero(head_of == head)
    return out


def descendant_counts(h: Hierarchy, level: int) -> dict:
    """Size of each level-k cluster subtree, head included."""
    if level < 0 or level >= len(h.levels):
        raise HierarchyError(f"no level {level} in this hierarchy")
    return {head: int(ids.size) for head, ids in cluster_subtrees(h.levels[level]).items()}


def path_edge_lengths_sq(g: LevelGraph, coords, metric: Metric) -> np.ndarray:
    """Squared length of every successor edge."""
    return sq_dist_many(coords, coords[g.successor], metric)


def descent_violations(g: LevelGraph, coords, metric: Metric, within=None):
    """Consecutive edge-length triples along simple paths that fail
    d_i < max(d_{i-1}, d_{i-2}).

    A triple lies on a simple path exactly when its four vertices are
    distinct (out-degree is 1). `within` optionally restricts starting
    vertices. Returns a list of (x, s(x), s2(x), s3(x), d0, d1, d2).
    """
    succ = g.successor
    x0 = np.arange(g.n) if within is None else np.asarray(within, dtype=np.int64)
    x1 = succ[x0]
    x2 = succ[x1]
    x3 = succ[x2]
    distinct = (
        (x0 != x1) & (x0 != x2) & (x0 != x3)
        & (x1 != x2) & (x1 != x3) & (x2 != x3)
    )
    d0 = sq_dist_many(coords[x0], coords[x1], metric)
    d1 = sq_dist_many(coords[x1], coords[x2], metric)
    d2 = sq_dist_many(coords[x2], coords[x3], metric)
    bad = distinct & (d2 >= np.maximum(d0, d1))
    out = []
    for i in np.flatnonzero(bad):
        out.append(
            (
                int(x0[i]), int(x1[i]), int(x2[i]), int(x3[i]),
                float(np.sqrt(d0[i])), float(np.sqrt(d1[i])), float(np.sqrt(d2[i])),
            )
        )
    return out


def hierarchy_to_json(h: Hierarchy) -> dict:
    levels = []
    for g in h.levels:
        levels.append(
            {
                "k": g.level,
                "successors": g.successor.tolist(),
                "tags": [
                    [_KIND_NAME[int(kc)], int(lv)]
                    for kc, lv in zip(g.tag_kind, g.tag_level)
                ],
                "cycles": [list(c) for c in g.cycles],
            }
        )
    pairs = []
    for level_pairs in h.pairs_by_level:
        for p in level_pairs:
            pairs.append(
                {
                    "level": p.level,
                    "index": p.index,
                    "heads": list(p.heads),
                    "exit": p.exit,
                    "exit_target": p.exit_target,
                    "merge_distance": p.merge_distance,
                    "target_pair": p.target_pair,
                }
            )
    genealogy = [[list(child), list(parent)] for child, parent in sorted(h.genealogy.items())]
    return {
        "sample": h.sample.to_json(),
        "metric": h.metric.to_json(),
        "levels": levels,
        "pairs": pairs,
        "genealogy": genealogy,
        "termination": h.termination,
    }


def hierarchy_from_json(obj: dict) -> Hierarchy:
    try:
        sample = Sample.from_json(obj["sample"])
        metric = Metric.from_json(obj["metric"])
    except KeyError as exc:
        raise HierarchyError(f"malformed hierarchy object: missing {exc}") from exc
    levels = []
    for item in obj["levels"]:
        tags = item["tags"]
        levels.append(
            LevelGraph.from_successors(
                int(item["k"]),
                np.asarray(item["successors"], dtype=np.int64),
                np.asarray([_KIND_CODE[t[0]] for t in tags], dtype=np.uint8),
                np.asarray([t[1] for t in tags], dtype=np.int32),
            )
        )
    pairs_by_level = [[] for _ in levels]
    for rec in obj["pairs"]:
        p = Pair(
            index=int(rec["index"]),
            level=int(rec["level"]),
            heads=tuple(rec["heads"]),
            exit=rec["exit"],
            exit_target=rec["exit_target"],
            merge_sq=None
            if rec["merge_distance"] is None
            else float(rec["merge_distance"]) ** 2,
            target_pair=rec["target_pair"],
        )
        pairs_by_level[p.level].append(p)
    for level_pairs in pairs_by_level:
        level_pairs.sort(key=lambda p: p.index)
    genealogy = {tuple(child): tuple(parent) for child, parent in obj["genealogy"]}
    return Hierarchy(
        sample, metric, levels, pairs_by_level, genealogy, obj["termination"]
    )


def save_hierarchy(h: Hierarchy, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(hierarchy_to_json(h), fh)
        fh.write("\n")


def load_hierarchy(path) -> Hierarchy:
    with open(path, "r", encoding="utf-8") as fh:
        return hierarchy_from_json(json.load(fh))


def genealogy_newick(h: Hierarchy) -> str:
    """Render the pair genealogy as Newick, one tree per terminal pair.

    Level-0 pairs are the leaves; every merge adds one unit of branch depth,
    so leaf depth equals the level at which its lineage reaches the root.
    """
    children = {}
    for child, parent in h.genealogy.items():
        children.setdefault(parent, []).append(child)

    def render(node):
        level, idx = node
        kids = sorted(children.get(node, []))
        if not kids:
            return f"P{idx}" if level == 0 else f"L{level}_{idx}"
        inner = ",".join(render(c) + ":1" for c in kids)
        return f"({inner})L{level}_{idx}"

    lines = []
    if h.levels:
        top = len(h.levels) - 1
        for p in h.pairs_by_level[top]:
            lines.append(render((top, p.index)) + ";")
    return "\n".join(lines) + ("\n" if lines else "")
