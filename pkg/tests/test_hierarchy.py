import json

import numpy as np
import pytest

from chn2.geometry import Metric, Window
from chn2.hierarchy import (
    DEGENERATE,
    SINGLE_PAIR,
    HierarchyError,
    LevelGraph,
    StructureError,
    advance_level,
    build_hierarchy,
    cluster_subtrees,
    descendant_counts,
    descent_violations,
    extract_pairs,
    functional_structure,
    genealogy_newick,
    hierarchy_from_json,
    hierarchy_to_json,
    level0,
    load_hierarchy,
    nn_k_step,
    save_hierarchy,
)
from chn2.pointprocess import Sample

WIDE = Window([-1000.0], [1000.0])


def line_sample(coords):
    pts = np.asarray(coords, float).reshape(-1, 1)
    return Sample(pts, WIDE, 1, {"kind": "manual"}, 0)


def plane_sample(coords, lo=-1000.0, hi=1000.0):
    pts = np.asarray(coords, float)
    return Sample(pts, Window([lo, lo], [hi, hi]), 2, {"kind": "manual"}, 0)


def test_level0_four_points():
    g = level0(line_sample([0, 1, 3, 7]))
    assert g.successor.tolist() == [1, 0, 1, 2]
    assert g.n_components == 1
    assert g.cycles == ((0, 1),)
    assert all(g.edge_tag(i).kind == "d" and g.edge_tag(i).level == 0 for i in range(4))


def test_level0_two_components():
    g = level0(line_sample([0, 1, 5, 6, 20]))
    assert g.cycles == ((0, 1), (2, 3))
    assert g.component_id.tolist() == [0, 0, 1, 1, 1]


def test_level0_two_points():
    g = level0(line_sample([2, 9]))
    assert g.cycles == ((0, 1),)


def test_level0_needs_two_points():
    with pytest.raises(HierarchyError):
        level0(line_sample([4]))


def test_extract_pairs_matches_components():
    g = level0(line_sample([0, 1, 5, 6, 20]))
    pairs = extract_pairs(g)
    assert [p.heads for p in pairs] == [(0, 1), (2, 3)]
    assert [p.index for p in pairs] == [0, 1]
    assert len(pairs) == g.n_components


def test_nn_step_two_pairs():
    s = line_sample([0, 1, 5, 6, 20])
    g = level0(s)
    pairs = extract_pairs(g)
    step = nn_k_step(pairs, s.points, Metric.euclidean())
    assert step.nn_map.tolist() == [1, 0]
    assert step.mutual == [(0, 1)]
    # exits: point 1 (coord 1) <-> point 2 (coord 5), distance 4
    assert step.exits[0] == (1, 2, 16.0)
    assert step.exits[1] == (2, 1, 16.0)


def test_nn_step_eight_point_example():
    s = line_sample([0, 1, 10, 11, 14, 15, 30, 31])
    g = level0(s)
    pairs = extract_pairs(g)
    step = nn_k_step(pairs, s.points, Metric.euclidean())
    # pairs: A=(0,1) B=(2,3) C=(4,5) D=(6,7) by ids
    assert step.nn_map.tolist() == [1, 2, 1, 2]
    assert step.mutual == [(1, 2)]
    assert step.exits[0] == (1, 2, 81.0)  # coord 1 -> coord 10
    assert step.exits[1] == (3, 4, 9.0)  # coord 11 -> coord 14
    assert step.exits[2] == (4, 3, 9.0)
    assert step.exits[3] == (6, 5, 225.0)  # coord 30 -> coord 15


def test_globally_closest_pair_is_mutual(rng):
    for _ in range(20):
        s = plane_sample(rng.uniform(0, 100, size=(60, 2)), 0, 100)
        g = level0(s)
        pairs = extract_pairs(g)
        if len(pairs) < 2:
            continue
        step = nn_k_step(pairs, s.points, Metric.euclidean())
        best = min(range(len(pairs)), key=lambda i: (step.exits[i][2], i))
        j = int(step.nn_map[best])
        assert step.nn_map[j] == best


def test_advance_level_five_points():
    s = line_sample([0, 1, 5, 6, 20])
    g = level0(s)
    pairs = extract_pairs(g)
    step = nn_k_step(pairs, s.points, Metric.euclidean())
    g1 = advance_level(g, pairs, step)
    assert g1.level == 1
    assert g1.successor.tolist() == [1, 2, 1, 2, 3]
    assert g1.cycles == ((1, 2),)
    assert g1.n_components == 1
    assert g1.edge_tag(1).kind == "delta" and g1.edge_tag(1).level == 1
    assert g1.edge_tag(0).kind == "d"


def test_advance_level_eight_points():
    s = line_sample([0, 1, 10, 11, 14, 15, 30, 31])
    g = level0(s)
    pairs = extract_pairs(g)
    step = nn_k_step(pairs, s.points, Metric.euclidean())
    g1 = advance_level(g, pairs, step)
    assert g1.n_components == 1
    assert g1.cycles == ((3, 4),)  # coords 11 and 14


def test_component_count_halves(rng):
    for _ in range(10):
        s = plane_sample(rng.uniform(0, 50, size=(120, 2)), 0, 50)
        h = build_hierarchy(s)
        for a, b in zip(h.levels[:-1], h.levels[1:]):
            assert b.n_components <= a.n_components // 2


def test_build_hierarchy_terminations():
    h = build_hierarchy(line_sample([0, 1, 3, 7]))
    assert h.termination == SINGLE_PAIR
    assert h.termination_level == 0

    h2 = build_hierarchy(line_sample([0, 1, 5, 6, 20]))
    assert h2.termination == SINGLE_PAIR
    assert h2.termination_level == 1
    assert h2.levels[1].cycles == ((1, 2),)

    assert build_hierarchy(line_sample([3])).termination == DEGENERATE
    assert build_hierarchy(line_sample([])).termination == DEGENERATE


def test_build_hierarchy_max_levels_guard():
    s = line_sample([0, 1, 5, 6, 20])
    h = build_hierarchy(s, max_levels=0)
    assert h.termination == "max_levels"
    assert len(h.levels) == 1


def test_genealogy_total_and_consistent(rng):
    s = plane_sample(rng.uniform(0, 30, size=(80, 2)), 0, 30)
    h = build_hierarchy(s)
    for k, pairs in enumerate(h.pairs_by_level[:-1]):
        for p in pairs:
            parent = h.genealogy[(k, p.index)]
            assert parent[0] == k + 1
            assert parent[1] < len(h.pairs_by_level[k + 1])
            # the pair's heads live inside the parent's component
            next_g = h.levels[k + 1]
            parent_heads = h.pairs_by_level[k + 1][parent[1]].heads
            assert next_g.component_id[p.heads[0]] == next_g.component_id[parent_heads[0]]


def test_cluster_subtrees_examples():
    g = level0(line_sample([0, 1, 3, 7]))
    trees = cluster_subtrees(g)
    assert sorted(trees) == [0, 1]
    assert trees[0].tolist() == [0]
    assert trees[1].tolist() == [1, 2, 3]

    g2 = level0(line_sample([0, 1, 50, 51]))
    trees2 = cluster_subtrees(g2)
    assert all(ids.tolist() == [head] for head, ids in trees2.items())
    assert len(trees2) == 4


def test_subtrees_partition(rng):
    s = plane_sample(rng.uniform(0, 20, size=(150, 2)), 0, 20)
    h = build_hierarchy(s)
    for g in h.levels:
        trees = cluster_subtrees(g)
        sizes = sum(ids.size for ids in trees.values())
        assert sizes == s.n
        united = np.sort(np.concatenate([ids for ids in trees.values()]))
        assert np.array_equal(united, np.arange(s.n))


def test_descendant_counts():
    h = build_hierarchy(line_sample([0, 1, 3, 7]))
    counts = descendant_counts(h, 0)
    assert counts == {0: 1, 1: 3}
    assert sum(counts.values()) == 4
    with pytest.raises(HierarchyError):
        descendant_counts(h, 5)


def test_functional_structure_generic_cycle_detection():
    # 3-cycle plus a tail: the structure helper must report it faithfully,
    # and the level-graph constructor must reject it.
    succ = np.array([1, 2, 0, 0])
    comp, cycles, head_of = functional_structure(succ)
    assert cycles == [(0, 1, 2)]
    assert comp.tolist() == [0, 0, 0, 0]
    assert head_of[3] == 0
    with pytest.raises(StructureError):
        LevelGraph.from_successors(0, succ, np.zeros(4, np.uint8), np.zeros(4, np.int32))


def test_structure_rejects_self_loop():
    with pytest.raises(StructureError):
        LevelGraph.from_successors(
            0, np.array([0, 0]), np.zeros(2, np.uint8), np.zeros(2, np.int32)
        )


def test_descent_violation_surfaced_not_suppressed():
    # A satellite feeding a tight pair that relinks far away produces a
    # tree-prefix triple that breaks second-order descent at level 1.
    s = line_sample([0, 1, 3, 50, 51, 53])
    h = build_hierarchy(s)
    v = descent_violations(h.levels[1], s.points, Metric.euclidean())
    assert v, "expected the known tree-prefix counterexample to be reported"
    assert v[0][:4] == (5, 4, 3, 1)


def test_descent_holds_on_head_paths(rng):
    # Restricted to paths through the previous level's heads, every triple
    # descends; this is the invariant the level construction actually grants.
    for seed in range(5):
        s = plane_sample(
            np.random.default_rng(seed).uniform(0, 40, size=(300, 2)), 0, 40
        )
        h = build_hierarchy(s)
        m = Metric.euclidean()
        for k in range(1, len(h.levels)):
            prev_heads = h.levels[k - 1].heads
            assert descent_violations(h.levels[k], s.points, m, within=prev_heads) == []


def test_nn_chain_lengths_nonincreasing_level0(rng):
    s = plane_sample(rng.uniform(0, 10, size=(200, 2)), 0, 10)
    g = level0(s)
    succ = g.successor
    d = np.sqrt(np.sum((s.points - s.points[succ]) ** 2, axis=1))
    x1 = succ
    x2 = succ[x1]
    ok = (x2 != np.arange(s.n))  # step beyond a 2-cycle revisits; skip
    assert np.all(d[x1][ok] <= d[ok])


def test_scale_and_translation_invariance(rng):
    s = plane_sample(rng.uniform(0, 10, size=(100, 2)), 0, 10)
    h = build_hierarchy(s)
    for c in (0.5, 3.0):
        scaled = Sample(s.points * c, Window([-1e4, -1e4], [1e4, 1e4]), 2, s.generator, 0)
        hc = build_hierarchy(scaled)
        for g, gc in zip(h.levels, hc.levels):
            assert np.array_equal(g.successor, gc.successor)
            assert g.cycles == gc.cycles
        assert h.genealogy == hc.genealogy
    shifted = Sample(s.points + 37.25, Window([0, 0], [1e3, 1e3]), 2, s.generator, 0)
    hs = build_hierarchy(shifted)
    for g, gs in zip(h.levels, hs.levels):
        assert np.array_equal(g.successor, gs.successor)
        assert np.array_equal(g.tag_kind, gs.tag_kind)


def test_hierarchy_determinism(rng):
    s = plane_sample(rng.uniform(0, 10, size=(64, 2)), 0, 10)
    a = hierarchy_to_json(build_hierarchy(s))
    b = hierarchy_to_json(build_hierarchy(s))
    assert a == b


def test_hierarchy_json_roundtrip(tmp_path):
    s = line_sample([0, 1, 5, 6, 20])
    h = build_hierarchy(s)
    obj = hierarchy_to_json(h)
    h2 = hierarchy_from_json(obj)
    assert hierarchy_to_json(h2) == obj
    path = tmp_path / "h.json"
    save_hierarchy(h, path)
    h3 = load_hierarchy(path)
    assert hierarchy_to_json(h3) == obj
    assert json.loads(path.read_text())["termination"] == SINGLE_PAIR


def test_newick_export():
    s = line_sample([0, 1, 5, 6, 20])
    h = build_hierarchy(s)
    tree = genealogy_newick(h)
    assert tree.count("(") == tree.count(")")
    assert tree.strip().endswith(";")
    assert "P0" in tree and "P1" in tree
    # both level-0 pairs merge at depth 1
    assert tree.strip() == "(P0:1,P1:1)L1_0;"


def test_newick_deeper(rng):
    s = plane_sample(rng.uniform(0, 25, size=(70, 2)), 0, 25)
    h = build_hierarchy(s)
    tree = genealogy_newick(h)
    assert tree.count("P") >= len(h.pairs_by_level[0])
    assert tree.count("(") == tree.count(")")


def brute_force_hierarchy(points, metric):
    """Independent reimplementation: explicit argmin scans, no index, no
    shared helpers. Returns the list of successor maps per level."""
    from conftest import oracle_sq_dist

    n = len(points)
    sq = np.array(
        [[oracle_sq_dist(points[i], points[j], metric) for j in range(n)] for i in range(n)]
    )
    succ = np.array(
        [min((j for j in range(n) if j != i), key=lambda j: (sq[i, j], j)) for i in range(n)]
    )
    out = [succ.copy()]
    while True:
        # cycles by walking
        state = np.zeros(n, np.int8)
        cycles = []
        for s0 in range(n):
            if state[s0]:
                continue
            path, v = [], s0
            while state[v] == 0:
                state[v] = 1
                path.append(v)
                v = int(succ[v])
            if state[v] == 1 and v in path:
                cyc = path[path.index(v):]
                cycles.append(tuple(sorted(cyc)))
            for u in path:
                state[u] = 2
        cycles = sorted(set(cycles))
        if len(cycles) < 2:
            break
        m = len(cycles)

        def delta_sq(a, b):
            return min(sq[x, y] for x in cycles[a] for y in cycles[b])

        nn = [
            min((j for j in range(m) if j != i), key=lambda j: (delta_sq(i, j), j))
            for i in range(m)
        ]
        succ = succ.copy()
        for i in range(m):
            p, q = (i, nn[i]) if i < nn[i] else (nn[i], i)
            d, x, y = min(
                (sq[x, y], x, y) for x in cycles[p] for y in cycles[q]
            )
            exit_pt, target = (x, y) if i == p else (y, x)
            succ[exit_pt] = target
        out.append(succ.copy())
    return out


@pytest.mark.parametrize("kind", ["euclidean", "torus"])
def test_full_hierarchy_matches_bruteforce(kind, rng):
    for _ in range(6):
        d = int(rng.integers(1, 4))
        n = int(rng.integers(5, 120))
        side = max(2.0, n ** (1.0 / d))
        w = Window(np.zeros(d), np.full(d, side))
        metric = Metric.euclidean() if kind == "euclidean" else Metric.torus(w)
        pts = rng.uniform(0, side, size=(n, d))
        s = Sample(pts, w, d, {"kind": "manual"}, 0)
        h = build_hierarchy(s, metric)
        expect = brute_force_hierarchy(pts, metric)
        assert len(h.levels) == len(expect)
        for g, want in zip(h.levels, expect):
            assert np.array_equal(g.successor, want), (kind, d, n, g.level)


def test_degenerate_hierarchy_roundtrip_and_stats():
    from chn2.stats import level_stats, mean_distance_series

    h = build_hierarchy(line_sample([3.0]))
    assert h.termination == DEGENERATE
    assert h.levels == [] and h.pairs_by_level == []
    assert level_stats(h) == []
    assert mean_distance_series(h) == []
    assert genealogy_newick(h) == ""
    assert hierarchy_to_json(hierarchy_from_json(hierarchy_to_json(h))) == hierarchy_to_json(h)


def test_torus_hierarchy_valid(rng):
    w = Window([0.0, 0.0], [1.0, 1.0])
    pts = rng.uniform(0, 1, size=(90, 2))
    s = Sample(pts, w, 2, {"kind": "manual"}, 0)
    h = build_hierarchy(s, Metric.torus(w))
    assert h.termination == SINGLE_PAIR
    for g in h.levels:
        assert all(len(c) == 2 for c in g.cycles)
    obj = hierarchy_to_json(h)
    assert hierarchy_to_json(hierarchy_from_json(obj)) == obj
    assert obj["metric"]["kind"] == "torus"


def test_aggregated_fixtures_merge_depth():
    # A handful of well-separated aggregates collapse within a few levels;
    # the observed termination stays in the 5..8 band across the bundled
    # configurations and nearby seeds.
    from chn2.fixtures import cox_fixture

    for name in ("three_balls", "four_balls"):
        for seed in (None, 5):
            h = build_hierarchy(cox_fixture(name, seed=seed))
            assert 5 <= h.termination_level <= 8, (name, seed, h.termination_level)
