import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcastsched import (
    MulticastTree,
    compute_ranks,
    decomposition_to_json,
    heavy_path_decomposition,
    norm_edge,
    rank_decomposition,
    shorten,
    verify_short,
)
from conftest import random_tree


# --- oracles ---------------------------------------------------------------

def oracle_walk_paths(tree, decomposition):
    """Max number of distinct decomposition paths met on any root-to-leaf walk,
    by walking every leaf upward."""
    worst = 0
    for leaf in tree.leaves:
        met, v = set(), leaf
        while v != tree.root:
            met.add(decomposition.edge_to_path[norm_edge(tree.parent[v], v)])
            v = tree.parent[v]
        worst = max(worst, len(met))
    return worst


def oracle_rank(tree, v):
    """Recursive rank definition, computed independently."""
    ch = tree.children.get(v, ())
    if not ch:
        return 0
    ranks = [oracle_rank(tree, c) for c in ch]
    top = max(ranks)
    return top + 1 if ranks.count(top) > 1 else top


def oracle_level(paths, pid):
    """1 + the number of paths strictly between path pid's top and the root,
    walking the parent pointers implied by the paths themselves."""
    parent = {}
    of_edge = {}
    for i, p in enumerate(paths):
        for a, b in zip(p, p[1:]):
            parent[b] = a
            of_edge[(a, b)] = i
    v = paths[pid][0]
    seen = set()
    while v in parent:
        seen.add(of_edge[(parent[v], v)])
        v = parent[v]
    return len(seen) + 1


def check_partition(tree, decomposition):
    """Every tree edge lies on exactly one path; paths run parent -> child."""
    covered = set()
    for p in decomposition.paths:
        for a, b in zip(p, p[1:]):
            assert tree.parent[b] == a
            e = norm_edge(a, b)
            assert e not in covered
            covered.add(e)
    assert covered == set(tree.edges)


# --- hand example ----------------------------------------------------------

def caterpillar():
    #        0
    #      / | \
    #     1  2  3
    #     |     |
    #     4     5
    #     |
    #     6
    return MulticastTree(0, 0, {1: 0, 2: 0, 3: 0, 4: 1, 5: 3, 6: 4}, 0)


def test_heavy_picks_largest_subtree_child():
    dec = heavy_path_decomposition(caterpillar())
    assert (0, 1, 4, 6) in dec.paths  # subtree of 1 has 3 nodes
    assert len(dec.paths) == 3


def test_heavy_tie_breaks_to_smallest_child_id():
    # node 1 has two leaf children 2 and 3: equal subtree sizes, pick 2
    t = MulticastTree(0, 0, {1: 0, 2: 1, 3: 1}, 0)
    dec = heavy_path_decomposition(t)
    assert (0, 1, 2) in dec.paths and (1, 3) in dec.paths
    assert dec.level[dec.paths.index((0, 1, 2))] == 1
    assert dec.level[dec.paths.index((1, 3))] == 2


def test_rank_hand_example():
    t = caterpillar()
    ranks = compute_ranks(t)
    assert ranks.rank[6] == 0 and ranks.rank[2] == 0
    assert ranks.rank[0] == 1  # three children all rank 0: tie at the max
    for v in t.depth:
        assert ranks.rank[v] == oracle_rank(t, v), v


def test_levels_hand_example():
    dec = heavy_path_decomposition(caterpillar())
    # every path starts at the root, so all sit at level 1
    assert all(dec.level[i] == 1 for i in range(len(dec.paths)))


# --- randomized oracle checks ----------------------------------------------

@pytest.mark.parametrize("seed", range(30))
@pytest.mark.parametrize("kind", ["heavy", "rank"])
def test_walk_bound_log_n(seed, kind):
    n = 10 + 37 * seed % 300
    tree = random_tree(max(4, n), seed)
    if kind == "heavy":
        dec = heavy_path_decomposition(tree)
    else:
        dec, _ = rank_decomposition(tree)
    check_partition(tree, dec)
    assert oracle_walk_paths(tree, dec) <= math.floor(math.log2(len(tree.depth))) + 1


@pytest.mark.parametrize("seed", range(15))
def test_rank_descendant_bound(seed):
    tree = random_tree(60, seed + 100)
    size = tree.subtree_sizes()
    ranks = compute_ranks(tree)
    for v, r in ranks.rank.items():
        assert size[v] >= 2**r


@pytest.mark.parametrize("seed", range(15))
def test_levels_match_oracle(seed):
    tree = random_tree(80, seed + 7)
    for dec in (heavy_path_decomposition(tree), rank_decomposition(tree)[0]):
        for i in range(len(dec.paths)):
            assert dec.level[i] == oracle_level(dec.paths, i), (seed, i)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(4, 120), ell=st.integers(1, 10), seed=st.integers(0, 10**6))
def test_shorten_chunks_and_bound(n, ell, seed):
    tree = random_tree(n, seed)
    dec = heavy_path_decomposition(tree)
    short = shorten(dec, ell)
    check_partition(tree, short)
    assert all(len(p) - 1 <= ell for p in short.paths)
    k = math.ceil(math.log2(n)) + 1
    report = verify_short(short, tree, ell, k)
    assert report.max_intersections == oracle_walk_paths(tree, short)
    assert report.passed


def test_shorten_levels_count_paths_above():
    # single path of 6 edges, ell=2 -> 3 chunks at levels 0,1,2
    tree = MulticastTree(0, 0, {i: i - 1 for i in range(1, 7)}, 0)
    short = shorten(heavy_path_decomposition(tree), 2)
    assert sorted(short.paths) == [(0, 1, 2), (2, 3, 4), (4, 5, 6)]
    by_top = {p[0]: short.level[i] for i, p in enumerate(short.paths)}
    assert by_top == {0: 1, 2: 2, 4: 3}


def test_shorten_rejects_bad_ell():
    with pytest.raises(ValueError):
        shorten(heavy_path_decomposition(caterpillar()), 0)


def test_decomposition_json():
    dec = heavy_path_decomposition(caterpillar())
    doc = json.loads(decomposition_to_json(dec))
    assert set(doc) == {"paths", "levels"}
    assert len(doc["paths"]) == len(doc["levels"]) == len(dec.paths)
