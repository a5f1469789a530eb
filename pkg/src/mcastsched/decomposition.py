"""Heavy-path and rank-based tree decompositions, with (l,k)-short refinement."""

from __future__ import annotations

import json
from dataclasses import dataclass

from .model import MulticastTree, log2_ceil, norm_edge


@dataclass(frozen=True)
class PathDecomposition:
    """Partition of a tree's edges into downward paths.

    Each path is a node sequence, top node first, consecutive nodes
    parent -> child. level maps a path index to 1 + the number of other
    decomposition paths strictly between the path's top node and the root.
    """

    paths: tuple[tuple[int, ...], ...]
    edge_to_path: dict[tuple[int, int], int]
    level: dict[int, int]
    kind: str  # heavy | rank | short-refined

    def path_of_edge(self, u: int, v: int) -> int:
        return self.edge_to_path[norm_edge(u, v)]


@dataclass(frozen=True)
class RankMap:
    rank: dict[int, int]


def _chain_paths(tree: MulticastTree, preferred: dict[int, int]) -> list[list[int]]:
    """Paths from a preferred-child map: maximal preferred chains, each
    extended upward by the top node's parent edge (if any)."""
    paths = []
    for v in tree.depth:
        is_top = v == tree.root or preferred.get(tree.parent[v]) != v
        if not is_top:
            continue
        chain = [v]
        cur = v
        while cur in preferred:
            cur = preferred[cur]
            chain.append(cur)
        if v != tree.root:
            chain.insert(0, tree.parent[v])
        if len(chain) >= 2:
            paths.append(chain)
    return paths


def _levels(paths: list[list[int]]) -> tuple[dict[tuple[int, int], int], dict[int, int]]:
    """edge->path map and per-path levels, reconstructed from the paths alone."""
    edge_to_path: dict[tuple[int, int], int] = {}
    parent: dict[int, int] = {}
    for i, p in enumerate(paths):
        for a, b in zip(p, p[1:]):
            edge_to_path[norm_edge(a, b)] = i
            parent[b] = a
    roots = {p[0] for p in paths} - set(parent)
    level: dict[int, int] = {}
    # paths-above count per node, walking top-down from each root
    children: dict[int, list[int]] = {}
    for c, p in parent.items():
        children.setdefault(p, []).append(c)
    for root in roots:
        stack = [(root, 0, None)]  # node, paths met so far, path of edge above
        while stack:
            v, count, above = stack.pop()
            for c in children.get(v, ()):
                pid = edge_to_path[norm_edge(v, c)]
                ccount = count + (1 if pid != above else 0)
                if pid not in level or ccount < level[pid]:
                    level[pid] = ccount
                stack.append((c, ccount, pid))
    return edge_to_path, level


def _build(tree: MulticastTree, preferred: dict[int, int], kind: str) -> PathDecomposition:
    paths = _chain_paths(tree, preferred)
    edge_to_path, level = _levels(paths)
    return PathDecomposition(
        tuple(tuple(p) for p in paths), edge_to_path, level, kind
    )


def heavy_path_decomposition(tree: MulticastTree) -> PathDecomposition:
    """Each non-leaf's heavy edge goes to the child with the largest subtree,
    ties broken toward the smallest child id."""
    size = tree.subtree_sizes()
    preferred = {}
    for v in tree.depth:
        ch = tree.children.get(v)
        if ch:
            preferred[v] = max(ch, key=lambda c: (size[c], -c))
    return _build(tree, preferred, "heavy")


def compute_ranks(tree: MulticastTree) -> RankMap:
    """Leaf rank 0; internal rank is the max child rank, +1 when the max is tied."""
    order = []
    stack = [tree.root]
    while stack:
        v = stack.pop()
        order.append(v)
        stack.extend(tree.children.get(v, ()))
    rank: dict[int, int] = {}
    for v in reversed(order):
        ch = tree.children.get(v)
        if not ch:
            rank[v] = 0
        else:
            top = max(rank[c] for c in ch)
            ties = sum(1 for c in ch if rank[c] == top)
            rank[v] = top + 1 if ties > 1 else top
    return RankMap(rank)


def rank_decomposition(tree: MulticastTree) -> tuple[PathDecomposition, RankMap]:
    """Preferred edge goes to a child of highest rank, ties toward smallest id."""
    ranks = compute_ranks(tree)
    preferred = {}
    for v in tree.depth:
        ch = tree.children.get(v)
        if ch:
            preferred[v] = max(ch, key=lambda c: (ranks.rank[c], -c))
    return _build(tree, preferred, "rank"), ranks


def shorten(decomposition: PathDecomposition, ell: int) -> PathDecomposition:
    """Cut each path top-down into chunks of at most ell edges."""
    if ell < 1:
        raise ValueError("chunk length must be >= 1")
    chunks: list[tuple[int, ...]] = []
    for p in decomposition.paths:
        length = len(p) - 1
        for i in range(0, length, ell):
            chunks.append(tuple(p[i : i + ell + 1]))
    edge_to_path, level = _levels([list(c) for c in chunks])
    return PathDecomposition(tuple(chunks), edge_to_path, level, "short-refined")


@dataclass(frozen=True)
class ShortReport:
    max_intersections: int
    bound: float
    passed: bool


def verify_short(
    decomposition: PathDecomposition, tree: MulticastTree, ell: int, k: int
) -> ShortReport:
    """Max number of decomposition paths met on any root-to-leaf walk,
    checked against depth/ell + k."""
    worst = 0
    for leaf in tree.leaves:
        met = set()
        v = leaf
        while v != tree.root:
            p = tree.parent[v]
            met.add(decomposition.edge_to_path[norm_edge(p, v)])
            v = p
        worst = max(worst, len(met))
    bound = tree.max_depth / ell + k
    return ShortReport(worst, bound, worst <= bound)


def default_chunk_length(node_count: int) -> int:
    return log2_ceil(node_count)


def decomposition_to_json(decomposition: PathDecomposition) -> str:
    doc = {
        "paths": [list(p) for p in decomposition.paths],
        "levels": [decomposition.level[i] for i in range(len(decomposition.paths))],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))
