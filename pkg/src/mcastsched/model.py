"""Core data model: store-and-forward networks and simultaneous multicast instances."""

from __future__ import annotations

import json
import math
import random
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping


def norm_edge(u: int, v: int) -> tuple[int, int]:
    """Canonical unordered-edge key (smaller endpoint first)."""
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on nodes 0..node_count-1."""

    node_count: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        for u, v in self.edges:
            if u == v:
                raise ValueError(f"self-loop on node {u}")
            if not (0 <= u < self.node_count and 0 <= v < self.node_count):
                raise ValueError(f"edge ({u},{v}) endpoint out of range")
            if u > v:
                raise ValueError(f"edge ({u},{v}) not normalized")

    @classmethod
    def build(cls, node_count: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        return cls(node_count, frozenset(norm_edge(u, v) for u, v in edges))

    @cached_property
    def neighbors(self) -> dict[int, list[int]]:
        adj: dict[int, list[int]] = {v: [] for v in range(self.node_count)}
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        for v in adj:
            adj[v].sort()
        return adj

    def has_edge(self, u: int, v: int) -> bool:
        return norm_edge(u, v) in self.edges


@dataclass(frozen=True)
class MulticastTree:
    """A rooted tree given by a child -> parent map, carrying one message.

    The parent map may describe a malformed structure (cycles, disconnection);
    `validate_instance` reports such problems instead of the constructor
    raising, so derived views only cover nodes reachable from the root.
    """

    tree_id: int
    root: int
    parent: Mapping[int, int]
    message_id: int

    @cached_property
    def children(self) -> dict[int, list[int]]:
        ch: dict[int, list[int]] = {self.root: []}
        for c, p in self.parent.items():
            ch.setdefault(p, [])
            ch.setdefault(c, [])
            ch[p].append(c)
        for v in ch:
            ch[v].sort()
        return ch

    @cached_property
    def nodes(self) -> frozenset[int]:
        out = {self.root}
        for c, p in self.parent.items():
            out.add(c)
            out.add(p)
        return frozenset(out)

    @cached_property
    def depth(self) -> dict[int, int]:
        """Hop distance from the root, for nodes reachable through the parent map."""
        d = {self.root: 0}
        stack = [self.root]
        while stack:
            v = stack.pop()
            for c in self.children.get(v, ()):
                if c not in d:
                    d[c] = d[v] + 1
                    stack.append(c)
        return d

    @cached_property
    def max_depth(self) -> int:
        return max(self.depth.values())

    @cached_property
    def leaves(self) -> frozenset[int]:
        return frozenset(v for v in self.depth if not self.children.get(v))

    @cached_property
    def edges(self) -> frozenset[tuple[int, int]]:
        """Normalized tree edges, reachable part only."""
        return frozenset(
            norm_edge(c, p) for c, p in self.parent.items() if c in self.depth
        )

    def subtree_sizes(self) -> dict[int, int]:
        """Node count of each subtree (the node itself included), post-order."""
        order = []
        stack = [self.root]
        while stack:
            v = stack.pop()
            order.append(v)
            stack.extend(self.children.get(v, ()))
        size = {}
        for v in reversed(order):
            size[v] = 1 + sum(size[c] for c in self.children.get(v, ()))
        return size


@dataclass(frozen=True)
class MulticastInstance:
    graph: Graph
    trees: tuple[MulticastTree, ...]

    @classmethod
    def build(cls, graph: Graph, trees: Iterable[MulticastTree]) -> "MulticastInstance":
        return cls(graph, tuple(trees))

    @cached_property
    def tree_by_message(self) -> dict[int, MulticastTree]:
        return {t.message_id: t for t in self.trees}

    @cached_property
    def tree_by_id(self) -> dict[int, MulticastTree]:
        return {t.tree_id: t for t in self.trees}


@dataclass(frozen=True)
class InstanceMetrics:
    congestion: int
    dilation: int
    node_count: int


def compute_metrics(instance: MulticastInstance) -> InstanceMetrics:
    """Congestion = max trees sharing an edge; dilation = max tree depth."""
    counts: Counter = Counter()
    for t in instance.trees:
        counts.update(t.edges)
    congestion = max(counts.values()) if counts else 0
    dilation = max((t.max_depth for t in instance.trees), default=0)
    return InstanceMetrics(congestion, dilation, instance.graph.node_count)


def validate_instance(instance: MulticastInstance) -> list[str]:
    """Return a list of invariant violations; empty iff the instance is valid."""
    problems: list[str] = []
    g = instance.graph
    seen_ids: set[int] = set()
    seen_msgs: set[int] = set()
    for t in instance.trees:
        if t.tree_id in seen_ids:
            problems.append(f"duplicate tree_id {t.tree_id}")
        seen_ids.add(t.tree_id)
        if t.message_id in seen_msgs:
            problems.append(f"duplicate message_id {t.message_id} (tree {t.tree_id})")
        seen_msgs.add(t.message_id)
        for v in t.nodes:
            if not (0 <= v < g.node_count):
                problems.append(f"tree {t.tree_id}: node {v} out of range")
        if t.root in t.parent:
            problems.append(f"tree {t.tree_id}: root {t.root} has a parent")
        for c, p in t.parent.items():
            if c == p:
                problems.append(f"tree {t.tree_id}: node {c} is its own parent")
            elif not g.has_edge(c, p):
                problems.append(
                    f"tree {t.tree_id}: edge ({p},{c}) missing from host graph"
                )
        unreachable = t.nodes - set(t.depth)
        if unreachable:
            problems.append(
                f"tree {t.tree_id}: nodes {sorted(unreachable)} unreachable from "
                f"root {t.root} (cycle or disconnection)"
            )
    return problems


def gen_random_instance(
    node_count: int, tree_count: int, target_depth: int, seed: int
) -> MulticastInstance:
    """Random connected graph plus random multicast trees of depth <= target_depth."""
    if node_count < 2:
        raise ValueError("node_count must be >= 2")
    if tree_count < 1:
        raise ValueError("tree_count must be >= 1")
    if not (1 <= target_depth < node_count):
        raise ValueError("need 1 <= target_depth < node_count")
    rng = random.Random(seed)
    edges = set()
    for v in range(1, node_count):
        edges.add(norm_edge(v, rng.randrange(v)))
    for _ in range(node_count // 2):
        u, v = rng.sample(range(node_count), 2)
        edges.add(norm_edge(u, v))
    graph = Graph.build(node_count, edges)

    trees = []
    for tid in range(tree_count):
        root = rng.randrange(node_count)
        parent: dict[int, int] = {}
        depth = {root: 0}
        frontier = [root]
        while frontier:
            nxt = []
            for v in frontier:
                if depth[v] >= target_depth:
                    continue
                for w in graph.neighbors[v]:
                    if w not in depth and rng.random() < 0.6:
                        parent[w] = v
                        depth[w] = depth[v] + 1
                        nxt.append(w)
            frontier = nxt
        if not parent:
            w = graph.neighbors[root][rng.randrange(len(graph.neighbors[root]))]
            parent[w] = root
        trees.append(MulticastTree(tid, root, parent, tid))
    instance = MulticastInstance.build(graph, trees)
    assert not validate_instance(instance)
    return instance


def gen_layered_instance(
    node_count: int,
    congestion: int,
    depth: int,
    seed: int,
    prefix_cap: int | None = None,
) -> MulticastInstance:
    """Instance with congestion and dilation hitting the given targets exactly.

    A spine path of `depth` edges carries one full-depth tree; the remaining
    congestion-1 trees follow a random prefix of the spine (length capped by
    prefix_cap), so the first spine edge is shared by all trees.
    """
    if depth >= node_count:
        raise ValueError("depth must be < node_count")
    if congestion < 1:
        raise ValueError("congestion must be >= 1")
    rng = random.Random(seed)
    cap = depth if prefix_cap is None else min(prefix_cap, depth)
    spine = list(range(depth + 1))
    edges = {norm_edge(spine[i], spine[i + 1]) for i in range(depth)}
    graph = Graph.build(node_count, edges)

    trees = []
    full = {spine[i + 1]: spine[i] for i in range(depth)}
    trees.append(MulticastTree(0, spine[0], full, 0))
    for tid in range(1, congestion):
        plen = rng.randint(1, cap)
        parent = {spine[i + 1]: spine[i] for i in range(plen)}
        trees.append(MulticastTree(tid, spine[0], parent, tid))
    instance = MulticastInstance.build(graph, trees)
    assert not validate_instance(instance)
    return instance


def instance_to_json(instance: MulticastInstance) -> str:
    """Canonical JSON form: edges sorted, trees sorted by id, keys sorted."""
    doc = {
        "n": instance.graph.node_count,
        "edges": sorted([u, v] for u, v in instance.graph.edges),
        "trees": [
            {
                "id": t.tree_id,
                "root": t.root,
                "msg": t.message_id,
                "parent": {str(c): p for c, p in sorted(t.parent.items())},
            }
            for t in sorted(instance.trees, key=lambda t: t.tree_id)
        ],
    }
    return json.dumps(doc, sort_keys=True, indent=None, separators=(",", ":"))


def instance_from_json(text: str) -> MulticastInstance:
    doc = json.loads(text)
    graph = Graph.build(doc["n"], [tuple(e) for e in doc["edges"]])
    trees = [
        MulticastTree(
            t["id"],
            t["root"],
            {int(c): p for c, p in t["parent"].items()},
            t.get("msg", t["id"]),
        )
        for t in doc["trees"]
    ]
    return MulticastInstance.build(graph, trees)


def log2_ceil(n: int) -> int:
    """ceil(log2 n); clamps to 1 for n < 2."""
    if n < 2:
        return 1
    return max(1, math.ceil(math.log2(n)))
