"""Recursive hard instances whose optimal schedules need C*D/2 rounds,
plus structural checkers and a tiny-instance exact optimum search."""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass

from .model import (
    Graph,
    MulticastInstance,
    MulticastTree,
    compute_metrics,
    norm_edge,
    validate_instance,
)
from .schedule import Schedule, simulate


@dataclass(frozen=True)
class ConstructionStats:
    edge_count: int
    node_count: int
    recursion_depth: int
    congestion: int


@dataclass(frozen=True)
class LowerBoundInstance:
    instance: MulticastInstance
    label_of_tree: dict[int, int]
    stats: ConstructionStats


def interleave(s1: frozenset, s2: frozenset) -> list[frozenset]:
    """All unions of a half-size subset of each of two disjoint C-sets."""
    if len(s1) != len(s2):
        raise ValueError("label sets must have equal size")
    c = len(s1)
    if c % 2 != 0:
        raise ValueError("label set size must be even")
    if s1 & s2:
        raise ValueError("label sets must be disjoint")
    half = c // 2
    out = []
    for a in itertools.combinations(sorted(s1), half):
        for b in itertools.combinations(sorted(s2), half):
            out.append(frozenset(a) | frozenset(b))
    return out


def interleavings(sets: tuple[frozenset, ...]):
    """Lazily stream the Cartesian product of pairwise interleavings."""
    if len(sets) % 2 != 0:
        raise ValueError("partition must have an even number of sets")
    pair_choices = [
        interleave(sets[2 * i], sets[2 * i + 1]) for i in range(len(sets) // 2)
    ]
    return itertools.product(*pair_choices)


class _Alloc:
    def __init__(self):
        self.next = 0

    def fresh(self) -> int:
        v = self.next
        self.next += 1
        return v


class _UnionFind:
    def __init__(self):
        self.parent: dict[int, int] = {}

    def find(self, x: int) -> int:
        root = x
        while self.parent.get(root, root) != root:
            root = self.parent[root]
        while self.parent.get(x, x) != x:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb


def _construct(sets, alloc, uf, edges):
    """Build the gadget for one partition; returns root node per label set index.

    edges accumulates (u, v, labelset) with raw ids; uf records the step-3
    identifications of sub-roots with their guess vertices.
    """
    if len(sets) == 1:
        r, v = alloc.fresh(), alloc.fresh()
        edges.append((r, v, sets[0]))
        return {0: r}

    roots = {}
    joint = {}
    for i in range(len(sets) // 2):
        r1, r2, vi = alloc.fresh(), alloc.fresh(), alloc.fresh()
        edges.append((r1, vi, sets[2 * i]))
        edges.append((r2, vi, sets[2 * i + 1]))
        roots[2 * i] = r1
        roots[2 * i + 1] = r2
        joint[i] = vi
    for combo in interleavings(sets):
        sub_roots = _construct(tuple(combo), alloc, uf, edges)
        for i, _ in enumerate(combo):
            uf.union(sub_roots[i], joint[i])
    return roots


def build_lowerbound(
    congestion: int, depth: int, bit_cap: int = 64
) -> LowerBoundInstance:
    """Recursive construction over congestion*2^(depth-1) labels; every edge
    carries exactly `congestion` labels and every label induces a tree of
    depth exactly `depth`."""
    if congestion < 2 or congestion % 2 != 0:
        raise ValueError("congestion must be even and >= 2")
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if congestion * 2 ** (depth + 1) > bit_cap:
        raise ValueError(
            f"parameters too large: congestion*2^(depth+1) = "
            f"{congestion * 2 ** (depth + 1)} exceeds cap {bit_cap} "
            f"(node count may reach 2^{congestion * 2 ** (depth + 1)})"
        )
    labels = list(range(congestion * 2 ** (depth - 1)))
    sets = tuple(
        frozenset(labels[i * congestion : (i + 1) * congestion])
        for i in range(2 ** (depth - 1))
    )
    alloc, uf = _Alloc(), _UnionFind()
    raw_edges: list[tuple[int, int, frozenset]] = []
    top_roots = _construct(sets, alloc, uf, raw_edges)

    dense: dict[int, int] = {}

    def node_id(raw: int) -> int:
        rep = uf.find(raw)
        if rep not in dense:
            dense[rep] = len(dense)
        return dense[rep]

    label_edges: dict[int, list[tuple[int, int]]] = defaultdict(list)
    graph_edges = []
    for u, v, labelset in raw_edges:
        a, b = node_id(u), node_id(v)
        graph_edges.append(norm_edge(a, b))
        for lab in labelset:
            label_edges[lab].append((a, b))

    label_root = {}
    for idx, r in top_roots.items():
        for lab in sets[idx]:
            label_root[lab] = node_id(r)

    n = len(dense)
    graph = Graph.build(n, graph_edges)
    trees = []
    for lab in labels:
        # root each label's edge set by a BFS walk from the label's root
        adj = defaultdict(list)
        for a, b in label_edges[lab]:
            adj[a].append(b)
            adj[b].append(a)
        root = label_root[lab]
        parent: dict[int, int] = {}
        seen = {root}
        frontier = [root]
        while frontier:
            nxt = []
            for x in frontier:
                for y in adj[x]:
                    if y not in seen:
                        seen.add(y)
                        parent[y] = x
                        nxt.append(y)
            frontier = nxt
        trees.append(MulticastTree(lab, root, parent, lab))

    instance = MulticastInstance.build(graph, trees)
    problems = validate_instance(instance)
    if problems:
        raise AssertionError(f"construction produced invalid instance: {problems[:3]}")
    stats = ConstructionStats(len(raw_edges), n, depth, congestion)
    return LowerBoundInstance(instance, {lab: lab for lab in labels}, stats)


def predicted_edge_count(congestion: int, depth: int) -> int:
    """Edge-count recursion: m_1 = 1, m_D = 2^(D-1) + binom(C, C/2)^(2^(D-1)) * m_(D-1)."""
    m = 1
    for d in range(2, depth + 1):
        m = 2 ** (d - 1) + math.comb(congestion, congestion // 2) ** (2 ** (d - 1)) * m
    return m


@dataclass
class LemmaReport:
    congestion_ok: bool
    dilation_ok: bool
    trees_ok: bool
    node_bound_ok: bool
    failures: list[str]

    @property
    def all_ok(self) -> bool:
        return not self.failures


def check_lemmas(lb: LowerBoundInstance, congestion: int, depth: int) -> LemmaReport:
    """Verify the structural properties of a built hard instance."""
    failures: list[str] = []
    inst = lb.instance
    per_edge: dict[tuple[int, int], int] = defaultdict(int)
    for t in inst.trees:
        for e in t.edges:
            per_edge[e] += 1
    bad_edges = [e for e in inst.graph.edges if per_edge.get(e, 0) != congestion]
    congestion_ok = not bad_edges
    if bad_edges:
        failures.append(f"edges without exactly {congestion} labels: {bad_edges[:3]}")
    metrics = compute_metrics(inst)
    if metrics.congestion != congestion:
        congestion_ok = False
        failures.append(f"congestion {metrics.congestion} != {congestion}")

    bad_depth = [t.tree_id for t in inst.trees if t.max_depth != depth]
    dilation_ok = not bad_depth and metrics.dilation == depth
    if bad_depth:
        failures.append(f"trees without depth exactly {depth}: {bad_depth[:5]}")

    trees_ok = True
    for t in inst.trees:
        expected = len(t.parent)
        reachable = len(t.depth) - 1
        if reachable != expected or t.root not in t.depth:
            trees_ok = False
            failures.append(f"label {lb.label_of_tree[t.tree_id]} does not induce a rooted tree")
    problems = validate_instance(inst)
    if problems:
        trees_ok = False
        failures.append(f"instance invalid: {problems[:3]}")

    bound = 2 ** (congestion * 2 ** (depth + 1))
    node_bound_ok = inst.graph.node_count <= bound
    if not node_bound_ok:
        failures.append(f"node count {inst.graph.node_count} exceeds 2^(C*2^(D+1))")
    return LemmaReport(congestion_ok, dilation_ok, trees_ok, node_bound_ok, failures)


def pad_to_n(lb: LowerBoundInstance, n: int) -> MulticastInstance:
    """Append isolated dummy nodes until the graph has n nodes."""
    inst = lb.instance
    if n < inst.graph.node_count:
        raise ValueError(
            f"cannot pad down: have {inst.graph.node_count} nodes, asked for {n}"
        )
    graph = Graph(n, inst.graph.edges)
    return MulticastInstance(graph, inst.trees)


@dataclass(frozen=True)
class EdgeDelayResult:
    edge: tuple[int, int]
    congestion: int
    check_round: int
    delayed_trees: tuple[int, ...]
    required: int

    @property
    def passed(self) -> bool:
        return len(self.delayed_trees) >= self.required


@dataclass
class MarkovReport:
    per_edge: list[EdgeDelayResult]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.per_edge)


def markov_delay_check(
    instance: MulticastInstance, schedule: Schedule
) -> MarkovReport:
    """For each edge shared by c >= 2 trees: after floor(c/2) rounds from the
    first round any of its messages could cross, at least ceil(c/2) of those
    trees must not have crossed yet (at most one message per round crossed)."""
    receipt: dict[tuple[int, int], int] = {}
    for s in sorted(schedule.sends, key=lambda s: s.round):
        key = (s.v, s.message_id)
        if key not in receipt:
            receipt[key] = s.round

    users: dict[tuple[int, int], list[tuple[int, int, int]]] = defaultdict(list)
    for t in instance.trees:
        for c, p in t.parent.items():
            if c in t.depth:
                users[norm_edge(c, p)].append((t.tree_id, p, c))

    results = []
    for edge, lst in sorted(users.items()):
        c = len(lst)
        if c < 2:
            continue
        first = min(
            instance.tree_by_id[tid].depth[parent] + 1 for tid, parent, _ in lst
        )
        need = math.ceil(c / 2)
        # after floor(c/2) rounds from `first`, at most floor(c/2) messages
        # crossed, so at least ceil(c/2) trees are still waiting
        check_round = first + c // 2 - 1
        delayed = tuple(
            tid
            for tid, _, child in lst
            if receipt.get(
                (child, instance.tree_by_id[tid].message_id), math.inf
            )
            > check_round
        )
        results.append(EdgeDelayResult(edge, c, check_round, delayed, need))
    return MarkovReport(results)


def exhaustive_opt(
    instance: MulticastInstance, horizon: int
) -> int | None:
    """Exact minimum schedule length by branch and bound over per-round edge
    assignments; None if no schedule of length <= horizon exists.

    Guarded to toy sizes: <= 12 edges, <= 6 messages, horizon <= 8.
    """
    if len(instance.graph.edges) > 12:
        raise ValueError("too many edges for exhaustive search (max 12)")
    if len(instance.trees) > 6:
        raise ValueError("too many messages for exhaustive search (max 6)")
    if horizon > 8:
        raise ValueError("horizon too large for exhaustive search (max 8)")

    trees = instance.trees
    goal = frozenset(
        (leaf, t.message_id) for t in trees for leaf in t.leaves if leaf != t.root
    )
    start = frozenset((t.root, t.message_id) for t in trees)
    tree_edges = {t.message_id: t.edges for t in trees}
    edges = sorted(instance.graph.edges)

    best = [None]
    visited: dict[int, list[frozenset]] = defaultdict(list)

    def dominated(state, rnd) -> bool:
        for r in range(1, rnd + 1):
            for s in visited[r]:
                if state <= s:
                    return True
        visited[rnd].append(state)
        return False

    def options(state, edge):
        u, v = edge
        out = []
        for t in trees:
            m = t.message_id
            if edge not in tree_edges[m]:
                continue
            if (u, m) in state and (v, m) not in state:
                out.append((u, v, m))
            if (v, m) in state and (u, m) not in state:
                out.append((v, u, m))
        return out

    def dfs(state, rnd):
        if goal <= state:
            if best[0] is None or rnd < best[0]:
                best[0] = rnd
            return
        if rnd >= horizon or (best[0] is not None and rnd + 1 >= best[0]):
            return
        per_edge = [o for o in (options(state, e) for e in edges) if o]
        if not per_edge:
            return
        for combo in itertools.product(*per_edge):
            new = set(state)
            for _, v, m in combo:
                new.add((v, m))
            new = frozenset(new)
            if dominated(new, rnd + 1):
                continue
            dfs(new, rnd + 1)

    if goal <= start:
        return 0
    dfs(start, 0)
    return best[0]
