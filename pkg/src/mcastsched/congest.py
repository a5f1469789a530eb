"""Synchronous CONGEST simulation: bit-budgeted rounds, the distributed
rank-based decomposition, and the distributed multicast built on it."""

from __future__ import annotations

import math
import random
from collections import Counter, defaultdict, deque
from dataclasses import dataclass, field

from .decomposition import PathDecomposition, RankMap, _levels
from .model import (
    Graph,
    MulticastInstance,
    MulticastTree,
    compute_metrics,
    log2_ceil,
)
from .schedule import Schedule, Send
from .schedulers import frame_multicast_schedule, frame_schedule_from_decomps


class BudgetViolation(RuntimeError):
    def __init__(self, round: int, edge: tuple[int, int], bits: int, budget: int):
        super().__init__(
            f"round {round}: {bits} bits on edge {edge} exceed budget {budget}"
        )
        self.round = round
        self.edge = edge


class RoundLimitError(RuntimeError):
    pass


@dataclass(frozen=True)
class CongestNetwork:
    graph: Graph
    bit_factor: int = 4

    @property
    def bits_per_edge_per_round(self) -> int:
        return self.bit_factor * log2_ceil(self.graph.node_count)


@dataclass
class CongestTranscript:
    """Per round, per directed edge, the bit string sent."""

    rounds: list[dict[tuple[int, int], str]] = field(default_factory=list)

    @property
    def total_rounds(self) -> int:
        return len(self.rounds)

    def max_bits(self) -> int:
        return max(
            (len(bits) for rnd in self.rounds for bits in rnd.values()), default=0
        )


@dataclass
class AuditReport:
    max_bits: int
    budget: int
    histogram: dict[int, int]
    passed: bool
    first_violation: tuple[int, tuple[int, int]] | None = None


def message_size_audit(
    transcripts, budget: int
) -> AuditReport:
    """Check every (round, edge, direction) payload against the bit budget."""
    if isinstance(transcripts, CongestTranscript):
        transcripts = [transcripts]
    histogram: Counter = Counter()
    max_bits = 0
    first_violation = None
    rnd_index = 0
    for tr in transcripts:
        for rnd in tr.rounds:
            for edge, bits in rnd.items():
                histogram[len(bits)] += 1
                max_bits = max(max_bits, len(bits))
                if len(bits) > budget and first_violation is None:
                    first_violation = (rnd_index, edge)
            rnd_index += 1
    return AuditReport(
        max_bits, budget, dict(histogram), max_bits <= budget, first_violation
    )


def run_congest(
    network: CongestNetwork, programs: dict[int, object], max_rounds: int
) -> CongestTranscript:
    """Lock-step execution: every node steps, all messages deliver together.

    A program exposes `done`, `step(round_index, inbox) -> {neighbor: bits}`,
    and optionally `on_idle()`, which the driver invokes after any round in
    which no node sent bits (a global quiescence signal; programs use it to
    advance their time-frame counters).
    """
    budget = network.bits_per_edge_per_round
    transcript = CongestTranscript()
    inbox: dict[int, dict[int, str]] = defaultdict(dict)
    for r in range(max_rounds):
        if not inbox and all(p.done for p in programs.values()):
            return transcript
        delivered, inbox = inbox, defaultdict(dict)
        record: dict[tuple[int, int], str] = {}
        for v, prog in programs.items():
            out = prog.step(r, delivered.get(v, {}))
            for u, bits in out.items():
                if not bits:
                    continue
                if not network.graph.has_edge(v, u):
                    raise ValueError(f"node {v} sent on non-edge ({v},{u})")
                if len(bits) > budget:
                    raise BudgetViolation(r, (v, u), len(bits), budget)
                record[(v, u)] = bits
                inbox[u][v] = bits
        transcript.rounds.append(record)
        if not record:
            for prog in programs.values():
                idle = getattr(prog, "on_idle", None)
                if idle is not None:
                    idle()
    if inbox or not all(p.done for p in programs.values()):
        raise RoundLimitError(f"no convergence within {max_rounds} rounds")
    return transcript


# ---------------------------------------------------------------------------
# bit packing

def _bits(value: int, width: int) -> str:
    return format(value, f"0{width}b")


def _width(max_value: int) -> int:
    return max(1, max_value.bit_length())


@dataclass(frozen=True)
class _Params:
    n: int
    congestion: int
    dilation: int
    chunk_length: int
    rank_bits: int
    idx_bits: int
    height_bits: int
    counter_bits: int
    include_height: bool
    budget: int


def _make_params(instance, chunk_length, bit_factor) -> _Params:
    metrics = compute_metrics(instance)
    n = instance.graph.node_count
    c = max(1, metrics.congestion)
    d = max(1, metrics.dilation)
    p = _Params(
        n=n,
        congestion=c,
        dilation=d,
        chunk_length=chunk_length,
        rank_bits=_width(max(1, math.floor(math.log2(max(2, n))))),
        idx_bits=_width(c - 1),
        height_bits=_width(d),
        counter_bits=_width(max(1, chunk_length - 1)),
        include_height=c > d,
        budget=bit_factor * log2_ceil(n),
    )
    widest = p.rank_bits + p.idx_bits + (p.height_bits if p.include_height else 0)
    if widest > p.budget:
        raise ValueError(
            f"bit budget {p.budget} cannot carry a {widest}-bit rank message; "
            f"increase bit_factor"
        )
    return p


def tree_offsets(instance, seed: int, span: int) -> dict[int, int]:
    """Shared-randomness offsets: every node derives the same X_T locally."""
    return {
        t.tree_id: random.Random(f"{seed}:{t.tree_id}").randrange(max(1, span))
        for t in instance.trees
    }


def _local_views(instance):
    """Per-node initial knowledge: incident trees with parent/children roles."""
    views: dict[int, dict[int, tuple[int | None, tuple[int, ...]]]] = defaultdict(dict)
    for t in instance.trees:
        for v in t.depth:
            views[v][t.tree_id] = (t.parent.get(v), tuple(t.children.get(v, ())))
    return views


def _edge_trees(view, nbr):
    """Tree ids using the edge to `nbr`, in ascending order; identical at
    both endpoints, so it indexes message tags."""
    return sorted(
        tid for tid, (parent, children) in view.items()
        if parent == nbr or nbr in children
    )


class _PhaseProgram:
    """Common plumbing: per-neighbor message queues drained under the bit
    budget, and a frame counter advanced on idle rounds."""

    def __init__(self, node, view, params, offsets):
        self.node = node
        self.view = view
        self.params = params
        self.offsets = offsets
        self.frame = 0
        self.queues: dict[int, deque[str]] = defaultdict(deque)
        self.edge_list = {}  # neighbor -> sorted tree ids on that edge

    def trees_on_edge(self, nbr):
        if nbr not in self.edge_list:
            self.edge_list[nbr] = _edge_trees(self.view, nbr)
        return self.edge_list[nbr]

    def on_idle(self):
        self.frame += 1

    def queues_empty(self) -> bool:
        return all(not q for q in self.queues.values())

    def drain(self) -> dict[int, str]:
        out = {}
        for nbr, q in self.queues.items():
            payload = []
            used = 0
            while q and used + len(q[0]) <= self.params.budget:
                msg = q.popleft()
                payload.append(msg)
                used += len(msg)
            if payload:
                out[nbr] = "".join(payload)
        return out


class _RankProgram(_PhaseProgram):
    """Bottom-up rank convergecast. Leaves of tree T start once frame X_T is
    reached; internal nodes report to their parent as soon as every child has.
    Each message carries (rank, edge-tree index[, height])."""

    def __init__(self, node, view, params, offsets):
        super().__init__(node, view, params, offsets)
        self.waiting = {}  # tid -> set of children still silent
        self.child_rank = defaultdict(dict)  # tid -> {child: rank}
        self.child_height = defaultdict(dict)  # tid -> {child: height}
        self.rank = {}  # tid -> own rank
        self.height = {}  # tid -> own height
        self.to_send = set()  # non-root tids whose report is not yet queued
        self.root_waiting = set()
        for tid, (parent, children) in view.items():
            if children:
                self.waiting[tid] = set(children)
                if parent is None:
                    self.root_waiting.add(tid)
            else:
                self.rank[tid] = 0
                self.height[tid] = 0
                self.to_send.add(tid)

    def _msg(self, tid, parent) -> str:
        idx = self.trees_on_edge(parent).index(tid)
        bits = _bits(self.rank[tid], self.params.rank_bits) + _bits(
            idx, self.params.idx_bits
        )
        if self.params.include_height:
            bits += _bits(self.height[tid], self.params.height_bits)
        return bits

    def step(self, r, inbox):
        p = self.params
        width = p.rank_bits + p.idx_bits + (p.height_bits if p.include_height else 0)
        for nbr, payload in inbox.items():
            trees = self.trees_on_edge(nbr)
            for i in range(0, len(payload), width):
                msg = payload[i : i + width]
                rank = int(msg[: p.rank_bits], 2)
                idx = int(msg[p.rank_bits : p.rank_bits + p.idx_bits], 2)
                tid = trees[idx]
                self.child_rank[tid][nbr] = rank
                if p.include_height:
                    self.child_height[tid][nbr] = int(
                        msg[p.rank_bits + p.idx_bits :], 2
                    )
                self.waiting[tid].discard(nbr)
                if not self.waiting[tid]:
                    ranks = list(self.child_rank[tid].values())
                    top = max(ranks)
                    self.rank[tid] = top + 1 if ranks.count(top) > 1 else top
                    if p.include_height:
                        self.height[tid] = 1 + max(self.child_height[tid].values())
                    if self.view[tid][0] is not None:
                        self.to_send.add(tid)
                    else:
                        self.root_waiting.discard(tid)
        self._flush_ready()
        return self.drain()

    def _flush_ready(self):
        ready = []
        for tid in sorted(self.to_send):
            parent, children = self.view[tid]
            if not children and self.frame < self.offsets[tid]:
                continue  # leaves hold back until their tree's start frame
            ready.append(tid)
        for tid in ready:
            self.to_send.discard(tid)
            self.queues[self.view[tid][0]].append(self._msg(tid, self.view[tid][0]))

    @property
    def done(self) -> bool:
        return not self.to_send and not self.root_waiting and self.queues_empty()


class _PreferredProgram(_PhaseProgram):
    """Downward notification, one tagged bit per (tree, child): whether the
    child's edge is the parent's preferred (highest-rank) edge."""

    def __init__(self, node, view, params, offsets, rank_state: _RankProgram):
        super().__init__(node, view, params, offsets)
        self.preferred = {}
        self.to_send = []  # (tid, child, bit)
        self.expect = set()  # tids whose own parent-edge bit is pending
        self.preferred_edge = {}  # tid -> own parent edge preferred?
        for tid, (parent, children) in view.items():
            if children:
                ranks = rank_state.child_rank[tid]
                best = max(children, key=lambda c: (ranks[c], -c))
                self.preferred[tid] = best
                for c in children:
                    self.to_send.append((tid, c, 1 if c == best else 0))
            if parent is not None:
                self.expect.add(tid)

    def step(self, r, inbox):
        p = self.params
        width = p.idx_bits + 1
        for nbr, payload in inbox.items():
            trees = self.trees_on_edge(nbr)
            for i in range(0, len(payload), width):
                msg = payload[i : i + width]
                tid = trees[int(msg[: p.idx_bits], 2)]
                self.preferred_edge[tid] = msg[p.idx_bits] == "1"
                self.expect.discard(tid)
        held = []
        for tid, child, bit in sorted(self.to_send):
            if self.frame < self.offsets[tid]:
                held.append((tid, child, bit))
                continue
            idx = self.trees_on_edge(child).index(tid)
            self.queues[child].append(_bits(idx, p.idx_bits) + str(bit))
        self.to_send = held
        return self.drain()

    @property
    def done(self) -> bool:
        return not self.to_send and not self.expect and self.queues_empty()


class _RefineProgram(_PhaseProgram):
    """Top-down chunk refinement: a counter walks down each preferred chain
    and wraps modulo the chunk length; light edges restart it at zero."""

    def __init__(self, node, view, params, offsets, preferred: dict[int, int]):
        super().__init__(node, view, params, offsets)
        self.preferred = preferred  # tid -> preferred child at this node
        self.counter = {}  # tid -> position mod chunk_length of own parent edge
        self.expect = {tid for tid, (p, _) in view.items() if p is not None}
        self.to_start = [
            tid for tid, (parent, children) in view.items()
            if parent is None and children
        ]

    def _emit(self, tid, own_counter):
        p = self.params
        _, children = self.view[tid]
        for c in children:
            if c == self.preferred.get(tid) and own_counter is not None:
                val = (own_counter + 1) % p.chunk_length
            else:
                val = 0
            idx = self.trees_on_edge(c).index(tid)
            self.queues[c].append(_bits(idx, p.idx_bits) + _bits(val, p.counter_bits))

    def step(self, r, inbox):
        p = self.params
        width = p.idx_bits + p.counter_bits
        for nbr, payload in inbox.items():
            trees = self.trees_on_edge(nbr)
            for i in range(0, len(payload), width):
                msg = payload[i : i + width]
                tid = trees[int(msg[: p.idx_bits], 2)]
                val = int(msg[p.idx_bits :], 2)
                self.counter[tid] = val
                self.expect.discard(tid)
                self._emit(tid, val)
        started = []
        for tid in self.to_start:
            if self.frame >= self.offsets[tid]:
                self._emit(tid, None)
                started.append(tid)
        for tid in started:
            self.to_start.remove(tid)
        return self.drain()

    @property
    def done(self) -> bool:
        return not self.to_start and not self.expect and self.queues_empty()


@dataclass
class DistributedDecomposition:
    decompositions: dict[int, PathDecomposition]
    ranks: dict[int, RankMap]
    chunk_length: int
    rounds: int
    transcripts: list[CongestTranscript]


def _assemble_chunks(tree, preferred, counter) -> PathDecomposition:
    """Rebuild the chunked paths from per-node counters: an edge whose child
    counter is zero opens a chunk; the chunk follows preferred edges until
    the counter wraps."""
    chunks = []
    for u in tree.depth:
        if u == tree.root or counter[u] != 0:
            continue
        seq = [tree.parent[u], u]
        cur = u
        while True:
            nxt = preferred.get(cur)
            if nxt is None or counter[nxt] == 0:
                break
            seq.append(nxt)
            cur = nxt
        chunks.append(seq)
    edge_to_path, level = _levels(chunks)
    return PathDecomposition(
        tuple(tuple(c) for c in chunks), edge_to_path, level, "short-refined"
    )


def distributed_rank_decomposition(
    instance: MulticastInstance,
    epsilon: float = 0.25,
    seed: int = 0,
    bit_factor: int = 4,
    max_rounds: int | None = None,
) -> DistributedDecomposition:
    """Three CONGEST phases: rank convergecast, preferred-edge notification,
    and top-down refinement into chunks of length ceil(log2(n)^(1+epsilon))."""
    n = instance.graph.node_count
    chunk_length = max(1, math.ceil(math.log2(max(2, n)) ** (1 + epsilon)))
    params = _make_params(instance, chunk_length, bit_factor)
    offsets = tree_offsets(instance, seed, params.congestion)
    views = _local_views(instance)
    network = CongestNetwork(instance.graph, bit_factor)
    if max_rounds is None:
        max_rounds = 256 + 64 * (params.congestion + params.dilation)

    nodes = sorted(set(views) | set(range(instance.graph.node_count)))
    rank_progs = {
        v: _RankProgram(v, views.get(v, {}), params, offsets) for v in nodes
    }
    t1 = run_congest(network, rank_progs, max_rounds)

    pref_progs = {
        v: _PreferredProgram(v, views.get(v, {}), params, offsets, rank_progs[v])
        for v in nodes
    }
    t2 = run_congest(network, pref_progs, max_rounds)

    refine_progs = {
        v: _RefineProgram(
            v, views.get(v, {}), params, offsets, pref_progs[v].preferred
        )
        for v in nodes
    }
    t3 = run_congest(network, refine_progs, max_rounds)

    decomps = {}
    ranks = {}
    for t in instance.trees:
        if t.max_depth == 0:
            continue
        preferred = {}
        counter = {}
        rank = {}
        for v in t.depth:
            rank[v] = rank_progs[v].rank[t.tree_id]
            if t.children.get(v):
                preferred[v] = pref_progs[v].preferred[t.tree_id]
            if v != t.root:
                counter[v] = refine_progs[v].counter[t.tree_id]
        decomps[t.tree_id] = _assemble_chunks(t, preferred, counter)
        ranks[t.tree_id] = RankMap(rank)

    rounds = t1.total_rounds + t2.total_rounds + t3.total_rounds
    return DistributedDecomposition(
        decomps, ranks, chunk_length, rounds, [t1, t2, t3]
    )


def _level_range_slices(tree, band: int):
    """Split a tree into forests of `band` consecutive depth levels; yields
    (range_index, component trees as (root, parent map))."""
    ranges = defaultdict(dict)
    for c, p in tree.parent.items():
        if c not in tree.depth:
            continue
        r = (tree.depth[c] - 1) // band
        ranges[r][c] = p
    for r in sorted(ranges):
        parent = ranges[r]
        kids = defaultdict(list)
        for c, p in parent.items():
            kids[p].append(c)
        roots = [p for p in kids if p not in parent]
        for root in roots:
            comp = {}
            stack = [root]
            while stack:
                v = stack.pop()
                for c in kids.get(v, ()):
                    comp[c] = v
                    stack.append(c)
            yield r, root, comp


def distributed_multicast(
    instance: MulticastInstance,
    epsilon: float = 0.25,
    seed: int = 0,
    depths_known: bool = False,
    bit_factor: int = 4,
) -> tuple[Schedule, int]:
    """Distributed multicast; returns the realized schedule and CONGEST rounds.

    With depths_known, trees are sliced into ranges of L = ceil(log2(n)^(2+eps))
    consecutive levels, delayed by X_T time frames, and each frame's slices are
    multicast with the frame scheduler. Without it, the distributed rank
    decomposition runs first and the schedule is built over its chunks.
    """
    n = instance.graph.node_count
    metrics = compute_metrics(instance)
    if not depths_known:
        dist = distributed_rank_decomposition(instance, epsilon, seed, bit_factor)
        schedule, _ = frame_schedule_from_decomps(
            instance, dist.decompositions, dist.chunk_length, seed
        )
        return schedule, dist.rounds + schedule.declared_length

    band = max(1, math.ceil(math.log2(max(2, n)) ** (2 + epsilon)))
    span = max(1, math.ceil(metrics.congestion / band))
    offsets = {
        t.tree_id: random.Random(f"{seed}:mc:{t.tree_id}").randrange(span)
        for t in instance.trees
    }
    by_frame = defaultdict(list)  # frame -> (orig message, root, parent map)
    for t in instance.trees:
        for r, root, comp in _level_range_slices(t, band):
            by_frame[offsets[t.tree_id] + r].append((t.message_id, root, comp))

    sends: list[Send] = []
    clock = 0
    for f in sorted(by_frame):
        temp_trees = []
        back = {}
        for temp_id, (msg, root, comp) in enumerate(by_frame[f]):
            temp_trees.append(MulticastTree(temp_id, root, comp, temp_id))
            back[temp_id] = msg
        sub = MulticastInstance.build(instance.graph, temp_trees)
        frag, _ = frame_multicast_schedule(sub, seed=seed * 7919 + f)
        for s in frag.sends:
            sends.append(Send(s.round + clock, s.u, s.v, back[s.message_id]))
        clock += frag.declared_length
    schedule = Schedule.from_sends(sends)
    return schedule, clock
