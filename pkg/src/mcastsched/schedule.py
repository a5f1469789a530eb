"""Schedules for the store-and-forward model, replay, and validation."""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field

from .model import MulticastInstance, norm_edge


@dataclass(frozen=True)
class Send:
    """One packet crossing one edge in one round, in the given direction."""

    round: int
    u: int  # sender
    v: int  # receiver
    message_id: int

    @property
    def edge(self) -> tuple[int, int]:
        return norm_edge(self.u, self.v)


@dataclass(frozen=True)
class Schedule:
    sends: tuple[Send, ...]
    declared_length: int

    @classmethod
    def from_sends(cls, sends) -> "Schedule":
        sends = tuple(sorted(sends, key=lambda s: (s.round, s.u, s.v)))
        length = max((s.round for s in sends), default=0)
        return cls(sends, length)


@dataclass(frozen=True)
class Violation:
    kind: str  # capacity | sender_missing | off_tree | unknown_message | bad_round
    round: int
    detail: str


@dataclass
class DeliveryReport:
    valid: bool
    length: int | None
    violations: list[Violation]
    per_tree_completion_round: dict[int, int]
    redundant: list[Send] = field(default_factory=list)


def _replay(instance: MulticastInstance, schedule: Schedule, upto_round=None):
    """Shared replay loop.

    Yields nothing; returns (holds, violations, redundant, completion) where
    holds maps node -> set of held message ids. A message sent in round t is
    held by the receiver from the start of round t+1.
    """
    by_msg = instance.tree_by_message
    holds: dict[int, set[int]] = defaultdict(set)
    remaining: dict[int, set[int]] = {}
    completion: dict[int, int] = {}
    for t in instance.trees:
        holds[t.root].add(t.message_id)
        remaining[t.tree_id] = set(t.leaves) - {t.root}
        if not remaining[t.tree_id]:
            completion[t.tree_id] = 0

    violations: list[Violation] = []
    redundant: list[Send] = []
    rounds: dict[int, list[Send]] = defaultdict(list)
    for s in schedule.sends:
        if s.round < 1:
            violations.append(Violation("bad_round", s.round, f"round < 1: {s}"))
            continue
        if s.round > schedule.declared_length:
            violations.append(
                Violation("bad_round", s.round, f"round beyond declared length: {s}")
            )
            continue
        if upto_round is not None and s.round > upto_round:
            continue
        rounds[s.round].append(s)

    for r in sorted(rounds):
        used_edges: set[tuple[int, int]] = set()
        deliveries: list[Send] = []
        for s in rounds[r]:
            tree = by_msg.get(s.message_id)
            if tree is None:
                violations.append(
                    Violation("unknown_message", r, f"message {s.message_id}: {s}")
                )
                continue
            if s.edge in used_edges:
                violations.append(
                    Violation("capacity", r, f"edge {s.edge} used twice in round {r}")
                )
                continue
            used_edges.add(s.edge)
            if s.edge not in tree.edges:
                violations.append(
                    Violation(
                        "off_tree", r, f"edge {s.edge} not in tree {tree.tree_id}"
                    )
                )
                continue
            if s.message_id not in holds[s.u]:
                violations.append(
                    Violation(
                        "sender_missing",
                        r,
                        f"node {s.u} does not hold message {s.message_id} in round {r}",
                    )
                )
                continue
            if s.message_id in holds[s.v]:
                redundant.append(s)
            deliveries.append(s)
        for s in deliveries:
            if s.message_id not in holds[s.v]:
                holds[s.v].add(s.message_id)
                tree = by_msg[s.message_id]
                rem = remaining[tree.tree_id]
                rem.discard(s.v)
                if not rem and tree.tree_id not in completion:
                    completion[tree.tree_id] = r
    return holds, violations, redundant, completion


def simulate(instance: MulticastInstance, schedule: Schedule) -> DeliveryReport:
    """Replay the schedule and report violations and delivery completion."""
    _, violations, redundant, completion = _replay(instance, schedule)
    complete = len(completion) == len(instance.trees)
    length = max(completion.values(), default=0) if complete else None
    return DeliveryReport(
        valid=complete and not violations,
        length=length,
        violations=violations,
        per_tree_completion_round=completion,
        redundant=redundant,
    )


def knowledge_at(
    instance: MulticastInstance, schedule: Schedule, round: int
) -> dict[int, frozenset[int]]:
    """Exact per-node knowledge sets after the given round's sends apply.

    Raises ValueError if the schedule prefix violates model constraints.
    """
    holds, violations, _, _ = _replay(instance, schedule, upto_round=round)
    if violations:
        raise ValueError(f"invalid schedule prefix: {violations[0]}")
    return {v: frozenset(ms) for v, ms in holds.items() if ms}


def schedule_to_json(schedule: Schedule) -> str:
    doc = {
        "length": schedule.declared_length,
        "sends": [
            {"round": s.round, "from": s.u, "to": s.v, "msg": s.message_id}
            for s in sorted(schedule.sends, key=lambda s: (s.round, s.u, s.v))
        ],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def schedule_from_json(text: str) -> Schedule:
    doc = json.loads(text)
    sends = tuple(
        Send(s["round"], s["from"], s["to"], s["msg"]) for s in doc["sends"]
    )
    return Schedule(tuple(sorted(sends, key=lambda s: (s.round, s.u, s.v))), doc["length"])
