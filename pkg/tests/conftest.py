import random

import pytest

from mcastsched import Graph, MulticastInstance, MulticastTree

# one line per acceptance criterion, printed in the terminal summary
acceptance_lines: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_lines:
            terminalreporter.write_line(line)


def shared_edge_instance() -> MulticastInstance:
    """Two single-edge trees sharing one edge: C=2, D=1, optimum 2."""
    graph = Graph.build(2, [(0, 1)])
    return MulticastInstance.build(
        graph,
        [MulticastTree(0, 0, {1: 0}, 0), MulticastTree(1, 0, {1: 0}, 1)],
    )


def random_tree(node_count: int, seed: int) -> MulticastTree:
    """Uniform random parent assignment (parent id < child id)."""
    rng = random.Random(seed)
    parent = {v: rng.randrange(v) for v in range(1, node_count)}
    return MulticastTree(0, 0, parent, 0)


@pytest.fixture
def shared_edge():
    return shared_edge_instance()
