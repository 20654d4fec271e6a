import numpy as np
import pytest

from erspectra.graph import GraphSample


def tree_graph(parent_children, d, n_extra=0):
    """Graph from a {parent: [children]} map; optional isolated vertices appended."""
    u, v = [], []
    for p, kids in parent_children.items():
        for c in kids:
            u.append(p)
            v.append(c)
    N = max(max(u), max(v)) + 1 + n_extra
    return GraphSample.from_edges(N, d, u, v)


def regular_tree(root_children, second, deeper, depth, d):
    """Rooted tree: root has root_children, depth-1 vertices have second
    children, deeper vertices have deeper children, down to the given depth."""
    edges_u, edges_v = [], []
    level = [0]
    nxt = 1
    for lvl in range(depth):
        count = root_children if lvl == 0 else (second if lvl == 1 else deeper)
        new_level = []
        for p in level:
            for _ in range(count):
                edges_u.append(p)
                edges_v.append(nxt)
                new_level.append(nxt)
                nxt += 1
        level = new_level
    return GraphSample.from_edges(nxt, d, edges_u, edges_v)


def random_tree(rng, depth, mean_children, root_children=None, d=None):
    """Galton-Watson style tree with Poisson offspring, truncated at depth."""
    edges_u, edges_v = [], []
    level = [0]
    nxt = 1
    for lvl in range(depth):
        new_level = []
        for p in level:
            k = root_children if (lvl == 0 and root_children is not None) else 1 + rng.poisson(mean_children - 1)
            for _ in range(k):
                edges_u.append(p)
                edges_v.append(nxt)
                new_level.append(nxt)
                nxt += 1
        level = new_level
    return GraphSample.from_edges(nxt, d if d is not None else mean_children, edges_u, edges_v)


@pytest.fixture
def hand_tree():
    # root 0; children a=1, b=2; a has 2 children, b has 4; then one more generation
    # so that the radius-4 ball exists and the radius-3 basis is defined
    pc = {0: [1, 2], 1: [3, 4], 2: [5, 6, 7, 8]}
    nxt = 9
    counts = [3, 2, 4, 3, 1, 2]
    for p, c in zip(range(3, 9), counts):
        pc[p] = list(range(nxt, nxt + c))
        nxt += c
    gen3 = list(range(9, nxt))
    for i, p in enumerate(gen3):
        k = 1 + (i % 4)
        pc[p] = list(range(nxt, nxt + k))
        nxt += k
    return tree_graph(pc, 3.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
