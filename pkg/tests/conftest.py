import importlib.resources

import numpy as np
import pytest

from graphprobe.graph import from_edges, load_edge_list


@pytest.fixture(scope="session")
def triangle():
    return load_edge_list("0 1\n1 2\n2 0\n")


@pytest.fixture(scope="session")
def path3():
    return load_edge_list("a b\nb c\n")


@pytest.fixture(scope="session")
def k4():
    return from_edges([(i, j) for i in range(4) for j in range(i + 1, 4)])


@pytest.fixture(scope="session")
def star4():
    return from_edges([(0, i) for i in range(1, 5)])


@pytest.fixture(scope="session")
def star5():
    return from_edges([(0, i) for i in range(1, 6)])


@pytest.fixture(scope="session")
def karate():
    ref = importlib.resources.files("graphprobe") / "data" / "karate.edgelist"
    return load_edge_list(ref.read_text())


def make_sbm(n: int, p_in: float, p_out: float, seed: int):
    """Two equal blocks with dense intra- and sparse inter-block edges."""
    rng = np.random.default_rng(seed)
    half = n // 2
    pairs = []
    for i in range(n):
        for j in range(i + 1, n):
            same = (i < half) == (j < half)
            if rng.random() < (p_in if same else p_out):
                pairs.append((i, j))
    return from_edges(pairs, vertex_count=n)


@pytest.fixture(scope="session")
def sbm200():
    return make_sbm(200, 0.1, 0.01, seed=42)
