import numpy as np
import pytest
from hypothesis import strategies as st

from coarsekit import FiniteMetricSpace, path_space, random_space


@pytest.fixture
def x4():
    return path_space(4)


@pytest.fixture
def two_point():
    return FiniteMetricSpace(["a", "b"], [[0, 1], [1, 0]])


def closure(W):
    """Floyd-Warshall closure of a symmetric weight matrix."""
    D = np.array(W, dtype=np.int64)
    np.fill_diagonal(D, 0)
    for k in range(len(D)):
        D = np.minimum(D, D[:, k][:, None] + D[k, :][None, :])
    return D


@st.composite
def spaces(draw, min_n=1, max_n=8, max_w=6):
    """Metric closure of random positive weights: an integer metric independent of random_space."""
    n = draw(st.integers(min_n, max_n))
    w = draw(st.lists(st.integers(1, max_w), min_size=n * n, max_size=n * n))
    W = np.array(w, dtype=np.int64).reshape(n, n)
    W = np.minimum(W, W.T)
    return FiniteMetricSpace([f"s{i}" for i in range(n)], closure(W))


@st.composite
def graph_spaces(draw, min_n=1, max_n=12):
    seed = draw(st.integers(0, 2**32 - 1))
    n = draw(st.integers(min_n, max_n))
    return random_space(np.random.default_rng(seed), n)
