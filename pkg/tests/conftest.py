import numpy as np
import pytest

from rankscan import build_graph_sequence, compute_distances, graph_induced_ranks


def random_rank_matrix(n, seed, d=2, k=None, kind="knn"):
    """Rank matrix of a Gaussian point cloud; the workhorse test input."""
    rng = np.random.default_rng(seed)
    dist = compute_distances(rng.normal(size=(n, d)))
    if k is None:
        k = max(1, min(n - 1, int(round(n ** 0.65))))
    return graph_induced_ranks(build_graph_sequence(dist, k, kind=kind))


@pytest.fixture
def rank_matrix_factory():
    return random_rank_matrix
