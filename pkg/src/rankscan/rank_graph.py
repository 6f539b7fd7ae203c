"""Distances, nested similarity graphs, and the induced rank matrix.

The pipeline implemented here turns a sequence of observations into a
symmetric nonnegative weight matrix:

1. ``compute_distances`` builds (or validates) an ``n x n`` dissimilarity
   matrix.
2. ``build_graph_sequence`` constructs a nested sequence of similarity
   graphs ``G_1 <= G_2 <= ... <= G_k``, either k-nearest-neighbour
   (each level adds every node's next-nearest neighbour as a directed
   out-edge) or k-MST (each level is a minimum spanning tree on the
   edges not used by earlier levels).
3. ``graph_induced_ranks`` weights each edge by how early it entered the
   sequence -- an edge first appearing at level ``j`` gets weight
   ``k - j + 1`` -- and symmetrizes.  ``weighted_graph_matrix`` instead
   weights the edges of the final graph by kernel values or (shifted)
   negative distances.

The resulting :class:`RankMatrix` caches the scalar summaries that the
permutation-null moments are built from.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .errors import (
    AsymmetricInput,
    BandwidthNonPositive,
    DimensionMismatch,
    GraphInfeasible,
    InputError,
    KTooLarge,
    NonFiniteInput,
)

__all__ = [
    "compute_distances",
    "build_graph_sequence",
    "graph_induced_ranks",
    "directed_weights",
    "weighted_graph_matrix",
    "rank_summaries",
    "GraphSequence",
    "RankMatrix",
    "round_half_away",
    "default_graph_size",
]


def round_half_away(x):
    """Round to the closest integer, halves away from zero."""
    x = float(x)
    if x >= 0:
        return int(np.floor(x + 0.5))
    return -int(np.floor(-x + 0.5))


def default_graph_size(n):
    """Default graph depth ``[n**0.65]`` for ``n`` observations."""
    return max(1, round_half_away(n ** 0.65))


def _validate_distance_matrix(d):
    d = np.asarray(d, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise DimensionMismatch(
            f"distance matrix must be square, got shape {d.shape}"
        )
    if not np.all(np.isfinite(d)):
        i, j = np.argwhere(~np.isfinite(d))[0]
        raise NonFiniteInput(f"non-finite distance at ({i}, {j})")
    asym = np.abs(d - d.T)
    if asym.max() > 1e-9:
        i, j = np.unravel_index(np.argmax(asym), d.shape)
        raise AsymmetricInput(
            f"distance matrix is asymmetric at ({i}, {j}): "
            f"{float(d[i, j])!r} vs {float(d[j, i])!r}"
        )
    if np.abs(np.diagonal(d)).max() > 1e-9:
        i = int(np.argmax(np.abs(np.diagonal(d))))
        raise InputError(f"distance matrix has nonzero diagonal at ({i}, {i})")
    if d.min() < 0:
        i, j = np.unravel_index(int(np.argmin(d)), d.shape)
        raise InputError(f"negative distance at ({i}, {j}): "
                         f"{float(d[i, j])!r}")
    # exact symmetry and zero diagonal from here on
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    return d


def compute_distances(data, metric="euclidean"):
    """Pairwise dissimilarities of a sequence of observations.

    Parameters
    ----------
    data : array_like
        Either an ``(n, d)`` array of vectors, an ``(n, a, b)`` stack of
        matrices (use the ``frobenius`` metric), a 1-D array treated as
        ``(n, 1)``, or -- with ``metric="precomputed"`` -- an ``(n, n)``
        distance matrix that is only validated.
    metric : {"euclidean", "l1", "frobenius", "precomputed"}
        ``frobenius`` is the Euclidean norm of the entrywise difference,
        i.e. the Euclidean metric on flattened matrices.

    Returns
    -------
    ndarray of shape (n, n)
        Symmetric, zero-diagonal, nonnegative distances.
    """
    if metric == "precomputed":
        return _validate_distance_matrix(data)

    arr = np.asarray(data)
    if arr.dtype == object:
        raise DimensionMismatch("observations do not share a single shape")
    arr = arr.astype(float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim > 2:
        # matrix-valued observations: every metric acts on the flattened
        # entries (frobenius is then just the euclidean norm)
        if metric == "euclidean":
            metric = "frobenius"
        arr = arr.reshape(arr.shape[0], -1)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput("observations contain NaN or infinity")

    scipy_metric = {
        "euclidean": "euclidean",
        "frobenius": "euclidean",
        "l1": "cityblock",
    }.get(metric)
    if scipy_metric is None:
        raise ValueError(f"unknown metric {metric!r}")
    d = squareform(pdist(arr, metric=scipy_metric))
    return d


@dataclass(frozen=True)
class GraphSequence:
    """A nested sequence of similarity graphs.

    ``pairs[m]`` is the m-th edge and ``level[m]`` the first level at
    which it appears; an edge belongs to every later level as well.
    k-NN edges are directed (tail points to its neighbour), k-MST edges
    are undirected and stored with ``i < j``.
    """

    kind: str
    k: int
    n: int
    pairs: np.ndarray = field(repr=False)
    level: np.ndarray = field(repr=False)

    @property
    def directed(self):
        return self.kind == "knn"

    def edges(self, l):
        """Edge array of graph number ``l`` (all edges with level <= l)."""
        if not 1 <= l <= self.k:
            raise KTooLarge(f"level {l} outside 1..{self.k}")
        return self.pairs[self.level <= l]


def build_graph_sequence(d, k, kind="knn"):
    """Construct the nested graph sequence on a distance matrix.

    Parameters
    ----------
    d : ndarray of shape (n, n)
        Distance matrix (``compute_distances`` output).
    k : int
        Number of levels.
    kind : {"knn", "mst"}
        ``knn``: level ``l`` adds each node's l-th nearest neighbour as a
        directed edge, distance ties broken towards the smaller index.
        ``mst``: level ``l`` is the minimum spanning tree on all edges
        unused by levels ``1..l-1`` (repeated Kruskal, ties broken
        lexicographically by ``(i, j)``).

    Raises
    ------
    KTooLarge
        If ``k`` is not in ``1..n-1``.
    GraphInfeasible
        If some MST level cannot complete a spanning tree.
    """
    d = np.asarray(d, dtype=float)
    n = d.shape[0]
    k = int(k)
    if not 1 <= k <= n - 1:
        raise KTooLarge(f"k={k} must be in 1..{n - 1} for n={n}")

    if kind == "knn":
        pairs = np.empty((n * k, 2), dtype=np.int64)
        levels = np.tile(np.arange(1, k + 1), n)
        for i in range(n):
            order = np.argsort(d[i], kind="stable")  # ties -> smaller index
            order = order[order != i]
            pairs[i * k:(i + 1) * k, 0] = i
            pairs[i * k:(i + 1) * k, 1] = order[:k]
        return GraphSequence("knn", k, n, pairs, levels)

    if kind == "mst":
        iu, ju = np.triu_indices(n, 1)
        w = d[iu, ju]
        order = np.lexsort((ju, iu, w))  # by (distance, i, j)
        iu, ju = iu[order], ju[order]
        used = np.zeros(iu.size, dtype=bool)
        pairs = []
        levels = []
        for l in range(1, k + 1):
            parent = np.arange(n)

            def find(a):
                root = a
                while parent[root] != root:
                    root = parent[root]
                while parent[a] != root:
                    parent[a], a = root, parent[a]
                return root

            added = 0
            for m in range(iu.size):
                if used[m]:
                    continue
                ra, rb = find(iu[m]), find(ju[m])
                if ra == rb:
                    continue
                parent[ra] = rb
                used[m] = True
                pairs.append((iu[m], ju[m]))
                levels.append(l)
                added += 1
                if added == n - 1:
                    break
            if added < n - 1:
                raise GraphInfeasible(
                    f"no edge-disjoint spanning tree at level {l}"
                )
        return GraphSequence(
            "mst", k, n,
            np.array(pairs, dtype=np.int64),
            np.array(levels, dtype=np.int64),
        )

    raise ValueError(f"unknown graph kind {kind!r}")


class RankMatrix:
    """Symmetric nonnegative weight matrix with cached scalar summaries.

    Attributes
    ----------
    matrix : ndarray of shape (n, n)
        The symmetrized weights, zero diagonal.
    row_sums : ndarray of shape (n,)
        Per-node total weight.
    row_means : ndarray of shape (n,)
        ``row_sums / (n - 1)``.
    mean_weight : float
        Average weight over ordered pairs: ``row_means.mean()``.
    mean_sq_row_mean : float
        Average of squared per-node mean weights.  Always at least
        ``mean_weight**2`` (Cauchy-Schwarz).
    mean_sq_weight : float
        Average squared weight over ordered pairs.
    offset : float
        Affine shift applied during construction (nonzero only for
        negative-distance weighting); recorded for provenance.
    """

    def __init__(self, matrix, offset=0.0):
        m = np.asarray(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatch(f"weight matrix must be square, "
                                    f"got shape {m.shape}")
        if m.shape[0] < 2:
            raise DimensionMismatch("need at least two observations")
        if not np.all(np.isfinite(m)):
            raise NonFiniteInput("weight matrix contains NaN or infinity")
        scale = max(1.0, np.abs(m).max())
        if np.abs(m - m.T).max() > 1e-9 * scale:
            i, j = np.unravel_index(int(np.abs(m - m.T).argmax()), m.shape)
            raise AsymmetricInput(f"weight matrix asymmetric at ({i}, {j})")
        if np.abs(np.diagonal(m)).max() > 1e-12 * scale:
            raise InputError("weight matrix must have a zero diagonal")
        if m.min() < -1e-12 * scale:
            raise InputError("weight matrix entries must be nonnegative")
        m = 0.5 * (m + m.T)
        np.fill_diagonal(m, 0.0)
        np.clip(m, 0.0, None, out=m)
        m.setflags(write=False)

        self.matrix = m
        self.offset = float(offset)
        self.n = m.shape[0]
        self.row_sums = m.sum(axis=1)
        self.row_sums.setflags(write=False)
        self.row_means = self.row_sums / (self.n - 1)
        self.row_means.setflags(write=False)
        self.mean_weight = float(self.row_means.mean())
        self.mean_sq_row_mean = float(np.mean(self.row_means ** 2))
        self.mean_sq_weight = float((m ** 2).sum() / (self.n * (self.n - 1)))

    def __repr__(self):
        return (f"RankMatrix(n={self.n}, mean_weight={self.mean_weight:.6g}, "
                f"mean_sq_weight={self.mean_sq_weight:.6g})")


def directed_weights(g):
    """Pre-symmetrization directed weight matrix of a graph sequence.

    Each edge first appearing at level ``j`` carries weight ``k - j + 1``;
    for k-NN graphs row ``i`` therefore holds the values ``k, k-1, ..., 1``
    on the columns of its successive neighbours.  MST edges are entered in
    both directions.
    """
    w = np.zeros((g.n, g.n))
    vals = (g.k - g.level + 1).astype(float)
    i, j = g.pairs[:, 0], g.pairs[:, 1]
    w[i, j] = vals
    if not g.directed:
        w[j, i] = vals
    return w


def graph_induced_ranks(g):
    """Symmetrized graph-induced rank matrix of a graph sequence.

    A directed edge counts with half weight after symmetrization, so a
    mutual nearest-neighbour pair at ``k = 1`` has weight 1 while a
    one-way edge has weight 0.5.
    """
    w = directed_weights(g)
    return RankMatrix(0.5 * (w + w.T))


def weighted_graph_matrix(d, g, weight="gaussian_kernel", bandwidth=None):
    """Weight the edges of the final graph by kernel or distance values.

    Parameters
    ----------
    d : ndarray of shape (n, n)
        The distance matrix the graph was built from.
    g : GraphSequence
    weight : {"gaussian_kernel", "neg_distance", "neg_l1"}
        ``gaussian_kernel``: ``exp(-d**2 / (2 * bandwidth**2))``.
        ``neg_distance``: the negated distances, shifted by the minimum
        edge weight so all entries are nonnegative (the shift is recorded
        on the result's ``offset``).  ``neg_l1`` is the same operation and
        exists for callers who built ``d`` with the l1 metric.
    bandwidth : float, optional
        Kernel bandwidth; defaults to the exact median of the
        ``n*(n-1)/2`` off-diagonal distances.
    """
    d = np.asarray(d, dtype=float)
    n = d.shape[0]
    if g.n != n:
        raise DimensionMismatch(f"graph has {g.n} nodes, distances {n}")

    mask = np.zeros((n, n), dtype=bool)
    i, j = g.pairs[:, 0], g.pairs[:, 1]
    mask[i, j] = True
    if not g.directed:
        mask[j, i] = True

    offset = 0.0
    if weight == "gaussian_kernel":
        if bandwidth is None:
            bandwidth = float(np.median(squareform(d, checks=False)))
        if bandwidth <= 0:
            raise BandwidthNonPositive(f"bandwidth must be > 0, "
                                       f"got {bandwidth!r}")
        vals = np.exp(-d ** 2 / (2.0 * bandwidth ** 2))
    elif weight in ("neg_distance", "neg_l1"):
        vals = -d
        if mask.any():
            offset = -float(vals[mask].min())
            vals = vals + offset
    else:
        raise ValueError(f"unknown weighting {weight!r}")

    w = np.where(mask, vals, 0.0)
    return RankMatrix(0.5 * (w + w.T), offset=offset)


def rank_summaries(r):
    """The cached scalar summaries of a :class:`RankMatrix`.

    Returns ``(mean_weight, mean_sq_row_mean, mean_sq_weight, row_sums)``.
    """
    return (r.mean_weight, r.mean_sq_row_mean, r.mean_sq_weight, r.row_sums)
