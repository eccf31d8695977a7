"""Homogeneous item-item graph: transition algebra, sparsification, export.

The item graph is distilled from the bipartite train interactions in three
steps. First the row-stochastic transition matrices in both directions, then
their two-step item-to-item composition, whose symmetrized geometric mean

    affinity[i, j] = sqrt(p(j | i) * p(i | j))

equals p(i, j) / sqrt(p(i) p(j)) under the degree-proportional item marginal
(the property the verification battery checks by brute-force walk
enumeration). Finally the dense affinity is thinned to its strongest pairs:
an s-percent quantile threshold over the undirected off-diagonal weights,
kept ties included, surviving pairs becoming unit-weight edges of a graph
that is then degree-normalized with self-loops like any other adjacency.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import sparse
from .data import InteractionDataset
from .errors import ConfigurationError

__all__ = [
    "SparsificationConfig",
    "HomoGraph",
    "build_transitions",
    "affinity_from_transitions",
    "sparsify",
    "build_homo_graph",
    "affinity_histogram",
    "write_edge_list",
    "write_histogram",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SparsificationConfig:
    """Quantile sparsification settings; s_percent is the share removed."""

    s_percent: float = 97.0

    def __post_init__(self):
        if not 0.0 <= self.s_percent < 100.0:
            raise ConfigurationError(
                f"s_percent must be in [0, 100), got {self.s_percent}"
            )


@dataclass
class HomoGraph:
    """Sparsified item-item graph with its provenance kept for reporting."""

    affinity: sp.csr_matrix        # normalized operator driving diffusion
    adjacency: sp.csr_matrix       # kept unit-weight edges, zero diagonal
    raw_affinity: sp.csr_matrix    # pre-sparsification affinity weights
    threshold: float
    num_candidates: int            # undirected off-diagonal pairs considered
    num_kept: int                  # undirected pairs surviving the threshold

    @property
    def num_items(self) -> int:
        return self.affinity.shape[0]


def build_transitions(
    dataset: InteractionDataset, item_row_cap: int | None = None
) -> tuple[sp.csr_matrix, sp.csr_matrix, sp.csr_matrix]:
    """Return (user->item, item->user, item->item) transition matrices.

    The first two are row-normalized views of the train interactions; the
    third is their composition, a row-stochastic two-step transition for
    every item that has at least one user. ``item_row_cap`` optionally prunes
    each composed row to its largest entries, a memory escape hatch for very
    dense corpora; it is off by default and leaves pruned rows sub-stochastic.
    """
    m = dataset.interaction_matrix
    user_to_item = sparse.row_normalize(m)
    item_to_user = sparse.row_normalize(sparse.transpose(m))
    item_to_item = sparse.canonicalize(item_to_user.dot(user_to_item))
    if item_row_cap is not None:
        item_to_item = _prune_rows(item_to_item, int(item_row_cap))
    return user_to_item, item_to_user, item_to_item


def _prune_rows(matrix: sp.csr_matrix, cap: int) -> sp.csr_matrix:
    if cap <= 0:
        raise ConfigurationError("item_row_cap must be positive when set")
    keep_rows = []
    keep_cols = []
    keep_vals = []
    for row in range(matrix.shape[0]):
        start, end = matrix.indptr[row], matrix.indptr[row + 1]
        cols = matrix.indices[start:end]
        vals = matrix.data[start:end]
        if cols.size > cap:
            # largest weights win; ties resolved toward the smaller column
            order = np.lexsort((cols, -vals))[:cap]
            cols, vals = cols[order], vals[order]
        keep_rows.append(np.full(cols.size, row, dtype=np.int64))
        keep_cols.append(cols.astype(np.int64))
        keep_vals.append(vals)
    return sparse.from_entries(
        matrix.shape[0],
        matrix.shape[1],
        np.concatenate(keep_rows) if keep_rows else np.zeros(0, np.int64),
        np.concatenate(keep_cols) if keep_cols else np.zeros(0, np.int64),
        np.concatenate(keep_vals) if keep_vals else 1.0,
    )


def affinity_from_transitions(item_to_item: sp.csr_matrix) -> sp.csr_matrix:
    """Symmetrize the two-step transitions into affinity weights."""
    return sparse.hadamard_sqrt(item_to_item, sparse.transpose(item_to_item))


def sparsify(affinity: sp.csr_matrix, config: SparsificationConfig) -> HomoGraph:
    """Threshold the affinity into a unit-weight normalized item graph.

    The threshold is the floor(n * s/100)-th smallest weight over the n
    undirected off-diagonal pairs; pairs at or above it survive, so ties at
    the threshold are kept and s = 0 keeps the whole support. Self-affinities
    never become edges; normalization re-adds the self-loops.
    """
    n = affinity.shape[0]
    if affinity.shape[0] != affinity.shape[1]:
        raise ValueError("affinity must be square")
    upper = sp.triu(affinity, k=1).tocoo()
    weights = upper.data
    num_candidates = int(weights.size)
    if num_candidates == 0:
        logger.warning(
            "sparsify: no off-diagonal affinity support; "
            "item graph degenerates to the identity"
        )
        adjacency = sparse.from_entries(n, n, [], [], 1.0)
        threshold = float("nan")
        kept = np.zeros(0, dtype=bool)
    else:
        sorted_weights = np.sort(weights)
        drop = int(np.floor(num_candidates * config.s_percent / 100.0))
        threshold = float(sorted_weights[min(drop, num_candidates - 1)])
        kept = weights >= threshold
        rows = np.concatenate([upper.row[kept], upper.col[kept]])
        cols = np.concatenate([upper.col[kept], upper.row[kept]])
        adjacency = sparse.from_entries(n, n, rows, cols, 1.0)
        if not kept.any():
            logger.warning(
                "sparsify: every candidate edge fell below the threshold; "
                "item graph degenerates to the identity"
            )
    return HomoGraph(
        affinity=sparse.sym_normalize(adjacency, add_self_loops=True),
        adjacency=adjacency,
        raw_affinity=sparse.canonicalize(affinity),
        threshold=threshold,
        num_candidates=num_candidates,
        num_kept=int(kept.sum()),
    )


def build_homo_graph(
    dataset: InteractionDataset,
    config: SparsificationConfig | None = None,
    item_row_cap: int | None = None,
) -> HomoGraph:
    """Full pipeline from train interactions to the sparsified item graph."""
    config = config or SparsificationConfig()
    _, _, item_to_item = build_transitions(dataset, item_row_cap=item_row_cap)
    return sparsify(affinity_from_transitions(item_to_item), config)


def affinity_histogram(
    affinity: sp.csr_matrix, num_bins: int
) -> tuple[np.ndarray, np.ndarray]:
    """Equal-width histogram of the undirected off-diagonal affinity weights.

    Returns (counts, bin_edges) with len(bin_edges) == num_bins + 1, suited
    for a log-count rendering.
    """
    if num_bins <= 0:
        raise ValueError("num_bins must be positive")
    weights = sp.triu(affinity, k=1).tocoo().data
    counts, edges = np.histogram(weights, bins=num_bins)
    return counts.astype(np.int64), edges


def write_edge_list(graph: HomoGraph, path) -> None:
    """Write kept undirected edges as ``item_i<TAB>item_j`` lines, i < j."""
    upper = sp.triu(graph.adjacency, k=1).tocoo()
    order = np.lexsort((upper.col, upper.row))
    with open(path, "w", encoding="ascii") as fh:
        for r, c in zip(upper.row[order], upper.col[order]):
            fh.write(f"{r}\t{c}\n")


def write_histogram(counts: np.ndarray, edges: np.ndarray, path) -> None:
    """Write histogram rows as ``bin_left<TAB>bin_right<TAB>count`` lines."""
    with open(path, "w", encoding="ascii") as fh:
        for i, count in enumerate(counts):
            fh.write(f"{float(edges[i])!r}\t{float(edges[i + 1])!r}\t{int(count)}\n")
