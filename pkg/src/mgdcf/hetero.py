"""Heterogeneous user-item graph construction.

Users and items share one vertex space: user u keeps its id and item j maps
to num_users + j. The block adjacency holds the train interactions in both
directions and nothing else; the affinity operator is its symmetric degree
normalization with self-loops, so every vertex (isolated ones included) has a
diagonal entry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import sparse
from .data import InteractionDataset

__all__ = ["HeteroGraph", "build_hetero_affinity", "item_row_offset"]


def item_row_offset(dataset: InteractionDataset) -> int:
    """Row index of item 0 in the shared vertex space."""
    return dataset.num_users


@dataclass
class HeteroGraph:
    """Normalized user-item affinity over the shared vertex space."""

    affinity: sp.csr_matrix
    num_users: int
    num_items: int

    @property
    def num_vertices(self) -> int:
        return self.num_users + self.num_items


def build_hetero_affinity(dataset: InteractionDataset) -> HeteroGraph:
    """Build the symmetric normalized affinity from train edges only."""
    n = dataset.num_users + dataset.num_items
    users = dataset.train_edges[:, 0]
    items = dataset.train_edges[:, 1] + dataset.num_users
    rows = np.concatenate([users, items])
    cols = np.concatenate([items, users])
    adjacency = sparse.from_entries(n, n, rows, cols, 1.0)
    affinity = sparse.sym_normalize(adjacency, add_self_loops=True)
    return HeteroGraph(
        affinity=affinity,
        num_users=dataset.num_users,
        num_items=dataset.num_items,
    )
