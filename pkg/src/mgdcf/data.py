"""Implicit-feedback dataset loading, integrity checks, and export.

The on-disk format is the plain benchmark convention: one ASCII line per
user, whitespace separated, the first integer the user id and the remaining
integers the ids of items that user interacted with. A line holding only a
user id contributes the user but no edges. Ids are dense and zero-based;
user and item counts are inferred as max id + 1 across both splits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import sparse
from .errors import DataFormatError

__all__ = [
    "InteractionDataset",
    "load_interactions",
    "load_dataset",
    "build_dataset",
    "save_interactions",
    "random_split",
    "density",
]


def _parse_line(path: str, line_no: int, line: str) -> tuple[int, list[int]] | None:
    tokens = line.split()
    if not tokens:
        return None
    values = []
    for tok in tokens:
        try:
            value = int(tok)
        except ValueError:
            raise DataFormatError(
                f"{path}:{line_no}: non-integer token {tok!r}"
            ) from None
        if value < 0:
            raise DataFormatError(f"{path}:{line_no}: negative id {value}")
        values.append(value)
    return values[0], values[1:]


def load_interactions(path) -> tuple[np.ndarray, int, int]:
    """Parse one interaction file.

    Returns (edges, max_user_id, max_item_id) where ``edges`` is a unique,
    lexicographically sorted (E, 2) int array of (user, item) pairs and the
    max ids are -1 when the file contributes none.
    """
    path = str(path)
    pairs: set[tuple[int, int]] = set()
    max_user = -1
    max_item = -1
    with open(path, "r", encoding="ascii") as fh:
        for line_no, line in enumerate(fh, start=1):
            parsed = _parse_line(path, line_no, line)
            if parsed is None:
                continue
            user, items = parsed
            max_user = max(max_user, user)
            for item in items:
                max_item = max(max_item, item)
                pairs.add((user, item))
    if pairs:
        edges = np.array(sorted(pairs), dtype=np.int64)
    else:
        edges = np.zeros((0, 2), dtype=np.int64)
    return edges, max_user, max_item


@dataclass
class InteractionDataset:
    """A train/test split of user-item interactions plus derived lookups."""

    num_users: int
    num_items: int
    train_edges: np.ndarray
    test_edges: np.ndarray
    interaction_matrix: sp.csr_matrix = field(repr=False)
    train_items: list[np.ndarray] = field(repr=False)
    test_items: list[np.ndarray] = field(repr=False)

    @property
    def num_train(self) -> int:
        return self.train_edges.shape[0]

    @property
    def num_test(self) -> int:
        return self.test_edges.shape[0]


def _group_by_user(edges: np.ndarray, num_users: int) -> list[np.ndarray]:
    groups = [np.zeros(0, dtype=np.int64) for _ in range(num_users)]
    if edges.shape[0] == 0:
        return groups
    # edges are sorted by (user, item), so each user's block is contiguous
    users = edges[:, 0]
    boundaries = np.flatnonzero(np.r_[True, users[1:] != users[:-1]])
    ends = np.r_[boundaries[1:], users.size]
    for start, end in zip(boundaries, ends):
        groups[users[start]] = edges[start:end, 1].copy()
    return groups


def build_dataset(
    num_users: int,
    num_items: int,
    train_edges: np.ndarray,
    test_edges: np.ndarray,
) -> InteractionDataset:
    """Assemble a dataset from already-parsed edge arrays."""
    train_edges = np.asarray(train_edges, dtype=np.int64).reshape(-1, 2)
    test_edges = np.asarray(test_edges, dtype=np.int64).reshape(-1, 2)
    train_edges = np.unique(train_edges, axis=0) if train_edges.size else train_edges
    test_edges = np.unique(test_edges, axis=0) if test_edges.size else test_edges
    for name, edges in (("train", train_edges), ("test", test_edges)):
        if edges.size and (edges.min() < 0):
            raise DataFormatError(f"{name} split contains a negative id")
        if edges.size and edges[:, 0].max() >= num_users:
            raise DataFormatError(f"{name} split has a user id beyond num_users")
        if edges.size and edges[:, 1].max() >= num_items:
            raise DataFormatError(f"{name} split has an item id beyond num_items")
    if train_edges.size and test_edges.size:
        overlap = set(map(tuple, train_edges)) & set(map(tuple, test_edges))
        if overlap:
            pair = sorted(overlap)[0]
            raise DataFormatError(
                f"train and test splits overlap, e.g. user {pair[0]} item {pair[1]}"
            )
    matrix = sparse.from_entries(
        num_users, num_items, train_edges[:, 0], train_edges[:, 1], 1.0
    )
    return InteractionDataset(
        num_users=num_users,
        num_items=num_items,
        train_edges=train_edges,
        test_edges=test_edges,
        interaction_matrix=matrix,
        train_items=_group_by_user(train_edges, num_users),
        test_items=_group_by_user(test_edges, num_users),
    )


def load_dataset(train_path, test_path) -> InteractionDataset:
    """Load a train/test pair of interaction files."""
    train_edges, train_mu, train_mi = load_interactions(train_path)
    test_edges, test_mu, test_mi = load_interactions(test_path)
    num_users = max(train_mu, test_mu) + 1
    num_items = max(train_mi, test_mi) + 1
    if num_users <= 0 or num_items <= 0:
        raise DataFormatError(
            f"empty corpus: no ids found in {train_path} / {test_path}"
        )
    return build_dataset(num_users, num_items, train_edges, test_edges)


def save_interactions(path, edges: np.ndarray, num_users: int | None = None) -> None:
    """Write edges in the one-line-per-user format.

    When ``num_users`` is given, every user id below it gets a line even if it
    has no items, which preserves the inferred user count on reload.
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    edges = np.unique(edges, axis=0) if edges.size else edges
    count = int(num_users) if num_users is not None else (
        int(edges[:, 0].max()) + 1 if edges.size else 0
    )
    groups = _group_by_user(edges, count)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for user in range(count):
            items = " ".join(str(i) for i in groups[user])
            fh.write(f"{user} {items}\n" if items else f"{user}\n")


def random_split(
    edges: np.ndarray, test_fraction: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic per-user holdout split for corpora that ship unsplit.

    Each user's items are shuffled with a seeded generator and
    floor(n * test_fraction) of them held out; users with a single item keep
    it in train.
    """
    if not 0.0 <= test_fraction < 1.0:
        raise ValueError("test_fraction must be in [0, 1)")
    edges = np.unique(np.asarray(edges, dtype=np.int64).reshape(-1, 2), axis=0)
    rng = np.random.default_rng(seed)
    train_parts: list[np.ndarray] = []
    test_parts: list[np.ndarray] = []
    users = edges[:, 0]
    boundaries = np.flatnonzero(np.r_[True, users[1:] != users[:-1]])
    ends = np.r_[boundaries[1:], users.size]
    for start, end in zip(boundaries, ends):
        block = edges[start:end]
        n_test = int(np.floor(block.shape[0] * test_fraction))
        if block.shape[0] <= 1 or n_test == 0:
            train_parts.append(block)
            continue
        order = rng.permutation(block.shape[0])
        test_parts.append(block[order[:n_test]])
        train_parts.append(block[order[n_test:]])
    train = np.concatenate(train_parts) if train_parts else np.zeros((0, 2), np.int64)
    test = np.concatenate(test_parts) if test_parts else np.zeros((0, 2), np.int64)
    return np.unique(train, axis=0), np.unique(test, axis=0)


def density(dataset: InteractionDataset) -> float:
    """Fraction of the user-item grid covered by train plus test edges."""
    cells = dataset.num_users * dataset.num_items
    if cells == 0:
        raise ValueError("density undefined for an empty grid")
    return (dataset.num_train + dataset.num_test) / cells
