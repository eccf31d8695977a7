"""Top-K ranking evaluation: recall and NDCG over held-out interactions.

Items a user already interacted with in the train split never appear in that
user's ranked list. Score ties break toward the smaller item index so runs
are reproducible, and users whose test set is empty are skipped entirely.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import InteractionDataset
from .errors import ConfigurationError

__all__ = ["RankingReport", "rank_items", "recall_at_k", "ndcg_at_k", "evaluate"]

_USER_BLOCK = 1024


@dataclass
class RankingReport:
    """Mean metrics at a cutoff plus the optional per-user breakdown."""

    cutoff: int
    recall: float
    ndcg: float
    num_users: int
    user_ids: np.ndarray | None = field(default=None, repr=False)
    recall_per_user: np.ndarray | None = field(default=None, repr=False)
    ndcg_per_user: np.ndarray | None = field(default=None, repr=False)

    def as_dict(self) -> dict:
        return {
            "cutoff": self.cutoff,
            "recall": self.recall,
            "ndcg": self.ndcg,
            "num_users": self.num_users,
        }


def _ranked_candidates(scores: np.ndarray, train_items: np.ndarray, k: int) -> np.ndarray:
    scores = scores.copy()
    scores[train_items] = -np.inf
    order = np.argsort(-scores, kind="stable")
    n_candidates = scores.size - train_items.size
    return order[: min(k, n_candidates)]


def rank_items(
    z: np.ndarray,
    num_users: int,
    user: int,
    train_items: np.ndarray,
    k: int,
) -> np.ndarray:
    """Top-k item ids for one user, excluding the user's train items."""
    if not 0 <= user < num_users:
        raise ConfigurationError(f"user {user} out of range")
    if k < 1:
        raise ConfigurationError("cutoff must be >= 1")
    item_block = z[num_users:]
    if item_block.shape[0] - np.asarray(train_items).size < 1:
        raise ConfigurationError(f"user {user} has no candidate items")
    scores = item_block @ z[user]
    return _ranked_candidates(scores, np.asarray(train_items, dtype=np.int64), k)


def recall_at_k(ranked: np.ndarray, test_items: np.ndarray, k: int) -> float:
    """Share of the user's test items that made the top-k."""
    test_items = np.asarray(test_items, dtype=np.int64)
    if test_items.size == 0:
        raise ValueError("recall undefined for an empty test set")
    hits = np.isin(ranked[:k], test_items).sum()
    return float(hits / test_items.size)


def ndcg_at_k(ranked: np.ndarray, test_items: np.ndarray, k: int) -> float:
    """Binary-relevance NDCG with the ideal DCG truncated at min(|test|, k)."""
    test_items = np.asarray(test_items, dtype=np.int64)
    if test_items.size == 0:
        raise ValueError("ndcg undefined for an empty test set")
    top = ranked[:k]
    hits = np.isin(top, test_items)
    positions = np.arange(1, top.size + 1)
    dcg = float(np.sum(hits / np.log2(positions + 1)))
    ideal_len = min(test_items.size, k)
    idcg = float(np.sum(1.0 / np.log2(np.arange(1, ideal_len + 1) + 1)))
    return dcg / idcg


def evaluate(
    z: np.ndarray,
    dataset: InteractionDataset,
    cutoff: int = 20,
    include_per_user: bool = False,
) -> RankingReport:
    """Mean recall and NDCG at ``cutoff`` over users with test interactions."""
    if z.shape[0] != dataset.num_users + dataset.num_items:
        raise ConfigurationError(
            f"table has {z.shape[0]} rows, dataset expects "
            f"{dataset.num_users + dataset.num_items}"
        )
    if cutoff < 1:
        raise ConfigurationError("cutoff must be >= 1")
    eligible = np.array(
        [u for u in range(dataset.num_users) if dataset.test_items[u].size > 0],
        dtype=np.int64,
    )
    item_block = z[dataset.num_users:]
    recalls = np.zeros(eligible.size)
    ndcgs = np.zeros(eligible.size)
    for start in range(0, eligible.size, _USER_BLOCK):
        block = eligible[start : start + _USER_BLOCK]
        scores = z[block] @ item_block.T
        for offset, user in enumerate(block):
            ranked = _ranked_candidates(
                scores[offset], dataset.train_items[user], cutoff
            )
            recalls[start + offset] = recall_at_k(
                ranked, dataset.test_items[user], cutoff
            )
            ndcgs[start + offset] = ndcg_at_k(
                ranked, dataset.test_items[user], cutoff
            )
    return RankingReport(
        cutoff=cutoff,
        recall=float(recalls.mean()) if eligible.size else 0.0,
        ndcg=float(ndcgs.mean()) if eligible.size else 0.0,
        num_users=int(eligible.size),
        user_ids=eligible if include_per_user else None,
        recall_per_user=recalls if include_per_user else None,
        ndcg_per_user=ndcgs if include_per_user else None,
    )
