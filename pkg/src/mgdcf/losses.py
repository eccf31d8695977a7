"""Ranking losses over encoded embeddings and their analytic gradient.

A training batch is a set of observed (user, item) pairs, each paired with
N_neg uniformly sampled negative items. Scores are plain dot products of
rows of the encoded table Z, whose first num_users rows are users and the
rest items; batches therefore address rows of Z directly.

The softmax ranking loss treats each positive's group {positive, negatives}
as a classification problem with the positive as the target; with a single
negative it reduces exactly to the classic pairwise softplus loss, and its
pull grows with the number of negatives, which is what buys the fast
convergence the trainer relies on. All group reductions are max-shifted so
large scores cannot overflow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "LossConfig",
    "TrainingBatch",
    "score",
    "bpr_loss",
    "info_bpr_loss",
    "info_bpr_from_scores",
    "bpr_from_scores",
    "l2_loss",
    "combined_loss",
    "loss_grad_z",
]

# positives processed per block when gathering negative scores; fixed so the
# accumulation order (and therefore the result bits) never depends on memory
_CHUNK = 2048


@dataclass(frozen=True)
class LossConfig:
    """Negative count and embedding penalty weight."""

    n_neg: int = 300
    l2_coeff: float = 1e-4

    def __post_init__(self):
        if self.n_neg < 1:
            raise ConfigurationError(f"n_neg must be >= 1, got {self.n_neg}")
        if self.l2_coeff < 0:
            raise ConfigurationError(
                f"l2_coeff must be >= 0, got {self.l2_coeff}"
            )


@dataclass(frozen=True)
class TrainingBatch:
    """Row indices into the encoded table for one optimization step."""

    user_rows: np.ndarray  # (B,)
    pos_rows: np.ndarray   # (B,)
    neg_rows: np.ndarray   # (B, n_neg)

    def __post_init__(self):
        users = np.asarray(self.user_rows, dtype=np.int64).ravel()
        pos = np.asarray(self.pos_rows, dtype=np.int64).ravel()
        negs = np.asarray(self.neg_rows, dtype=np.int64)
        if negs.ndim == 1:
            negs = negs[:, None]
        if users.size == 0:
            raise ConfigurationError("a training batch cannot be empty")
        if not (users.size == pos.size == negs.shape[0]):
            raise ConfigurationError("batch arrays disagree on batch size")
        object.__setattr__(self, "user_rows", users)
        object.__setattr__(self, "pos_rows", pos)
        object.__setattr__(self, "neg_rows", negs)

    @property
    def size(self) -> int:
        return self.user_rows.size

    @property
    def n_neg(self) -> int:
        return self.neg_rows.shape[1]


def score(z: np.ndarray, row_a: int, row_b: int) -> float:
    """Dot-product preference score between two rows of the encoded table."""
    return float(z[row_a] @ z[row_b])


def _gather_scores(
    z: np.ndarray, batch: TrainingBatch
) -> tuple[np.ndarray, np.ndarray]:
    """Positive scores (B,) and negative scores (B, n_neg), chunked."""
    users = z[batch.user_rows]
    pos = np.einsum("bd,bd->b", users, z[batch.pos_rows])
    neg = np.empty((batch.size, batch.n_neg), dtype=np.float64)
    for start in range(0, batch.size, _CHUNK):
        stop = min(start + _CHUNK, batch.size)
        neg[start:stop] = np.einsum(
            "bd,bnd->bn", users[start:stop], z[batch.neg_rows[start:stop]]
        )
    return pos, neg


def bpr_from_scores(pos_scores: np.ndarray, neg_scores: np.ndarray) -> np.ndarray:
    """Per-pair softplus(-(s_pos - s_neg)) with a stable formulation."""
    return np.logaddexp(0.0, np.asarray(neg_scores) - np.asarray(pos_scores))


def info_bpr_from_scores(
    pos_scores: np.ndarray, neg_scores: np.ndarray
) -> np.ndarray:
    """Per-positive -log softmax(s_pos | group), max-shifted.

    ``neg_scores`` has one row of negatives per positive score.
    """
    pos = np.asarray(pos_scores, dtype=np.float64).ravel()
    neg = np.asarray(neg_scores, dtype=np.float64)
    if neg.ndim == 1:
        neg = neg[:, None]
    group = np.concatenate([pos[:, None], neg], axis=1)
    shift = group.max(axis=1, keepdims=True)
    log_norm = shift[:, 0] + np.log(np.exp(group - shift).sum(axis=1))
    return log_norm - pos


def bpr_loss(z: np.ndarray, batch: TrainingBatch) -> float:
    """Mean pairwise softplus loss; requires exactly one negative per pair."""
    if batch.n_neg != 1:
        raise ConfigurationError(
            f"bpr_loss expects one negative per positive, got {batch.n_neg}"
        )
    pos, neg = _gather_scores(z, batch)
    return float(np.mean(bpr_from_scores(pos, neg[:, 0])))


def info_bpr_loss(
    z: np.ndarray, batch: TrainingBatch, config: LossConfig | None = None
) -> float:
    """Mean softmax ranking loss over each positive's group."""
    if config is not None and config.n_neg != batch.n_neg:
        raise ConfigurationError(
            f"batch carries {batch.n_neg} negatives but config says "
            f"{config.n_neg}"
        )
    pos, neg = _gather_scores(z, batch)
    return float(np.mean(info_bpr_from_scores(pos, neg)))


def _involved_row_counts(batch: TrainingBatch, num_rows: int) -> np.ndarray:
    rows = np.concatenate(
        [batch.user_rows, batch.pos_rows, batch.neg_rows.ravel()]
    )
    return np.bincount(rows, minlength=num_rows)


def l2_loss(z: np.ndarray, batch: TrainingBatch) -> float:
    """Half the summed squared norms of involved rows, once per occurrence,
    divided by the batch size."""
    counts = _involved_row_counts(batch, z.shape[0])
    touched = np.flatnonzero(counts)
    norms = np.einsum("rd,rd->r", z[touched], z[touched])
    return float(0.5 * np.sum(counts[touched] * norms) / batch.size)


def combined_loss(z: np.ndarray, batch: TrainingBatch, config: LossConfig) -> float:
    """Softmax ranking loss plus the weighted embedding penalty."""
    return info_bpr_loss(z, batch, config) + config.l2_coeff * l2_loss(z, batch)


def _scatter_add_rows(out: np.ndarray, rows: np.ndarray, updates: np.ndarray) -> None:
    """out[rows] += updates with a deterministic summation order.

    Stable argsort groups duplicate rows while keeping their original order,
    so the per-row accumulation sequence is fixed by the batch layout alone.
    """
    if rows.size == 0:
        return
    order = np.argsort(rows, kind="stable")
    sorted_rows = rows[order]
    sorted_updates = updates[order]
    starts = np.flatnonzero(np.r_[True, sorted_rows[1:] != sorted_rows[:-1]])
    sums = np.add.reduceat(sorted_updates, starts, axis=0)
    out[sorted_rows[starts]] += sums


def loss_grad_z(
    z: np.ndarray, batch: TrainingBatch, config: LossConfig
) -> np.ndarray:
    """Analytic gradient of ``combined_loss`` with respect to Z.

    Returned dense with the table's shape; only rows touched by the batch are
    nonzero. For each positive's group, softmax weights w over the stacked
    scores [s_pos, s_neg...] give the user row sum_k (w_k - [k is positive])
    * z_item_k and each item row (w_k - [k is positive]) * z_user; the
    penalty adds l2_coeff * z_row per occurrence; everything is divided by
    the batch size.
    """
    if config.n_neg != batch.n_neg:
        raise ConfigurationError(
            f"batch carries {batch.n_neg} negatives but config says "
            f"{config.n_neg}"
        )
    grad = np.zeros_like(z)
    users = z[batch.user_rows]
    for start in range(0, batch.size, _CHUNK):
        stop = min(start + _CHUNK, batch.size)
        u = users[start:stop]
        item_rows = np.concatenate(
            [batch.pos_rows[start:stop, None], batch.neg_rows[start:stop]],
            axis=1,
        )
        items = z[item_rows]                          # (b, 1 + n_neg, d)
        scores = np.einsum("bd,bnd->bn", u, items)    # (b, 1 + n_neg)
        shift = scores.max(axis=1, keepdims=True)
        weights = np.exp(scores - shift)
        weights /= weights.sum(axis=1, keepdims=True)
        weights[:, 0] -= 1.0
        _scatter_add_rows(
            grad,
            batch.user_rows[start:stop],
            np.einsum("bn,bnd->bd", weights, items),
        )
        _scatter_add_rows(
            grad,
            item_rows.ravel(),
            (weights[:, :, None] * u[:, None, :]).reshape(-1, z.shape[1]),
        )
    counts = _involved_row_counts(batch, z.shape[0])
    grad += config.l2_coeff * counts[:, None] * z
    grad /= batch.size
    return grad
