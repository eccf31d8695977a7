"""Full-graph training of the embedding table.

One table holds every vertex: num_users user rows followed by num_items item
rows. Each optimization step encodes the whole table once, scores one batch
of positives against sampled negatives, and pushes the analytic gradient
back through the encoder; because the diffusion operator is symmetric, the
pullback is the same diffusion applied to the upstream gradient, so rows far
outside the batch still receive signal through their neighbors.

Modes:
  * ``hetero``: diffusion over the user-item affinity, the whole table.
  * ``homo``: diffusion over the item-item graph, item rows only; user rows
    pass through bytewise untouched.
  * ``none``: no diffusion, plain matrix factorization.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import sparse
from .data import InteractionDataset
from .diffusion import DiffusionConfig, mgdn_forward
from .errors import ConfigurationError
from .evaluation import evaluate
from .hetero import build_hetero_affinity
from .homo import SparsificationConfig, build_homo_graph
from .losses import LossConfig, TrainingBatch, combined_loss, loss_grad_z

__all__ = [
    "TrainConfig",
    "FitResult",
    "init_embeddings",
    "Adam",
    "GraphEncoder",
    "backprop_diffusion",
    "Trainer",
    "save_checkpoint",
    "load_checkpoint",
]

MODES = ("hetero", "homo", "none")

_CHECKPOINT_MAGIC = b"MGDCFCKP"
_CHECKPOINT_VERSION = 1

# corpora with at least this many train edges evaluate every 5 epochs
_LARGE_CORPUS_EDGES = 200_000


@dataclass(frozen=True)
class TrainConfig:
    """Optimization settings; seed fixes initialization and all sampling."""

    mode: str = "hetero"
    epochs: int = 100
    batch_size: int = 8192
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 42
    embedding_dim: int = 64
    eval_interval: int | None = None  # None: every epoch, 5 on large corpora
    early_stop_patience: int = 50

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(
                f"mode must be one of {MODES}, got {self.mode!r}"
            )
        if self.epochs < 0:
            raise ConfigurationError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigurationError("learning_rate must be > 0")
        if self.embedding_dim < 1:
            raise ConfigurationError("embedding_dim must be >= 1")
        if self.eval_interval is not None and self.eval_interval < 1:
            raise ConfigurationError("eval_interval must be >= 1 when set")
        if self.early_stop_patience < 1:
            raise ConfigurationError("early_stop_patience must be >= 1")


def init_embeddings(num_rows: int, dim: int, seed: int) -> np.ndarray:
    """Gaussian init, std 0.01, fully determined by the seed."""
    rng = np.random.default_rng(seed)
    return rng.normal(loc=0.0, scale=0.01, size=(num_rows, dim))


class Adam:
    """Standard adaptive-moment optimizer with bias correction."""

    def __init__(self, shape, learning_rate, beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> None:
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        params -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.epsilon)


def backprop_diffusion(
    grad_outputs: np.ndarray, affinity: sp.csr_matrix, config: DiffusionConfig
) -> np.ndarray:
    """Pull a gradient back through the diffusion encoder.

    The encoder is linear with a symmetric operator, so its transpose is
    itself: the pullback is ``mgdn_forward`` applied to the upstream
    gradient. Refuses asymmetric operators, for which that identity breaks.
    """
    if sparse.max_abs_asymmetry(affinity) > 0.0:
        raise ConfigurationError(
            "backprop through diffusion requires a symmetric operator"
        )
    return mgdn_forward(grad_outputs, affinity, config)


class GraphEncoder:
    """Applies the mode's diffusion to the table and pulls gradients back."""

    def __init__(
        self,
        mode: str,
        num_users: int,
        diffusion: DiffusionConfig,
        affinity: sp.csr_matrix | None,
    ):
        if mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}")
        if mode != "none":
            if affinity is None:
                raise ConfigurationError(f"mode {mode!r} needs an affinity operator")
            if sparse.max_abs_asymmetry(affinity) > 0.0:
                raise ConfigurationError("affinity operator must be symmetric")
        self.mode = mode
        self.num_users = num_users
        self.diffusion = diffusion
        self.affinity = affinity

    def encode(self, table: np.ndarray) -> np.ndarray:
        if self.mode == "none":
            return table.copy()
        if self.mode == "hetero":
            return mgdn_forward(table, self.affinity, self.diffusion)
        out = table.copy()
        out[self.num_users:] = mgdn_forward(
            table[self.num_users:], self.affinity, self.diffusion
        )
        return out

    def backprop(self, grad_encoded: np.ndarray) -> np.ndarray:
        if self.mode == "none":
            return grad_encoded.copy()
        if self.mode == "hetero":
            return backprop_diffusion(grad_encoded, self.affinity, self.diffusion)
        out = grad_encoded.copy()
        out[self.num_users:] = backprop_diffusion(
            grad_encoded[self.num_users:], self.affinity, self.diffusion
        )
        return out


@dataclass
class FitResult:
    """Trained tables plus the evaluation trajectory."""

    table: np.ndarray            # best table by validation NDCG
    final_table: np.ndarray
    history: list[dict] = field(default_factory=list)
    best_epoch: int = -1
    best_ndcg: float = float("-inf")


class Trainer:
    """Owns the table, the graph, the sampler, and the optimizer state."""

    def __init__(
        self,
        dataset: InteractionDataset,
        diffusion: DiffusionConfig,
        loss_config: LossConfig,
        train_config: TrainConfig,
        sparsification: SparsificationConfig | None = None,
    ):
        if dataset.num_train == 0:
            raise ConfigurationError("cannot train without train edges")
        self.dataset = dataset
        self.diffusion = diffusion
        self.loss_config = loss_config
        self.config = train_config
        num_rows = dataset.num_users + dataset.num_items
        if train_config.mode == "hetero":
            affinity = build_hetero_affinity(dataset).affinity
        elif train_config.mode == "homo":
            graph = build_homo_graph(
                dataset, sparsification or SparsificationConfig()
            )
            affinity = graph.affinity
        else:
            affinity = None
        self.encoder = GraphEncoder(
            train_config.mode, dataset.num_users, diffusion, affinity
        )
        self.table = init_embeddings(
            num_rows, train_config.embedding_dim, train_config.seed
        )
        self.optimizer = Adam(
            self.table.shape,
            train_config.learning_rate,
            train_config.beta1,
            train_config.beta2,
            train_config.epsilon,
        )
        self._rng = np.random.default_rng([train_config.seed, 1])
        self._epoch_order: np.ndarray = np.zeros(0, dtype=np.int64)
        self._cursor = 0

    @property
    def eval_interval(self) -> int:
        if self.config.eval_interval is not None:
            return self.config.eval_interval
        return 5 if self.dataset.num_train >= _LARGE_CORPUS_EDGES else 1

    def _next_batch(self) -> TrainingBatch:
        """Positives without replacement within an epoch, fresh negatives."""
        if self._cursor >= self._epoch_order.size:
            self._epoch_order = self._rng.permutation(self.dataset.num_train)
            self._cursor = 0
        chunk = self._epoch_order[
            self._cursor : self._cursor + self.config.batch_size
        ]
        self._cursor += chunk.size
        edges = self.dataset.train_edges[chunk]
        negatives = self._rng.integers(
            0,
            self.dataset.num_items,
            size=(chunk.size, self.loss_config.n_neg),
            dtype=np.int64,
        )
        offset = self.dataset.num_users
        return TrainingBatch(
            user_rows=edges[:, 0],
            pos_rows=edges[:, 1] + offset,
            neg_rows=negatives + offset,
        )

    def train_step(self) -> float:
        """One full-graph forward, one batch, one optimizer update."""
        batch = self._next_batch()
        encoded = self.encoder.encode(self.table)
        loss = combined_loss(encoded, batch, self.loss_config)
        if not np.isfinite(loss):
            raise RuntimeError(
                f"non-finite loss at optimizer step {self.optimizer.t + 1}"
            )
        grad_encoded = loss_grad_z(encoded, batch, self.loss_config)
        grad_table = self.encoder.backprop(grad_encoded)
        self.optimizer.step(self.table, grad_table)
        return loss

    def encode(self) -> np.ndarray:
        return self.encoder.encode(self.table)

    def fit(self, eval_cutoff: int = 20, log=None) -> FitResult:
        """Train for the configured epochs with periodic evaluation.

        Keeps the best table by NDCG and stops early after
        ``early_stop_patience`` evaluations without improvement.
        """
        steps_per_epoch = max(
            1,
            -(-self.dataset.num_train // self.config.batch_size),
        )
        result = FitResult(
            table=self.table.copy(), final_table=self.table, history=[]
        )
        evals_since_best = 0
        for epoch in range(1, self.config.epochs + 1):
            epoch_losses = [self.train_step() for _ in range(steps_per_epoch)]
            if epoch % self.eval_interval != 0:
                continue
            report = evaluate(self.encode(), self.dataset, cutoff=eval_cutoff)
            record = {
                "epoch": epoch,
                "loss": float(np.mean(epoch_losses)),
                "ndcg": report.ndcg,
                "recall": report.recall,
                "cutoff": report.cutoff,
                "num_users": report.num_users,
            }
            result.history.append(record)
            if log is not None:
                log(record)
            if report.ndcg > result.best_ndcg:
                result.best_ndcg = report.ndcg
                result.best_epoch = epoch
                result.table = self.table.copy()
                evals_since_best = 0
            else:
                evals_since_best += 1
                if evals_since_best >= self.config.early_stop_patience:
                    break
        result.final_table = self.table.copy()
        if result.best_epoch < 0:
            result.table = self.table.copy()
        return result


def save_checkpoint(path, table: np.ndarray, meta: dict | None = None) -> None:
    """Write the table as a small versioned binary container.

    Layout: 8-byte magic, u32 version, u32 header length, JSON header with
    the row/column counts and caller metadata (config echo, seed), then the
    row-major little-endian float64 payload. Same table and metadata in,
    same bytes out.
    """
    table = np.ascontiguousarray(np.asarray(table, dtype=np.float64))
    if table.ndim != 2:
        raise ConfigurationError("checkpoint table must be 2-D")
    header = dict(meta or {})
    header["rows"] = int(table.shape[0])
    header["cols"] = int(table.shape[1])
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", _CHECKPOINT_VERSION, len(blob)))
        fh.write(blob)
        fh.write(table.astype("<f8").tobytes(order="C"))


def load_checkpoint(path) -> tuple[np.ndarray, dict]:
    """Read a container written by ``save_checkpoint``."""
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != _CHECKPOINT_MAGIC:
            raise ConfigurationError(f"{path}: not a checkpoint file")
        version, header_len = struct.unpack("<II", fh.read(8))
        if version != _CHECKPOINT_VERSION:
            raise ConfigurationError(
                f"{path}: unsupported checkpoint version {version}"
            )
        meta = json.loads(fh.read(header_len).decode("utf-8"))
        payload = fh.read(meta["rows"] * meta["cols"] * 8)
    table = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    if table.size != meta["rows"] * meta["cols"]:
        raise ConfigurationError(f"{path}: truncated checkpoint payload")
    return table.reshape(meta["rows"], meta["cols"]), meta
