"""Markov graph-diffusion collaborative filtering.

A compact engine for implicit-feedback recommendation: user and item
embeddings are encoded by a normalized-adjacency diffusion whose coefficients
form a convex combination of propagated inputs, trained with a multi-negative
softmax ranking loss, and evaluated with top-K recall and NDCG. The graph can
be the heterogeneous user-item bipartite structure or a sparsified item-item
graph distilled from two-step transition probabilities.
"""

from .data import InteractionDataset, density, load_dataset, random_split
from .diffusion import (
    DiffusionConfig,
    distance_loss,
    distance_residual,
    mgdn_closed_form,
    mgdn_forward,
    mgdn_inverse,
)
from .errors import ConfigurationError, DataFormatError
from .evaluation import RankingReport, evaluate, ndcg_at_k, rank_items, recall_at_k
from .hetero import HeteroGraph, build_hetero_affinity
from .homo import (
    HomoGraph,
    SparsificationConfig,
    affinity_from_transitions,
    affinity_histogram,
    build_homo_graph,
    build_transitions,
    sparsify,
)
from .losses import (
    LossConfig,
    TrainingBatch,
    bpr_loss,
    combined_loss,
    info_bpr_loss,
    l2_loss,
    loss_grad_z,
    score,
)
from .training import (
    Adam,
    FitResult,
    GraphEncoder,
    TrainConfig,
    Trainer,
    backprop_diffusion,
    init_embeddings,
    load_checkpoint,
    save_checkpoint,
)
from .verification import VerificationReport, run_battery

__version__ = "0.1.0"

__all__ = [
    "InteractionDataset",
    "density",
    "load_dataset",
    "random_split",
    "DiffusionConfig",
    "distance_loss",
    "distance_residual",
    "mgdn_closed_form",
    "mgdn_forward",
    "mgdn_inverse",
    "ConfigurationError",
    "DataFormatError",
    "RankingReport",
    "evaluate",
    "ndcg_at_k",
    "rank_items",
    "recall_at_k",
    "HeteroGraph",
    "build_hetero_affinity",
    "HomoGraph",
    "SparsificationConfig",
    "affinity_from_transitions",
    "affinity_histogram",
    "build_homo_graph",
    "build_transitions",
    "sparsify",
    "LossConfig",
    "TrainingBatch",
    "bpr_loss",
    "combined_loss",
    "info_bpr_loss",
    "l2_loss",
    "loss_grad_z",
    "score",
    "Adam",
    "FitResult",
    "GraphEncoder",
    "TrainConfig",
    "Trainer",
    "backprop_diffusion",
    "init_embeddings",
    "load_checkpoint",
    "save_checkpoint",
    "VerificationReport",
    "run_battery",
    "__version__",
]
