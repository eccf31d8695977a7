"""Markov graph diffusion over a normalized affinity operator.

The encoder is a K-step teleport recurrence

    H_0 = X,    H_k = beta * A_hat @ H_{k-1} + alpha * X,    Z = H_K / gamma

with gamma = beta^K + sum_{k<K} alpha * beta^k, which makes Z a convex
combination of propagated inputs: Z = sum_k theta_k A_hat^k X with
theta_k = alpha beta^k / gamma for k < K and theta_K = beta^K / gamma, and
sum_k theta_k = 1. Two classic propagation rules are the endpoints of the
(alpha, beta) plane: alpha = beta = 1 averages the first K+1 propagated
powers, and beta = 1 - alpha is the teleport recurrence whose gamma is 1.

For beta < 1 the recurrence converges geometrically to the linear-system
limit Z = (1 - beta) (I - beta A_hat)^-1 X, which is also the unique
stationary point of a smoothness/anchoring trade-off between neighbors
agreeing and vertices staying near their inputs; both facts are enforced by
the verification battery and the test suite rather than trusted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import sparse
from .errors import ConfigurationError

__all__ = [
    "DiffusionConfig",
    "mgdn_forward",
    "mgdn_closed_form",
    "mgdn_inverse",
    "distance_loss",
    "distance_residual",
    "CLOSED_FORM_MAX_VERTICES",
]

# dense solves beyond this order are refused rather than silently attempted
CLOSED_FORM_MAX_VERTICES = 4096

PRESET_NAMES = ("custom", "lightgcn", "appnp")


@dataclass(frozen=True)
class DiffusionConfig:
    """Teleport weight alpha, decay beta, and layer count k_layers."""

    alpha: float
    beta: float
    k_layers: int

    def __post_init__(self):
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "beta", float(self.beta))
        if self.alpha < 0:
            raise ConfigurationError(f"alpha must be >= 0, got {self.alpha}")
        if not 0.0 < self.beta <= 1.0:
            raise ConfigurationError(f"beta must be in (0, 1], got {self.beta}")
        if self.k_layers < 0 or int(self.k_layers) != self.k_layers:
            raise ConfigurationError(
                f"k_layers must be a non-negative integer, got {self.k_layers}"
            )
        object.__setattr__(self, "k_layers", int(self.k_layers))
        if self.gamma <= 0:
            raise ConfigurationError("degenerate normalizer: gamma must be > 0")

    @property
    def gamma(self) -> float:
        """Normalizer beta^K + sum_{k<K} alpha * beta^k."""
        teleport = 0.0
        power = 1.0
        for _ in range(self.k_layers):
            teleport += self.alpha * power
            power *= self.beta
        return power + teleport

    @property
    def mu(self) -> float:
        """Anchoring weight of the equivalent trade-off, (1 - beta) / beta."""
        return (1.0 - self.beta) / self.beta

    def coefficients(self) -> np.ndarray:
        """Convex weights theta_0 .. theta_K over propagated input powers."""
        gamma = self.gamma
        k = np.arange(self.k_layers + 1)
        theta = self.alpha * self.beta ** k / gamma
        theta[-1] = self.beta ** self.k_layers / gamma
        return theta

    @classmethod
    def lightgcn(cls, k_layers: int) -> "DiffusionConfig":
        """Uniform averaging of the first K+1 propagated powers."""
        return cls(alpha=1.0, beta=1.0, k_layers=k_layers)

    @classmethod
    def appnp(cls, alpha: float, k_layers: int) -> "DiffusionConfig":
        """Teleport recurrence with beta = 1 - alpha, whose gamma is 1."""
        return cls(alpha=alpha, beta=1.0 - alpha, k_layers=k_layers)

    @classmethod
    def from_preset(
        cls,
        preset: str,
        alpha: float = 0.1,
        beta: float = 0.9,
        k_layers: int = 4,
    ) -> "DiffusionConfig":
        if preset == "custom":
            return cls(alpha=alpha, beta=beta, k_layers=k_layers)
        if preset == "lightgcn":
            return cls.lightgcn(k_layers)
        if preset == "appnp":
            return cls.appnp(alpha, k_layers)
        raise ConfigurationError(
            f"unknown preset {preset!r}, expected one of {PRESET_NAMES}"
        )


def _as_operator(affinity) -> tuple[object, int]:
    if sp.issparse(affinity):
        if affinity.shape[0] != affinity.shape[1]:
            raise ConfigurationError("affinity operator must be square")
        return affinity, affinity.shape[0]
    dense = np.asarray(affinity, dtype=np.float64)
    if dense.ndim != 2 or dense.shape[0] != dense.shape[1]:
        raise ConfigurationError("affinity operator must be square")
    return dense, dense.shape[0]


def _apply(operator, dense: np.ndarray) -> np.ndarray:
    if sp.issparse(operator):
        return sparse.spmm(operator, dense)
    return operator @ dense


def mgdn_forward(
    inputs: np.ndarray, affinity, config: DiffusionConfig
) -> np.ndarray:
    """Run the K-step diffusion recurrence and normalize by gamma."""
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2:
        raise ConfigurationError("inputs must be a 2-D array")
    operator, n = _as_operator(affinity)
    if x.shape[0] != n:
        raise ConfigurationError(
            f"inputs have {x.shape[0]} rows but the operator order is {n}"
        )
    state = x.copy()
    teleport = config.alpha * x
    for _ in range(config.k_layers):
        state = config.beta * _apply(operator, state) + teleport
    return state / config.gamma


def mgdn_closed_form(
    inputs: np.ndarray, affinity, config: DiffusionConfig
) -> np.ndarray:
    """Diffusion limit (1 - beta) (I - beta A_hat)^-1 X by dense solve.

    Requires beta < 1 and operator order at most CLOSED_FORM_MAX_VERTICES.
    """
    x = np.asarray(inputs, dtype=np.float64)
    operator, n = _as_operator(affinity)
    if x.ndim != 2 or x.shape[0] != n:
        raise ConfigurationError("inputs must be 2-D with one row per vertex")
    if config.beta >= 1.0:
        raise ConfigurationError("closed form requires beta < 1")
    if n > CLOSED_FORM_MAX_VERTICES:
        raise ConfigurationError(
            f"closed form is a dense solve, refusing order {n} > "
            f"{CLOSED_FORM_MAX_VERTICES}"
        )
    dense_op = operator.toarray() if sp.issparse(operator) else operator
    system = np.eye(n) - config.beta * dense_op
    return (1.0 - config.beta) * np.linalg.solve(system, x)


def mgdn_inverse(
    outputs: np.ndarray, affinity, config: DiffusionConfig
) -> np.ndarray:
    """Invert the diffusion limit: X = (I - beta A_hat) Z / (1 - beta).

    The normalizer is the limit value alpha / (1 - beta) of gamma, which is
    what makes this the exact inverse of ``mgdn_closed_form``. Undefined for
    alpha = 0 (no teleport mass to recover) and for beta = 1.
    """
    z = np.asarray(outputs, dtype=np.float64)
    operator, n = _as_operator(affinity)
    if z.ndim != 2 or z.shape[0] != n:
        raise ConfigurationError("outputs must be 2-D with one row per vertex")
    if config.alpha == 0:
        raise ConfigurationError("inverse undefined for alpha = 0")
    if config.beta >= 1.0:
        raise ConfigurationError("inverse requires beta < 1")
    return (z - config.beta * _apply(operator, z)) / (1.0 - config.beta)


def _degree_scaled(rows_sums: np.ndarray) -> np.ndarray:
    return np.divide(
        1.0,
        np.sqrt(rows_sums),
        out=np.zeros_like(rows_sums),
        where=rows_sums > 0,
    )


def distance_loss(
    inputs: np.ndarray,
    outputs: np.ndarray,
    adjacency_with_loops: sp.csr_matrix,
    mu: float,
) -> float:
    """Smoothness/anchoring objective in its pairwise form.

    0.5 * ( sum_ij w_ij || z_i / sqrt(d_i) - z_j / sqrt(d_j) ||^2
            + mu * sum_i || z_i - x_i ||^2 )

    with w the self-looped adjacency weights and d its row sums. The pairwise
    sum runs over ordered stored entries.
    """
    x = np.asarray(inputs, dtype=np.float64)
    z = np.asarray(outputs, dtype=np.float64)
    if x.shape != z.shape:
        raise ConfigurationError("inputs and outputs must share a shape")
    adj = sparse.canonicalize(adjacency_with_loops)
    degrees = np.asarray(adj.sum(axis=1)).ravel()
    scaled = z * _degree_scaled(degrees)[:, None]
    rows, cols, weights = sparse.to_entries(adj)
    diffs = scaled[rows] - scaled[cols]
    pairwise = float(np.sum(weights * np.einsum("ed,ed->e", diffs, diffs)))
    anchor = mu * float(np.sum((z - x) ** 2))
    return 0.5 * (pairwise + anchor)


def distance_residual(
    inputs: np.ndarray,
    outputs: np.ndarray,
    adjacency_with_loops: sp.csr_matrix,
    mu: float,
) -> np.ndarray:
    """Stationarity residual (I - A_hat) Z + mu (Z - X) of the trade-off.

    A_hat is the symmetric normalization of the self-looped adjacency. Up to
    a constant factor and a rescaling of mu this is the gradient of
    ``distance_loss``; its unique root is the diffusion limit with
    beta = 1 / (1 + mu), which is exactly what the optimality check relies
    on.
    """
    x = np.asarray(inputs, dtype=np.float64)
    z = np.asarray(outputs, dtype=np.float64)
    if x.shape != z.shape:
        raise ConfigurationError("inputs and outputs must share a shape")
    a_hat = sparse.sym_normalize(adjacency_with_loops, add_self_loops=False)
    return z - sparse.spmm(a_hat, z) + mu * (z - x)
