"""Executable checks for the identities the engine is built on.

Each check states the claim it verifies, measures the worst deviation on
seeded random instances, and compares it against a fixed tolerance. The
oracles are deliberately independent of the code paths they test: dense
numpy solves against the sparse recurrence, exhaustive walk enumeration
against the transition algebra, perturbed recurrences against the presets.
``run_battery`` aggregates every check over many seeds and is what the
``verify`` CLI command runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import sparse
from .data import build_dataset
from .diffusion import (
    DiffusionConfig,
    distance_residual,
    mgdn_closed_form,
    mgdn_forward,
    mgdn_inverse,
)
from .homo import affinity_from_transitions, build_transitions

__all__ = [
    "CheckResult",
    "VerificationReport",
    "brute_force_affinity",
    "check_closed_form_convergence",
    "check_distance_optimality",
    "check_specializations",
    "check_inverse_roundtrip",
    "check_sparsification_oracle",
    "run_battery",
    "CHECK_NAMES",
]

CONVERGENCE_TARGET = 1e-9


@dataclass
class CheckResult:
    name: str
    claim: str
    deviation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.deviation <= self.tolerance

    def line(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return (
            f"{self.name}: deviation={self.deviation:.3e} "
            f"tolerance={self.tolerance:.3e} status={status}"
        )


@dataclass
class VerificationReport:
    results: list[CheckResult]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def lines(self) -> list[str]:
        return [r.line() for r in self.results]


def random_affinity(rng: np.random.Generator, n: int) -> sp.csr_matrix:
    """Symmetric normalized operator of a random undirected graph."""
    upper = np.triu(rng.random((n, n)) < min(1.0, 3.0 / n), k=1)
    adj = np.logical_or(upper, upper.T).astype(np.float64)
    rows, cols = np.nonzero(adj)
    return sparse.sym_normalize(
        sparse.from_entries(n, n, rows, cols, 1.0), add_self_loops=True
    )


def _instance(seed: int, n: int, dim: int):
    rng = np.random.default_rng(seed)
    return random_affinity(rng, n), rng.normal(size=(n, dim))


def _layers_for(beta: float, target: float = CONVERGENCE_TARGET) -> int:
    """Smallest K with beta^K <= target (K = 0 when beta is tiny already)."""
    if beta >= 1.0:
        raise ValueError("convergence horizon undefined for beta >= 1")
    return max(0, math.ceil(math.log(target) / math.log(beta)))


def check_closed_form_convergence(
    seed: int, n: int = 16, beta: float = 0.9, dim: int = 8
) -> CheckResult:
    """Recurrence run to beta^K <= 1e-9 agrees with the dense-solve limit."""
    affinity, x = _instance(seed, n, dim)
    config = DiffusionConfig(alpha=0.1, beta=beta, k_layers=_layers_for(beta))
    iterated = mgdn_forward(x, affinity, config)
    limit = mgdn_closed_form(x, affinity, config)
    return CheckResult(
        name="closed_form_convergence",
        claim=(
            "the diffusion recurrence converges to the linear-system limit "
            "(1-beta)(I - beta*A)^-1 X"
        ),
        deviation=float(np.abs(iterated - limit).max()),
        tolerance=1e-6,
    )


def check_distance_optimality(
    seed: int, n: int = 16, beta: float = 0.9, dim: int = 8
) -> CheckResult:
    """The stationarity residual vanishes at the closed-form solution."""
    rng = np.random.default_rng(seed)
    upper = np.triu(rng.random((n, n)) < min(1.0, 3.0 / n), k=1)
    mask = np.logical_or(upper, upper.T)
    rows, cols = np.nonzero(mask)
    adjacency = sparse.from_entries(n, n, rows, cols, 1.0)
    adjacency_loops = sparse.canonicalize(adjacency + sparse.identity(n))
    operator = sparse.sym_normalize(adjacency, add_self_loops=True)
    x = rng.normal(size=(n, dim))
    config = DiffusionConfig(alpha=0.1, beta=beta, k_layers=4)
    solution = mgdn_closed_form(x, operator, config)
    residual = distance_residual(x, solution, adjacency_loops, config.mu)
    return CheckResult(
        name="distance_optimality",
        claim=(
            "the diffusion limit is the stationary point of the "
            "smoothness/anchoring trade-off with mu = (1-beta)/beta"
        ),
        deviation=float(np.abs(residual).max()),
        tolerance=1e-8,
    )


def check_specializations(
    seed: int, n: int = 16, dim: int = 8, max_layers: int = 8
) -> CheckResult:
    """alpha=beta=1 averages propagated powers; beta=1-alpha has gamma 1.

    The oracles are a direct power loop and a direct teleport recurrence,
    neither of which goes through the configured forward pass.
    """
    affinity, x = _instance(seed, n, dim)
    worst = 0.0
    for k_layers in range(1, max_layers + 1):
        uniform = DiffusionConfig.lightgcn(k_layers)
        propagated = x.copy()
        total = x.copy()
        for _ in range(k_layers):
            propagated = sparse.spmm(affinity, propagated)
            total += propagated
        mean_of_powers = total / (k_layers + 1)
        worst = max(
            worst,
            float(np.abs(mgdn_forward(x, affinity, uniform) - mean_of_powers).max()),
        )
        for alpha in (0.05, 0.1, 0.5):
            teleport_cfg = DiffusionConfig.appnp(alpha, k_layers)
            state = x.copy()
            for _ in range(k_layers):
                state = (1.0 - alpha) * sparse.spmm(affinity, state) + alpha * x
            worst = max(
                worst,
                float(np.abs(mgdn_forward(x, affinity, teleport_cfg) - state).max()),
                abs(teleport_cfg.gamma - 1.0),
            )
    return CheckResult(
        name="specializations",
        claim=(
            "alpha=beta=1 reproduces the mean of propagated powers and "
            "beta=1-alpha reproduces the teleport recurrence with unit "
            "normalizer"
        ),
        deviation=worst,
        tolerance=1e-12,
    )


def check_inverse_roundtrip(
    seed: int, n: int = 16, beta: float = 0.9, dim: int = 8
) -> CheckResult:
    """mgdn_inverse undoes mgdn_closed_form."""
    affinity, x = _instance(seed, n, dim)
    config = DiffusionConfig(alpha=0.1, beta=beta, k_layers=4)
    recovered = mgdn_inverse(mgdn_closed_form(x, affinity, config), affinity, config)
    return CheckResult(
        name="inverse_roundtrip",
        claim="the inverse operator recovers the inputs from the limit outputs",
        deviation=float(np.abs(recovered - x).max()),
        tolerance=1e-10,
    )


def brute_force_affinity(interactions: np.ndarray) -> np.ndarray:
    """Oracle affinity p(i, j) / sqrt(p(i) p(j)) by exhaustive enumeration.

    ``interactions`` is a dense 0/1 user-by-item array. The joint p(i, j) is
    accumulated over every two-step walk item -> user -> item, starting from
    the degree-proportional item marginal; entries whose marginals vanish
    stay zero.
    """
    m = np.asarray(interactions, dtype=np.float64)
    num_items = m.shape[1]
    item_degree = m.sum(axis=0)
    user_degree = m.sum(axis=1)
    total = item_degree.sum()
    joint = np.zeros((num_items, num_items))
    for i in range(num_items):
        if item_degree[i] == 0:
            continue
        start = item_degree[i] / total
        for u in range(m.shape[0]):
            if m[u, i] == 0:
                continue
            step_to_user = 1.0 / item_degree[i]
            for j in range(num_items):
                if m[u, j] == 0:
                    continue
                joint[i, j] += start * step_to_user * (1.0 / user_degree[u])
    marginal = joint.sum(axis=1)
    out = np.zeros_like(joint)
    for i in range(num_items):
        for j in range(num_items):
            if joint[i, j] > 0 and marginal[i] > 0 and marginal[j] > 0:
                out[i, j] = joint[i, j] / math.sqrt(marginal[i] * marginal[j])
    return out


def _random_toy_interactions(
    rng: np.random.Generator, max_users: int, max_items: int
) -> np.ndarray:
    num_users = int(rng.integers(2, max_users + 1))
    num_items = int(rng.integers(2, max_items + 1))
    while True:
        m = (rng.random((num_users, num_items)) < 0.5).astype(np.float64)
        if m.sum() >= 2:
            return m


def check_sparsification_oracle(
    seed: int, max_users: int = 6, max_items: int = 6
) -> CheckResult:
    """Transition-algebra affinity equals the walk-enumeration oracle."""
    rng = np.random.default_rng(seed)
    m = _random_toy_interactions(rng, max_users, max_items)
    users, items = np.nonzero(m)
    dataset = build_dataset(
        m.shape[0],
        m.shape[1],
        np.column_stack([users, items]),
        np.zeros((0, 2), dtype=np.int64),
    )
    _, _, item_to_item = build_transitions(dataset)
    computed = affinity_from_transitions(item_to_item).toarray()
    oracle = brute_force_affinity(m)
    return CheckResult(
        name="sparsification_oracle",
        claim=(
            "symmetrized two-step transitions equal the joint-over-marginals "
            "affinity computed by exhaustive walk enumeration"
        ),
        deviation=float(np.abs(computed - oracle).max()),
        tolerance=1e-10,
    )


CHECK_NAMES = (
    "closed_form_convergence",
    "distance_optimality",
    "specializations",
    "inverse_roundtrip",
    "sparsification_oracle",
)

_BETAS = (0.5, 0.8, 0.9)


def run_battery(
    base_seed: int = 0,
    instances: int = 100,
    tolerance_scale: float = 1.0,
    only: str | None = None,
) -> VerificationReport:
    """Run every check over ``instances`` seeded instances.

    Each named check reports the worst deviation observed across instances.
    ``tolerance_scale`` rescales every tolerance (0 makes any nonzero
    deviation fail, a deliberate self-test of the harness). ``only``
    restricts the battery to a single named check.
    """
    if only is not None and only not in CHECK_NAMES:
        raise ValueError(f"unknown check {only!r}, expected one of {CHECK_NAMES}")
    worst: dict[str, CheckResult] = {}

    def record(result: CheckResult) -> None:
        kept = worst.get(result.name)
        if kept is None or result.deviation > kept.deviation:
            worst[result.name] = result

    for i in range(instances):
        seed = base_seed + i
        n = 8 + (i % 25)  # orders 8..32
        beta = _BETAS[i % len(_BETAS)]
        if only in (None, "closed_form_convergence"):
            record(check_closed_form_convergence(seed, n=n, beta=beta))
        if only in (None, "distance_optimality"):
            record(check_distance_optimality(seed, n=n, beta=beta))
        if only in (None, "specializations"):
            record(check_specializations(seed, n=n, max_layers=4))
        if only in (None, "inverse_roundtrip"):
            record(check_inverse_roundtrip(seed, n=n, beta=beta))
        if only in (None, "sparsification_oracle"):
            record(check_sparsification_oracle(seed))
    results = []
    for name in CHECK_NAMES:
        if name in worst:
            result = worst[name]
            result.tolerance *= tolerance_scale
            results.append(result)
    return VerificationReport(results=results)
