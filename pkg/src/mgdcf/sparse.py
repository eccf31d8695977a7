"""Sparse matrix kernels shared by every graph component.

All sparse matrices in this package are ``scipy.sparse.csr_matrix`` instances
in canonical form: float64 weights, sorted and deduplicated column indices,
no stored zeros, every weight finite. ``canonicalize`` establishes that form
and the constructors here always return it. Dense operands are plain float64
``numpy.ndarray`` buffers in row-major order.

Determinism matters more than raw speed here: CSR products accumulate each
output row over stored entries in ascending column order, so repeated runs of
the same build are bit-identical.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError

__all__ = [
    "canonicalize",
    "from_entries",
    "identity",
    "to_entries",
    "spmm",
    "transpose",
    "hadamard_sqrt",
    "row_normalize",
    "sym_normalize",
    "max_abs_asymmetry",
    "write_triples",
]


def canonicalize(matrix: sp.spmatrix) -> sp.csr_matrix:
    """Return ``matrix`` as a canonical float64 CSR matrix.

    Duplicate coordinates are summed, indices sorted, stored zeros dropped.
    Raises ``ValueError`` if any weight is not finite.
    """
    out = sp.csr_matrix(matrix, dtype=np.float64, copy=True)
    out.sum_duplicates()
    out.sort_indices()
    out.eliminate_zeros()
    if out.nnz and not np.isfinite(out.data).all():
        raise ValueError("sparse matrix contains non-finite weights")
    return out


def from_entries(
    num_rows: int,
    num_cols: int,
    rows: np.ndarray,
    cols: np.ndarray,
    weights: np.ndarray | float = 1.0,
) -> sp.csr_matrix:
    """Build a canonical CSR matrix from coordinate entries.

    ``weights`` may be a scalar applied to every entry. Duplicate coordinates
    are summed. Out-of-range indices raise ``ValueError``.
    """
    rows = np.asarray(rows, dtype=np.int64).ravel()
    cols = np.asarray(cols, dtype=np.int64).ravel()
    if rows.shape != cols.shape:
        raise ValueError("rows and cols must have the same length")
    if np.isscalar(weights):
        data = np.full(rows.shape, float(weights), dtype=np.float64)
    else:
        data = np.asarray(weights, dtype=np.float64).ravel()
        if data.shape != rows.shape:
            raise ValueError("weights must match the number of entries")
    if rows.size:
        if rows.min() < 0 or rows.max() >= num_rows:
            raise ValueError("row index out of range")
        if cols.min() < 0 or cols.max() >= num_cols:
            raise ValueError("column index out of range")
    mat = sp.coo_matrix((data, (rows, cols)), shape=(num_rows, num_cols))
    return canonicalize(mat)


def identity(n: int) -> sp.csr_matrix:
    return sp.identity(n, dtype=np.float64, format="csr")


def to_entries(matrix: sp.csr_matrix) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (rows, cols, weights) in row-major, ascending-column order."""
    coo = canonicalize(matrix).tocoo()
    return coo.row.astype(np.int64), coo.col.astype(np.int64), coo.data


def spmm(matrix: sp.csr_matrix, dense: np.ndarray) -> np.ndarray:
    """Sparse @ dense product with a fixed per-row accumulation order.

    ``dense`` must be 2-D with as many rows as ``matrix`` has columns.
    """
    dense = np.asarray(dense, dtype=np.float64)
    if dense.ndim != 2:
        raise ConfigurationError("spmm expects a 2-D dense operand")
    if matrix.shape[1] != dense.shape[0]:
        raise ConfigurationError(
            f"dimension mismatch: sparse {matrix.shape} @ dense {dense.shape}"
        )
    return matrix.dot(dense)


def transpose(matrix: sp.csr_matrix) -> sp.csr_matrix:
    return canonicalize(matrix.transpose())


def hadamard_sqrt(a: sp.csr_matrix, b: sp.csr_matrix) -> sp.csr_matrix:
    """Entrywise sqrt(a_ij * b_ij) over the common support of ``a`` and ``b``.

    Entries exist only where both inputs store an entry. Negative weights in
    either input are a domain error.
    """
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if (a.nnz and a.data.min() < 0) or (b.nnz and b.data.min() < 0):
        raise ValueError("hadamard_sqrt requires non-negative weights")
    prod = canonicalize(a.multiply(b))
    prod.data = np.sqrt(prod.data)
    return prod


def _row_indices(matrix: sp.csr_matrix) -> np.ndarray:
    return np.repeat(
        np.arange(matrix.shape[0], dtype=np.int64), np.diff(matrix.indptr)
    )


def row_normalize(matrix: sp.csr_matrix) -> sp.csr_matrix:
    """Scale each row to sum to 1. Rows without entries stay empty."""
    out = canonicalize(matrix)
    if out.nnz and out.data.min() < 0:
        raise ValueError("row_normalize requires non-negative weights")
    sums = np.asarray(out.sum(axis=1)).ravel()
    inv = np.divide(1.0, sums, out=np.zeros_like(sums), where=sums > 0)
    out.data = out.data * inv[_row_indices(out)]
    return out


def sym_normalize(adjacency: sp.csr_matrix, add_self_loops: bool = True) -> sp.csr_matrix:
    """Symmetric degree normalization D^-1/2 (A [+ I]) D^-1/2.

    With self-loops on, isolated vertices come out with a unit diagonal entry.
    The row/column scale factors are multiplied together before touching the
    weight, so a symmetric input yields a bit-symmetric output.
    """
    n, m = adjacency.shape
    if n != m:
        raise ValueError("sym_normalize expects a square matrix")
    base = canonicalize(adjacency)
    if base.nnz and base.data.min() < 0:
        raise ValueError("sym_normalize requires non-negative weights")
    if add_self_loops:
        base = canonicalize(base + identity(n))
    degrees = np.asarray(base.sum(axis=1)).ravel()
    inv_sqrt = np.divide(
        1.0, np.sqrt(degrees), out=np.zeros_like(degrees), where=degrees > 0
    )
    rows = _row_indices(base)
    base.data = base.data * (inv_sqrt[rows] * inv_sqrt[base.indices])
    return base


def max_abs_asymmetry(matrix: sp.csr_matrix) -> float:
    """Largest absolute difference between the matrix and its transpose."""
    if matrix.shape[0] != matrix.shape[1]:
        raise ValueError("asymmetry is defined for square matrices only")
    diff = (matrix - matrix.transpose()).tocoo()
    return float(np.abs(diff.data).max()) if diff.nnz else 0.0


def write_triples(matrix: sp.csr_matrix, path) -> None:
    """Write entries as tab-separated ``row  col  weight`` lines."""
    rows, cols, weights = to_entries(matrix)
    with open(path, "w", encoding="ascii") as fh:
        for r, c, w in zip(rows, cols, weights):
            fh.write(f"{r}\t{c}\t{float(w)!r}\n")
