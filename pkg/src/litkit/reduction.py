"""Deterministic low-dimensional projection for clustering.

Rows are centered and projected onto the top principal directions of the
covariance (eigendecomposition, descending eigenvalue order). The sign of each
direction is fixed so its largest-magnitude loading is positive, making the
output reproducible bit for bit. ``seed`` is accepted for interface parity
with stochastic reducers that can be swapped in; this projection ignores it.
"""
from __future__ import annotations

import logging

import numpy as np

from .embeddings import EmbeddingMatrix

log = logging.getLogger(__name__)


class DegenerateInput(Warning):
    """Input rank below target_dim; missing directions are zero-padded."""


def project_principal(x: np.ndarray, target_dim: int) -> np.ndarray:
    """Center x (n x d) and project onto its top target_dim principal axes."""
    x = np.asarray(x, dtype=np.float64)
    n, d = x.shape
    if target_dim >= d:
        raise ValueError(f"target_dim {target_dim} must be < input dim {d}")
    if n < target_dim:
        raise ValueError(f"need at least target_dim={target_dim} rows, got {n}")
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / max(n - 1, 1)
    eigvals, eigvecs = np.linalg.eigh(cov)  # ascending
    order = np.argsort(eigvals)[::-1][:target_dim]
    components = eigvecs[:, order]
    # sign convention: largest-|loading| coordinate of each axis is positive
    for j in range(components.shape[1]):
        pivot = np.argmax(np.abs(components[:, j]))
        if components[pivot, j] < 0:
            components[:, j] = -components[:, j]
    projected = centered @ components

    top_vals = eigvals[order]
    tol = max(eigvals.max(), 0.0) * 1e-12
    rank_deficient = top_vals <= tol
    if rank_deficient.any():
        log.warning(
            "input rank %d below target_dim %d; zero-padding %d columns",
            int((~rank_deficient).sum()), target_dim, int(rank_deficient.sum()),
        )
        projected[:, rank_deficient] = 0.0
    return projected


def reduce_dimensions(emb: EmbeddingMatrix, target_dim: int, seed: int = 0) -> EmbeddingMatrix:
    del seed  # deterministic projection; kept for swappable-reducer parity
    return EmbeddingMatrix(list(emb.ids), project_principal(emb.vectors, target_dim), emb.kind)
