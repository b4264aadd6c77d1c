"""Turning estimates into ranks.

Rank 1 is the largest estimate. Ties go to the lower index, so that

    rank[j] = 1 + #{k : t[k] > t[j]} + #{k < j : t[k] == t[j]}

which is always a permutation of 1..p and is reproducible.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError


def rank_rows(theta: np.ndarray) -> np.ndarray:
    """Rank every row of a ``(B, p)`` array independently (int64, 1-based)."""
    theta = np.asarray(theta, dtype=np.float64)
    # stable sort of -theta: larger first, equal values keep index order
    order = np.argsort(-theta, axis=-1, kind="stable")
    ranks = np.empty(theta.shape, dtype=np.int64)
    positions = np.broadcast_to(np.arange(1, theta.shape[-1] + 1), theta.shape)
    np.put_along_axis(ranks, order, positions, axis=-1)
    return ranks


def rank_estimates(theta_hat) -> np.ndarray:
    theta = np.asarray(theta_hat, dtype=np.float64)
    if theta.ndim != 1 or theta.size < 2:
        raise ValidationError(f"need a vector of at least 2 estimates, got shape {theta.shape}")
    if not np.all(np.isfinite(theta)):
        raise ValidationError("estimates must be finite")
    return rank_rows(theta)
