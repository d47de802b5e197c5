"""Triplet margin loss over in-batch negatives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TripletBatch:
    z_anchor: np.ndarray
    z_positive: np.ndarray
    pi: np.ndarray
    margin: float = 1.0

    @property
    def z_negative(self) -> np.ndarray:
        return self.z_positive[self.pi]


def sample_derangement(n: int, rng: np.random.Generator) -> np.ndarray:
    """Fixed-point-free permutation ``i -> (i + k) mod n`` with random ``k`` in 1..n-1."""
    if n < 2:
        raise ValueError("a derangement needs n >= 2")
    k = int(rng.integers(1, n))
    return (np.arange(n) + k) % n


def _unit_diff(u: np.ndarray, v: np.ndarray):
    diff = u - v
    dist = np.linalg.norm(diff, axis=-1)
    safe = np.where(dist > 0, dist, 1.0)
    # coincident points: gradient convention 0
    direction = np.where((dist > 0)[..., None], diff / safe[..., None], 0.0)
    return dist, direction


def triplet_loss(z_a: np.ndarray, z_p: np.ndarray, z_n: np.ndarray, margin: float = 1.0):
    """Single (or row-wise) ``max(0, |a - p| - |a - n| + m)``.

    Returns ``(loss, grad_a, grad_p, grad_n)``; inactive hinges and the kink
    itself get zero gradient.
    """
    if margin <= 0:
        raise ValueError("margin must be positive")
    z_a, z_p, z_n = (np.asarray(z, dtype=np.float64) for z in (z_a, z_p, z_n))
    d_ap, u_ap = _unit_diff(z_a, z_p)
    d_an, u_an = _unit_diff(z_a, z_n)
    raw = d_ap - d_an + margin
    loss = np.maximum(raw, 0.0)
    active = (raw > 0)[..., None]
    grad_a = np.where(active, u_ap - u_an, 0.0)
    grad_p = np.where(active, -u_ap, 0.0)
    grad_n = np.where(active, u_an, 0.0)
    return loss, grad_a, grad_p, grad_n


def batch_loss(batch: TripletBatch):
    """Mean triplet loss and gradients w.r.t. ``z_anchor`` and ``z_positive``.

    The negative gradient is scattered back onto the positives it was taken
    from, so the caller only has two embedding matrices to backpropagate.
    """
    n = batch.z_anchor.shape[0]
    if n < 2:
        raise ValueError("batch_loss needs at least 2 triplets")
    losses, g_a, g_p, g_n = triplet_loss(batch.z_anchor, batch.z_positive, batch.z_negative, batch.margin)
    g_p = g_p.copy()
    np.add.at(g_p, batch.pi, g_n)
    return float(losses.mean()), g_a / n, g_p / n, losses
