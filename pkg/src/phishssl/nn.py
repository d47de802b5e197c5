"""Small float64 neural-network kernel with hand-written backward passes.

Every forward function returns ``(output, cache)``; the matching backward
function takes the upstream gradient and that cache. Batches are row-major
``(batch, features)`` arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass
class DenseLayer:
    W: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)

    def __post_init__(self) -> None:
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[0],):
            raise ValueError(f"inconsistent dense shapes W{self.W.shape} b{self.b.shape}")


@dataclass
class LayerNormParams:
    gamma: np.ndarray
    beta_shift: np.ndarray
    epsilon: float = 1e-5

    def __post_init__(self) -> None:
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


@dataclass
class DropoutMask:
    keep_prob: float
    mask: np.ndarray

    def __post_init__(self) -> None:
        if not 0.0 < self.keep_prob <= 1.0:
            raise ValueError("keep_prob must lie in (0, 1]")

    @property
    def scale(self) -> float:
        return 1.0 / self.keep_prob


def dense_forward(x: np.ndarray, W: np.ndarray, b: np.ndarray):
    if x.shape[-1] != W.shape[1]:
        raise ValueError(f"dense input has {x.shape[-1]} columns, layer expects {W.shape[1]}")
    return x @ W.T + b, (x, W)


def dense_backward(grad_out: np.ndarray, cache):
    """Returns ``(grad_x, grad_W, grad_b)``."""
    x, W = cache
    return grad_out @ W, grad_out.T @ x, grad_out.sum(axis=0)


def relu_forward(x: np.ndarray):
    return np.maximum(x, 0.0), x


def relu_backward(grad_out: np.ndarray, x: np.ndarray) -> np.ndarray:
    return grad_out * (x > 0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    # exp(x) / (1 + exp(x)) never overflows for negative x
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_forward(x: np.ndarray):
    s = sigmoid(x)
    return s, s


def sigmoid_backward(grad_out: np.ndarray, s: np.ndarray) -> np.ndarray:
    return grad_out * s * (1.0 - s)


def layer_norm_forward(x: np.ndarray, gamma: np.ndarray, beta_shift: np.ndarray, eps: float = 1e-5):
    if x.shape[-1] != gamma.shape[0]:
        raise ValueError("layer norm width mismatch")
    mu = x.mean(axis=1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv_std
    return gamma * xhat + beta_shift, (xhat, inv_std, gamma)


def layer_norm_backward(grad_out: np.ndarray, cache):
    """Returns ``(grad_x, grad_gamma, grad_beta_shift)``."""
    xhat, inv_std, gamma = cache
    g = grad_out * gamma
    n = xhat.shape[1]
    grad_x = inv_std / n * (
        n * g - g.sum(axis=1, keepdims=True) - xhat * (g * xhat).sum(axis=1, keepdims=True)
    )
    return grad_x, (grad_out * xhat).sum(axis=0), grad_out.sum(axis=0)


def sample_dropout_mask(shape, p_dropout: float, rng: np.random.Generator) -> DropoutMask:
    if not 0.0 <= p_dropout < 1.0:
        raise ValueError("p_dropout must lie in [0, 1)")
    keep = 1.0 - p_dropout
    if p_dropout == 0.0:
        return DropoutMask(keep, np.ones(shape))
    return DropoutMask(keep, (rng.random(shape) < keep).astype(np.float64))


def apply_dropout(x: np.ndarray, mask: DropoutMask | None) -> np.ndarray:
    """Inverted dropout: kept units are scaled by ``1/keep_prob``."""
    if mask is None:
        return x
    return x * mask.mask * mask.scale


def dropout_backward(grad_out: np.ndarray, mask: DropoutMask | None) -> np.ndarray:
    if mask is None:
        return grad_out
    return grad_out * mask.mask * mask.scale


def l2_normalize_forward(x: np.ndarray):
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ValueError("cannot L2-normalize a zero-norm row")
    z = x / norms
    return z, (z, norms)


def l2_normalize_backward(grad_out: np.ndarray, cache) -> np.ndarray:
    # Jacobian (I - z z^T) / ||x||
    z, norms = cache
    return (grad_out - z * (grad_out * z).sum(axis=1, keepdims=True)) / norms


def numerical_gradient(f: Callable[[np.ndarray], float], point: np.ndarray, h: float = 1e-5) -> np.ndarray:
    point = np.array(point, dtype=np.float64)
    grad = np.zeros_like(point)
    flat, gflat = point.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(point)
        flat[i] = orig - h
        fm = f(point)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    """Max elementwise ``|a - n| / max(|a|, |n|, floor)``.

    ``floor`` keeps entries that are zero on both sides from dividing by zero.
    """
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    if analytic.size == 0:
        return 0.0
    return float(np.max(np.abs(analytic - numeric) / denom))


def grad_check(
    function: Callable[[np.ndarray], tuple[float, np.ndarray]],
    point: np.ndarray,
    h: float = 1e-5,
) -> float:
    """Compare ``function``'s analytic gradient with central differences.

    ``function(p)`` must return ``(value, gradient)``. Returns the max
    relative error over all coordinates of ``point``.
    """
    point = np.array(point, dtype=np.float64)
    _, analytic = function(point.copy())
    numeric = numerical_gradient(lambda p: function(p)[0], point, h)
    return relative_error(analytic, numeric)
