"""Positive-view generation for tabular rows (blend mixing, noise, corruption)."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class AugmentConfig:
    cutmix_alpha: float = 0.2
    cutmix_prob: float = 0.5
    noise_sigma: float = 0.05
    noise_prob: float = 0.5
    corrupt_p: float = 0.1
    corrupt_prob: float = 0.5
    dropout_p: float = 0.1
    enable_traditional: bool = True
    enable_dropout_views: bool = True
    augment_anchor: bool = False

    def __post_init__(self) -> None:
        for name in ("cutmix_prob", "noise_prob", "corrupt_p", "corrupt_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError("dropout_p must lie in [0, 1)")
        if self.cutmix_alpha <= 0:
            raise ValueError("cutmix_alpha must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")

    @property
    def effective_dropout(self) -> float:
        """Encoder dropout rate used during training."""
        return self.dropout_p if self.enable_dropout_views else 0.0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "AugmentConfig":
        return cls(**doc)


def cutmix(x: np.ndarray, x_j: np.ndarray, lam: float) -> np.ndarray:
    """Convex blend ``lam * x + (1 - lam) * x_j``."""
    x = np.asarray(x, dtype=np.float64)
    x_j = np.asarray(x_j, dtype=np.float64)
    if x.shape != x_j.shape:
        raise ValueError(f"cannot blend shapes {x.shape} and {x_j.shape}")
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    return lam * x + (1.0 - lam) * x_j


def sample_lambda(alpha: float, rng: np.random.Generator, size=None):
    # folded so the original row always carries at least half the weight
    lam = rng.beta(alpha, alpha, size=size)
    return np.maximum(lam, 1.0 - lam)


def gaussian_noise(x: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    x = np.asarray(x, dtype=np.float64)
    if sigma == 0:
        return x.copy()
    return x + rng.normal(0.0, sigma, size=x.shape)


def corrupt(x: np.ndarray, p_corrupt: float, donor_batch: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Replace each coordinate with probability ``p_corrupt`` by the same
    coordinate of a uniformly drawn donor row (empirical-marginal resampling).

    ``x`` may be one row or a batch of rows.
    """
    if not 0.0 <= p_corrupt <= 1.0:
        raise ValueError("p_corrupt must lie in [0, 1]")
    donors = np.asarray(donor_batch, dtype=np.float64)
    if donors.ndim != 2 or donors.shape[0] == 0:
        raise ValueError("donor_batch must be a non-empty 2-D array")
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    rows = np.atleast_2d(x)
    if rows.shape[1] != donors.shape[1]:
        raise ValueError("donor rows and x differ in width")
    replace = rng.random(rows.shape) < p_corrupt
    donor_idx = rng.integers(0, donors.shape[0], size=rows.shape)
    out = np.where(replace, donors[donor_idx, np.arange(rows.shape[1])], rows)
    return out[0] if single else out


def _augment_rows(batch: np.ndarray, cfg: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    n = batch.shape[0]
    out = batch.copy()

    use = rng.random(n) < cfg.cutmix_prob
    lam = sample_lambda(cfg.cutmix_alpha, rng, size=n)
    partner = (np.arange(n) + rng.integers(1, n, size=n)) % n
    mixed = lam[:, None] * out + (1.0 - lam[:, None]) * batch[partner]
    out = np.where(use[:, None], mixed, out)

    use = rng.random(n) < cfg.noise_prob
    noisy = gaussian_noise(out, cfg.noise_sigma, rng)
    out = np.where(use[:, None], noisy, out)

    use = rng.random(n) < cfg.corrupt_prob
    corrupted = corrupt(out, cfg.corrupt_p, batch, rng)
    return np.where(use[:, None], corrupted, out)


def make_views(batch: np.ndarray, cfg: AugmentConfig, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(x_anchor, x_positive)`` for a batch of standardized rows.

    The positive runs blend -> noise -> corruption, each stage switched on
    per row with its own probability. Anchors stay clean unless
    ``cfg.augment_anchor``. Dropout-mask diversity is added later by the
    encoder, not here.
    """
    batch = np.asarray(batch, dtype=np.float64)
    if not cfg.enable_traditional:
        return batch.copy(), batch.copy()
    if batch.shape[0] < 2:
        raise ValueError("view generation needs at least 2 rows for mixing partners")
    anchor = _augment_rows(batch, cfg, rng) if cfg.augment_anchor else batch.copy()
    return anchor, _augment_rows(batch, cfg, rng)
