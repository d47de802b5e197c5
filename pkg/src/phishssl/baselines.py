"""Unsupervised comparison models: Lloyd K-Means and a reconstruction autoencoder."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .dataset import LEGITIMATE, PHISHING
from .metrics import confusion, prf1
from .train import OptimizerState, adam_step

logger = logging.getLogger(__name__)


@dataclass
class KMeansModel:
    k: int
    centroids: np.ndarray
    seed: int = 0
    cluster_to_class: dict[int, int] = field(default_factory=dict)
    inertia_history: list[float] = field(default_factory=list)
    n_iter: int = 0


def _sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


def assign(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # argmin picks the lowest index on ties
    return np.argmin(_sq_dists(np.atleast_2d(X), centroids), axis=1)


def kmeans_fit(X: np.ndarray, k: int = 2, seed: int = 0, max_iter: int = 300) -> KMeansModel:
    """Lloyd iterations from ``k`` seeded distinct rows until assignments stop changing.

    An empty cluster is re-seeded with the point farthest from its centroid.
    ``inertia_history[i]`` is the inertia after the i-th update step.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if n < k or k < 1:
        raise ValueError(f"need at least k={k} rows, got {n}")
    rng = np.random.default_rng(seed)
    uniq = np.unique(X, axis=0)
    if uniq.shape[0] < k:
        raise ValueError("fewer distinct rows than clusters")
    centroids = uniq[rng.choice(uniq.shape[0], size=k, replace=False)].copy()

    labels = None
    history = []
    it = 0
    for it in range(1, max_iter + 1):
        d = _sq_dists(X, centroids)
        new_labels = np.argmin(d, axis=1)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(k):
            members = labels == c
            if members.any():
                centroids[c] = X[members].mean(axis=0)
            else:
                far = int(np.argmax(d[np.arange(n), labels]))
                centroids[c] = X[far]
                labels[far] = c
        history.append(float(_sq_dists(X, centroids)[np.arange(n), labels].sum()))
    return KMeansModel(k, centroids, seed, {}, history, it)


def kmeans_map_clusters(model: KMeansModel, X_ref: np.ndarray, y_ref) -> KMeansModel:
    """Label each cluster with the majority class of its reference members.

    A cluster no reference row falls into stays unmapped.
    """
    y_ref = np.asarray(y_ref)
    labels = assign(X_ref, model.centroids)
    mapping = {}
    for c in range(model.k):
        members = y_ref[labels == c]
        if members.size:
            mapping[c] = PHISHING if members.mean() > 0.5 else LEGITIMATE
    model.cluster_to_class = mapping
    return model


def kmeans_classify(x: np.ndarray, model: KMeansModel) -> np.ndarray:
    clusters = assign(x, model.centroids)
    try:
        return np.array([model.cluster_to_class[int(c)] for c in clusters], dtype=np.int64)
    except KeyError as err:
        raise ValueError(f"cluster {err.args[0]} has no class mapping") from None


def kmeans_scores(x: np.ndarray, model: KMeansModel) -> np.ndarray:
    """Continuous phishing score for ROC: distance to nearest legitimate-mapped
    centroid minus distance to nearest phishing-mapped centroid."""
    d = np.sqrt(_sq_dists(np.atleast_2d(x), model.centroids))
    phish = [c for c, cls in model.cluster_to_class.items() if cls == PHISHING]
    legit = [c for c, cls in model.cluster_to_class.items() if cls == LEGITIMATE]
    if not phish or not legit:
        # one-sided mapping: fall back to the (degenerate) hard labels
        return kmeans_classify(x, model).astype(np.float64)
    return d[:, legit].min(axis=1) - d[:, phish].min(axis=1)


@dataclass
class AutoencoderModel:
    layers: list[nn.DenseLayer]
    threshold: float | None = None
    loss_history: list[float] = field(default_factory=list)

    @property
    def sizes(self) -> list[int]:
        return [self.layers[0].W.shape[1]] + [layer.W.shape[0] for layer in self.layers]


def autoencoder_init(input_dim: int, hidden: tuple[int, ...] = (64, 16), seed: int = 0) -> AutoencoderModel:
    sizes = [input_dim, *hidden, *reversed(hidden[:-1]), input_dim]
    rng = np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        layers.append(nn.DenseLayer(rng.normal(0.0, math.sqrt(2.0 / fan_in), (fan_out, fan_in)), np.zeros(fan_out)))
    return AutoencoderModel(layers)


def autoencoder_forward(x: np.ndarray, model: AutoencoderModel):
    caches = []
    h = x
    last = len(model.layers) - 1
    for i, layer in enumerate(model.layers):
        h, c = nn.dense_forward(h, layer.W, layer.b)
        r = None
        if i < last:
            h, r = nn.relu_forward(h)
        caches.append((c, r))
    return h, caches


def autoencoder_loss_and_grads(x: np.ndarray, model: AutoencoderModel):
    """Mean over rows of per-row mean squared reconstruction error, with gradients."""
    out, caches = autoencoder_forward(x, model)
    diff = out - x
    loss = float((diff * diff).mean())
    g = 2.0 * diff / diff.size
    grads = []
    for (c, r) in reversed(caches):
        if r is not None:
            g = nn.relu_backward(g, r)
        g, gW, gb = nn.dense_backward(g, c)
        grads.append((gW, gb))
    return loss, list(reversed(grads))


def autoencoder_train(
    X: np.ndarray,
    epochs: int = 20,
    lr: float = 1e-3,
    batch_size: int = 128,
    seed: int = 0,
    hidden: tuple[int, ...] = (64, 16),
) -> AutoencoderModel:
    """Minibatch Adam on mean squared reconstruction error."""
    X = np.asarray(X, dtype=np.float64)
    model = autoencoder_init(X.shape[1], hidden, seed)
    tensors = {}
    for i, layer in enumerate(model.layers):
        tensors[f"W{i}"] = layer.W
        tensors[f"b{i}"] = layer.b
    state = OptimizerState.zeros_like(tensors)
    for epoch in range(epochs):
        order = np.random.default_rng(np.random.SeedSequence([seed, epoch])).permutation(X.shape[0])
        total = 0.0
        for start in range(0, X.shape[0], batch_size):
            batch = X[order[start : start + batch_size]]
            loss, grads = autoencoder_loss_and_grads(batch, model)
            if not math.isfinite(loss):
                raise RuntimeError(f"non-finite autoencoder loss at epoch {epoch + 1}")
            total += loss * batch.shape[0]
            named = {}
            for i, (gW, gb) in enumerate(grads):
                named[f"W{i}"], named[f"b{i}"] = gW, gb
            adam_step(tensors, named, state, lr)
        model.loss_history.append(total / X.shape[0])
        logger.debug("autoencoder epoch %d loss %.6f", epoch + 1, model.loss_history[-1])
    return model


def reconstruction_score(x: np.ndarray, model: AutoencoderModel) -> np.ndarray:
    """Per-row mean squared reconstruction error (higher = more anomalous)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    out, _ = autoencoder_forward(x, model)
    return ((out - x) ** 2).mean(axis=1)


def best_f1_threshold(scores: np.ndarray, labels) -> float:
    """Threshold (predict phishing when score >= t) maximizing F1 on a labeled set."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    best_t, best_f1 = float(scores.max()), -1.0
    for t in np.unique(scores):
        f1 = prf1(confusion(labels, (scores >= t).astype(np.int64)))[3]
        if f1 > best_f1:
            best_t, best_f1 = float(t), f1
    return best_t


def autoencoder_classify(x: np.ndarray, model: AutoencoderModel) -> np.ndarray:
    if model.threshold is None:
        raise ValueError("autoencoder threshold has not been calibrated")
    return (reconstruction_score(x, model) >= model.threshold).astype(np.int64)


def evaluate_kmeans(train_X, train_y, test_X, test_y, k: int = 2, seed: int = 0):
    """Fit on training rows, map clusters with training labels, score the test rows."""
    from .metrics import evaluate

    model = kmeans_map_clusters(kmeans_fit(train_X, k, seed), train_X, train_y)
    scores = kmeans_scores(test_X, model)
    return evaluate(test_y, kmeans_classify(test_X, model), scores), scores, model


def evaluate_autoencoder(
    train_X, train_y, val_X, val_y, test_X, test_y,
    epochs: int = 20, lr: float = 1e-3, batch_size: int = 128, seed: int = 0,
    hidden: tuple[int, ...] = (64, 16), fit_on: str = "legitimate",
):  # fmt: skip
    """Reconstruction-error detector; the hard-label threshold is the
    validation-optimal F1 cut."""
    from .metrics import evaluate

    X = np.asarray(train_X)
    if fit_on == "legitimate":
        X = X[np.asarray(train_y) == LEGITIMATE]
    model = autoencoder_train(X, epochs, lr, batch_size, seed, hidden)
    model.threshold = best_f1_threshold(reconstruction_score(val_X, model), val_y)
    scores = reconstruction_score(test_X, model)
    return evaluate(test_y, autoencoder_classify(test_X, model), scores), scores, model
