"""Nearest-prototype classification of embeddings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import LEGITIMATE, PHISHING
from .nn import sigmoid

MODES = ("euclidean", "cosine")


@dataclass(frozen=True)
class Prototypes:
    mu_legitimate: np.ndarray
    mu_phishing: np.ndarray
    count_legitimate: int
    count_phishing: int
    mode: str = "euclidean"

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if min(self.count_legitimate, self.count_phishing) < 1:
            raise ValueError("each class needs at least one reference embedding")
        for mu in (self.mu_legitimate, self.mu_phishing):
            if not np.all(np.isfinite(mu)):
                raise ValueError("prototype contains non-finite values")

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "mu_legitimate": self.mu_legitimate.tolist(),
            "mu_phishing": self.mu_phishing.tolist(),
            "count_legitimate": self.count_legitimate,
            "count_phishing": self.count_phishing,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Prototypes":
        return cls(
            np.asarray(doc["mu_legitimate"], dtype=np.float64),
            np.asarray(doc["mu_phishing"], dtype=np.float64),
            int(doc["count_legitimate"]),
            int(doc["count_phishing"]),
            doc.get("mode", "euclidean"),
        )

    def with_mode(self, mode: str) -> "Prototypes":
        return Prototypes(self.mu_legitimate, self.mu_phishing, self.count_legitimate, self.count_phishing, mode)


@dataclass(frozen=True)
class Prediction:
    label: int
    prob_phishing: float
    legitimate: float  # distance (euclidean) or similarity (cosine)
    phishing: float


def build_prototypes(embeddings: np.ndarray, labels, mode: str = "euclidean", atol: float = 1e-12) -> Prototypes:
    """Class-mean embeddings (left off the sphere on purpose)."""
    z = np.asarray(embeddings, dtype=np.float64)
    y = np.asarray(labels)
    if z.shape[0] != y.shape[0]:
        raise ValueError("embeddings and labels differ in length")
    mus = {}
    for cls in (LEGITIMATE, PHISHING):
        members = z[y == cls]
        if members.shape[0] == 0:
            raise ValueError(f"no reference embeddings for class {cls}")
        mu = members.mean(axis=0)
        if np.linalg.norm(mu) <= atol:
            raise ValueError(f"class {cls} prototype is degenerate (zero vector)")
        mus[cls] = mu
    return Prototypes(
        mus[LEGITIMATE], mus[PHISHING],
        int(np.sum(y == LEGITIMATE)), int(np.sum(y == PHISHING)), mode,
    )  # fmt: skip


def class_scores(z: np.ndarray, p: Prototypes) -> tuple[np.ndarray, np.ndarray]:
    """Per-class distances (euclidean) or cosine similarities for each row of ``z``."""
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    if p.mode == "euclidean":
        return (np.linalg.norm(z - p.mu_legitimate, axis=1), np.linalg.norm(z - p.mu_phishing, axis=1))
    out = []
    zn = np.linalg.norm(z, axis=1)
    for mu in (p.mu_legitimate, p.mu_phishing):
        mn = np.linalg.norm(mu)
        if mn == 0:
            raise ValueError("zero-norm prototype")
        out.append(z @ mu / (zn * mn))
    return out[0], out[1]


def score_batch(z: np.ndarray, p: Prototypes) -> np.ndarray:
    """Phishing probability per row, used directly as the ROC score.

    Euclidean: softmax over negative distances, i.e. ``sigmoid(d_legit - d_phish)``.
    Cosine: ``sigmoid(s_phish)``.
    """
    a, b = class_scores(z, p)
    if p.mode == "euclidean":
        return sigmoid(a - b)
    return sigmoid(b)


def predict_labels(z: np.ndarray, p: Prototypes, threshold: float = 0.5) -> np.ndarray:
    a, b = class_scores(z, p)
    if p.mode == "euclidean":
        return (sigmoid(a - b) >= threshold).astype(np.int64)
    # cosine sigmoid scores are not normalized across classes, so compare them
    return (sigmoid(b) >= sigmoid(a)).astype(np.int64)


def classify(z: np.ndarray, p: Prototypes, threshold: float = 0.5) -> Prediction:
    z = np.asarray(z, dtype=np.float64)
    a, b = class_scores(z[None, :], p)
    prob = float(score_batch(z[None, :], p)[0])
    label = int(predict_labels(z[None, :], p, threshold)[0])
    return Prediction(label, prob, float(a[0]), float(b[0]))
