"""Contrastive training loop, Adam updates, checkpoints and ablation runs."""

from __future__ import annotations

import copy
import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import nn
from .augment import AugmentConfig, make_views
from .contrastive import TripletBatch, batch_loss, sample_derangement
from .dataset import (
    Dataset,
    SplitConfig,
    StandardizationStats,
    fit_standardizer,
    split,
    standardize_dataset,
)
from .inference import Prototypes, build_prototypes, predict_labels, score_batch
from .metrics import MetricsReport, evaluate, roc_auc
from .model import ModelDims, ModelParams, encode, forward_views, backward_views, init_params

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = "phishssl-checkpoint/1"

ABLATIONS = {
    "full": {},
    "no_attention": {"attention_enabled": False},
    "no_traditional_aug": {"augment": {"enable_traditional": False}},
    "no_dropout_aug": {"augment": {"enable_dropout_views": False}},
}


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 128
    learning_rate: float = 1e-3
    epochs: int = 20
    margin: float = 1.0
    seed: int = 0
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    attention_enabled: bool = True
    shared_attention: bool = True
    residual_beta: float = 1.0
    learn_residual_beta: bool = False
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    att_dim: int = 64
    hidden1: int = 256
    hidden2: int = 128
    embed_dim: int = 128
    inference_mode: str = "euclidean"
    threshold: float = 0.5
    margin_sweep: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.margin <= 0:
            raise ValueError("margin must be positive")
        object.__setattr__(self, "margin_sweep", tuple(self.margin_sweep))

    def dims(self, input_dim: int) -> ModelDims:
        return ModelDims(input_dim, self.att_dim, self.hidden1, self.hidden2, self.embed_dim)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["margin_sweep"] = list(self.margin_sweep)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainConfig":
        doc = dict(doc)
        if "augment" in doc:
            doc["augment"] = AugmentConfig.from_dict(doc["augment"])
        return cls(**doc)

    def override(self, changes: dict) -> "TrainConfig":
        changes = dict(changes)
        if "augment" in changes:
            changes["augment"] = replace(self.augment, **changes["augment"])
        return replace(self, **changes)


@dataclass
class OptimizerState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def zeros_like(cls, tensors: dict[str, np.ndarray]) -> "OptimizerState":
        return cls({k: np.zeros_like(t) for k, t in tensors.items()}, {k: np.zeros_like(t) for k, t in tensors.items()})


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: OptimizerState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[dict[str, np.ndarray], OptimizerState]:
    """Bias-corrected Adam update, applied in place. Parameters without a
    gradient entry are left untouched."""
    state.step += 1
    t = state.step
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for name, g in grads.items():
        p = params[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient for {name!r} has shape {g.shape}, expected {p.shape}")
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params, state


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    val_auc: float


@dataclass
class TrainHistory:
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = -1

    @property
    def best_val_auc(self) -> float:
        return max(r.val_auc for r in self.epochs)

    @property
    def losses(self) -> list[float]:
        return [r.loss for r in self.epochs]

    def to_csv(self) -> str:
        lines = ["epoch,loss,val_auc"]
        lines += [f"{r.epoch},{r.loss!r},{r.val_auc!r}" for r in self.epochs]
        return "\n".join(lines) + "\n"


@dataclass
class Checkpoint:
    params: ModelParams
    standardizer: StandardizationStats
    config: TrainConfig
    best_val_auc: float
    best_epoch: int
    prototypes: Prototypes | None = None
    extra: dict = field(default_factory=dict)
    version: str = CHECKPOINT_VERSION

    @property
    def dims(self) -> ModelDims:
        return self.params.dims

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "dims": self.dims.to_dict(),
            "standardizer": self.standardizer.to_dict(),
            "weights": {k: v.tolist() for k, v in self.params.tensors.items()},
            "config": self.config.to_dict(),
            "best_val_auc": self.best_val_auc,
            "best_epoch": self.best_epoch,
            "prototypes": self.prototypes.to_dict() if self.prototypes else None,
            "extra": self.extra,
        }

    def to_json(self) -> str:
        # float repr is the shortest string that round-trips exactly
        return json.dumps(self.to_dict(), separators=(",", ":"), allow_nan=False) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def from_dict(cls, doc: dict) -> "Checkpoint":
        if doc.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unrecognized checkpoint version {doc.get('version')!r}")
        dims = ModelDims(**doc["dims"])
        tensors = {k: np.asarray(v, dtype=np.float64) for k, v in doc["weights"].items()}
        params = ModelParams(dims, tensors)
        stats = StandardizationStats.from_dict(doc["standardizer"])
        if stats.dim != dims.input_dim:
            raise ValueError("standardizer width does not match model input dimension")
        protos = Prototypes.from_dict(doc["prototypes"]) if doc.get("prototypes") else None
        return cls(
            params=params,
            standardizer=stats,
            config=TrainConfig.from_dict(doc["config"]),
            best_val_auc=float(doc["best_val_auc"]),
            best_epoch=int(doc["best_epoch"]),
            prototypes=protos,
            extra=doc.get("extra", {}),
        )

    @classmethod
    def load(cls, path: str | Path) -> "Checkpoint":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def batch_rng(seed: int, epoch: int, batch_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, epoch, batch_index]))


def train_step(
    x: np.ndarray,
    params: ModelParams,
    cfg: TrainConfig,
    rng: np.random.Generator,
):
    """One contrastive step's loss and parameter gradients (no update)."""
    x_anchor, x_positive = make_views(x, cfg.augment, rng)
    p_drop = cfg.augment.effective_dropout
    masks = None
    if p_drop > 0:
        shape = (x.shape[0], params.dims.hidden2)
        masks = [nn.sample_dropout_mask(shape, p_drop, rng), nn.sample_dropout_mask(shape, p_drop, rng)]
    (z_a, z_p), cache = forward_views(
        [x_anchor, x_positive], params, masks, cfg.attention_enabled, cfg.shared_attention
    )
    pi = sample_derangement(x.shape[0], rng)
    loss, g_a, g_p, _ = batch_loss(TripletBatch(z_a, z_p, pi, cfg.margin))
    if not math.isfinite(loss):
        raise TrainingError(f"non-finite loss {loss!r}")
    grads, _ = backward_views([g_a, g_p], cache, params)
    if not cfg.learn_residual_beta:
        del grads["residual_beta"]
    if not cfg.attention_enabled:
        for name in ("att_W1", "att_b1", "att_W2", "att_b2", "residual_beta"):
            grads.pop(name, None)
    return loss, grads


def embed(X: np.ndarray, params: ModelParams, cfg: TrainConfig) -> np.ndarray:
    return encode(X, params, "eval", attention=cfg.attention_enabled)


def validation_auc(params: ModelParams, train_set: Dataset, val_set: Dataset, cfg: TrainConfig) -> tuple[float, Prototypes]:
    protos = build_prototypes(embed(train_set.X, params, cfg), train_set.y, cfg.inference_mode)
    scores = score_batch(embed(val_set.X, params, cfg), protos)
    return roc_auc(scores, val_set.y), protos


def train(
    train_set: Dataset,
    val_set: Dataset,
    cfg: TrainConfig,
    standardizer: StandardizationStats | None = None,
) -> tuple[Checkpoint, TrainHistory]:
    """Train on standardized ``train_set``; keep the best-validation-AUC epoch.

    Labels of ``train_set`` are only read to build prototypes for validation
    scoring, never by the loss.
    """
    if len(train_set) < 2:
        raise TrainingError("training set needs at least 2 rows")
    dims = cfg.dims(train_set.dim)
    if val_set.dim != dims.input_dim:
        raise TrainingError("train and validation widths differ")
    params = init_params(dims, cfg.seed, cfg.residual_beta)
    state = OptimizerState.zeros_like(params.tensors)
    history = TrainHistory()
    X = np.asarray(train_set.X)
    n = X.shape[0]

    best: tuple[float, int, ModelParams, Prototypes] | None = None
    for epoch in range(cfg.epochs):
        order = np.random.default_rng(np.random.SeedSequence([cfg.seed, epoch])).permutation(n)
        losses, sizes = [], []
        for b, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start : start + cfg.batch_size]
            if idx.size < 2:
                continue
            loss, grads = train_step(X[idx], params, cfg, batch_rng(cfg.seed, epoch, b))
            adam_step(params.tensors, grads, state, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps)
            losses.append(loss)
            sizes.append(idx.size)
        if not losses:
            raise TrainingError("no batch of at least 2 rows")
        epoch_loss = float(np.average(losses, weights=sizes))
        auc, protos = validation_auc(params, train_set, val_set, cfg)
        history.epochs.append(EpochRecord(epoch + 1, epoch_loss, auc))
        logger.info("epoch %d loss %.5f val_auc %.4f", epoch + 1, epoch_loss, auc)
        if best is None or auc > best[0]:
            best = (auc, epoch + 1, params.copy(), protos)

    assert best is not None
    auc, best_epoch, best_params, protos = best
    history.best_epoch = best_epoch
    stats = standardizer or StandardizationStats(np.zeros(dims.input_dim), np.ones(dims.input_dim))
    return Checkpoint(best_params, stats, cfg, auc, best_epoch, protos), history


def sweep_margin(
    train_set: Dataset,
    val_set: Dataset,
    cfg: TrainConfig,
    margins=(0.2, 0.5, 1.0, 2.0),
    standardizer: StandardizationStats | None = None,
):
    """Train once per margin and keep the run with the best validation AUC."""
    best = None
    for m in margins:
        ck, hist = train(train_set, val_set, replace(cfg, margin=float(m), margin_sweep=()), standardizer)
        if best is None or ck.best_val_auc > best[0].best_val_auc:
            best = (ck, hist)
    return best


@dataclass
class PreparedData:
    train: Dataset
    val: Dataset
    test: Dataset
    standardizer: StandardizationStats


def prepare(ds: Dataset, split_cfg: SplitConfig, stats: StandardizationStats | None = None) -> PreparedData:
    """Split, then standardize every partition with training-split statistics
    (or with ``stats`` when given, e.g. from a checkpoint)."""
    tr, va, te = split(ds, split_cfg)
    stats = stats or fit_standardizer(tr)
    return PreparedData(
        standardize_dataset(tr, stats), standardize_dataset(va, stats), standardize_dataset(te, stats), stats
    )


def evaluate_checkpoint(ck: Checkpoint, data: PreparedData, mode: str | None = None) -> tuple[MetricsReport, np.ndarray]:
    """Test-split metrics with prototypes rebuilt from the training split."""
    cfg = ck.config
    protos = build_prototypes(embed(data.train.X, ck.params, cfg), data.train.y, mode or cfg.inference_mode)
    z = embed(data.test.X, ck.params, cfg)
    scores = score_batch(z, protos)
    preds = predict_labels(z, protos, cfg.threshold)
    return evaluate(data.test.y, preds, scores), scores


def fit(data: PreparedData, cfg: TrainConfig) -> tuple[Checkpoint, TrainHistory]:
    if cfg.margin_sweep:
        return sweep_margin(data.train, data.val, cfg, cfg.margin_sweep, data.standardizer)
    return train(data.train, data.val, cfg, data.standardizer)


def run_ablation(data: PreparedData, base_cfg: TrainConfig) -> list[dict]:
    """Four runs differing only in one switch each; rows carry all five metrics."""
    rows = []
    for name, changes in ABLATIONS.items():
        cfg = base_cfg.override(copy.deepcopy(changes))
        ck, _ = fit(data, cfg)
        report, _ = evaluate_checkpoint(ck, data)
        rows.append(
            {
                "configuration": name,
                "seed": cfg.seed,
                "roc_auc": report.roc_auc,
                "accuracy": report.accuracy,
                "precision": report.precision,
                "recall": report.recall,
                "f1": report.f1,
            }
        )
    return rows
