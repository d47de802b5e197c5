"""CSV ingestion, deterministic splitting and z-score standardization."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

LEGITIMATE = 0
PHISHING = 1


class DatasetError(ValueError):
    """Raised for malformed dataset files, schemas or split requests."""


@dataclass(frozen=True)
class DatasetSchema:
    label_column: str
    positive_label: str
    drop_columns: tuple[str, ...] = ()
    feature_count: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "drop_columns", tuple(self.drop_columns))
        if self.label_column in self.drop_columns:
            raise DatasetError("label column must not appear in drop_columns")

    @classmethod
    def from_dict(cls, doc: dict) -> "DatasetSchema":
        return cls(
            label_column=doc["label_column"],
            positive_label=str(doc["positive_label"]),
            drop_columns=tuple(doc.get("drop_columns", ())),
            feature_count=doc.get("feature_count"),
        )

    @classmethod
    def from_json(cls, path: str | Path) -> "DatasetSchema":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_dict(self) -> dict:
        return {
            "label_column": self.label_column,
            "positive_label": self.positive_label,
            "drop_columns": list(self.drop_columns),
            "feature_count": self.feature_count,
        }


@dataclass(frozen=True)
class Dataset:
    """Feature matrix ``X`` (N x D) with binary labels ``y`` (1 = phishing).

    Arrays are made read-only on construction so a dataset can be shared freely.
    """

    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        X = np.array(self.X, dtype=np.float64)
        y = np.array(self.y, dtype=np.int64)
        if X.ndim != 2:
            raise DatasetError(f"feature matrix must be 2-D, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise DatasetError("labels length must equal number of rows")
        if not np.all(np.isfinite(X)):
            raise DatasetError("feature values must be finite")
        if not np.isin(y, (LEGITIMATE, PHISHING)).all():
            raise DatasetError("labels must be 0 or 1")
        names = tuple(self.feature_names) or tuple(f"f{i}" for i in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise DatasetError("feature_names length must equal feature dimension")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_names", names)

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def subset(self, indices: np.ndarray) -> "Dataset":
        return Dataset(self.X[indices], self.y[indices], self.feature_names)

    def with_features(self, X: np.ndarray) -> "Dataset":
        return Dataset(X, self.y, self.feature_names)


@dataclass(frozen=True)
class StandardizationStats:
    mean: np.ndarray
    scale: np.ndarray

    def __post_init__(self) -> None:
        mean = np.array(self.mean, dtype=np.float64)
        scale = np.array(self.scale, dtype=np.float64)
        if mean.shape != scale.shape or mean.ndim != 1:
            raise DatasetError("mean and scale must be 1-D vectors of equal length")
        if not np.all(scale > 0):
            raise DatasetError("scale entries must be positive")
        mean.setflags(write=False)
        scale.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "scale", scale)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "StandardizationStats":
        return cls(np.asarray(doc["mean"]), np.asarray(doc["scale"]))


@dataclass(frozen=True)
class SplitConfig:
    ratios: tuple[float, float, float] = (0.6, 0.2, 0.2)
    seed: int = 0

    def __post_init__(self) -> None:
        ratios = tuple(float(r) for r in self.ratios)
        if len(ratios) != 3:
            raise DatasetError("ratios must have three entries (train, val, test)")
        if any(r < 0 for r in ratios):
            raise DatasetError("ratios must be non-negative")
        if abs(sum(ratios) - 1.0) > 1e-9:
            raise DatasetError(f"ratios must sum to 1, got {sum(ratios)!r}")
        object.__setattr__(self, "ratios", ratios)


def _parse_float(cell: str, line: int, column: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise DatasetError(
            f"line {line}: non-numeric value {cell!r} in column {column!r}"
        ) from None
    if not math.isfinite(value):
        raise DatasetError(f"line {line}: non-finite value in column {column!r}")
    return value


def load_csv(path: str | Path, schema: DatasetSchema) -> Dataset:
    """Read a headered CSV, mapping ``schema.positive_label`` to phishing.

    Feature columns keep their header order; the label column and
    ``schema.drop_columns`` are excluded.
    """
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"dataset not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DatasetError("no rows")
        header = [h.strip() for h in header]
        if schema.label_column not in header:
            raise DatasetError(f"label column {schema.label_column!r} not in header")
        missing = [c for c in schema.drop_columns if c not in header]
        if missing:
            raise DatasetError(f"drop columns not in header: {missing}")
        label_idx = header.index(schema.label_column)
        excluded = {label_idx} | {header.index(c) for c in schema.drop_columns}
        feature_idx = [i for i in range(len(header)) if i not in excluded]
        names = tuple(header[i] for i in feature_idx)

        rows: list[list[float]] = []
        labels: list[int] = []
        for line, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != len(header):
                raise DatasetError(
                    f"line {line}: expected {len(header)} fields, got {len(record)}"
                )
            rows.append([_parse_float(record[i], line, header[i]) for i in feature_idx])
            raw = record[label_idx].strip()
            labels.append(PHISHING if raw == schema.positive_label else LEGITIMATE)

    if not rows:
        raise DatasetError("no rows")
    if schema.feature_count is not None and len(names) != schema.feature_count:
        raise DatasetError(
            f"expected {schema.feature_count} features, found {len(names)}"
        )
    return Dataset(np.asarray(rows), np.asarray(labels), names)


def split_sizes(n: int, ratios: tuple[float, float, float]) -> tuple[int, int, int]:
    n_train = math.floor(n * ratios[0])
    n_val = math.floor(n * ratios[1])
    return n_train, n_val, n - n_train - n_val


def split_indices(n: int, cfg: SplitConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if n <= 0:
        raise DatasetError("cannot split an empty dataset")
    n_train, n_val, n_test = split_sizes(n, cfg.ratios)
    if min(n_train, n_val, n_test) <= 0:
        raise DatasetError(
            f"split of {n} rows with ratios {cfg.ratios} leaves an empty partition"
        )
    perm = np.random.default_rng(cfg.seed).permutation(n)
    return perm[:n_train], perm[n_train : n_train + n_val], perm[n_train + n_val :]


def split(ds: Dataset, cfg: SplitConfig) -> tuple[Dataset, Dataset, Dataset]:
    """Seeded shuffle, then floor(N*r_train), floor(N*r_val) and the remainder."""
    train_idx, val_idx, test_idx = split_indices(len(ds), cfg)
    return ds.subset(train_idx), ds.subset(val_idx), ds.subset(test_idx)


def fit_standardizer(train: Dataset | np.ndarray) -> StandardizationStats:
    """Per-feature mean and population std; constant columns get scale 1."""
    X = train.X if isinstance(train, Dataset) else np.asarray(train, dtype=np.float64)
    if X.shape[0] == 0:
        raise DatasetError("cannot fit standardizer on an empty set")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    # a column whose deviations are pure rounding noise is treated as constant
    const = std <= 1e-12 * np.maximum(1.0, np.abs(mean))
    return StandardizationStats(mean, np.where(const, 1.0, std))


def standardize(x: np.ndarray, stats: StandardizationStats) -> np.ndarray:
    """``(x - mean) / scale`` for a single row or a batch of rows."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != stats.dim:
        raise DatasetError(f"dimension mismatch: got {x.shape[-1]}, expected {stats.dim}")
    return (x - stats.mean) / stats.scale


def standardize_dataset(ds: Dataset, stats: StandardizationStats) -> Dataset:
    return ds.with_features(standardize(ds.X, stats))


def make_two_cluster(
    n: int = 1000, dim: int = 10, separation: float = 6.0, seed: int = 0
) -> Dataset:
    """Two isotropic unit-variance Gaussian classes whose means are ``separation`` apart.

    Stands in for the public phishing datasets when they are not available.
    Rows are interleaved by class before shuffling so classes stay balanced.
    """
    rng = np.random.default_rng(seed)
    direction = rng.normal(size=dim)
    direction /= np.linalg.norm(direction)
    offset = 0.5 * separation * direction
    y = np.arange(n) % 2
    X = rng.normal(size=(n, dim)) + np.where(y[:, None] == PHISHING, offset, -offset)
    order = rng.permutation(n)
    return Dataset(X[order], y[order], tuple(f"x{i}" for i in range(dim)))
