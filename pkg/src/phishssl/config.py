"""JSON run configuration shared by the CLI commands."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .dataset import DatasetSchema, SplitConfig
from .train import TrainConfig

MODELS = ("phishssl", "kmeans", "autoencoder")


@dataclass(frozen=True)
class BaselineConfig:
    kmeans_k: int = 2
    ae_hidden: tuple[int, ...] = (64, 16)
    ae_epochs: int = 20
    ae_lr: float = 1e-3
    ae_batch_size: int = 128
    # "legitimate": fit on legitimate training rows only; "all": every training row
    ae_fit_on: str = "legitimate"

    def __post_init__(self) -> None:
        object.__setattr__(self, "ae_hidden", tuple(self.ae_hidden))
        if self.ae_fit_on not in ("legitimate", "all"):
            raise ValueError("ae_fit_on must be 'legitimate' or 'all'")


@dataclass(frozen=True)
class RunConfig:
    dataset_path: Path
    schema: DatasetSchema
    seed: int = 0
    split_ratios: tuple[float, float, float] = (0.6, 0.2, 0.2)
    train: TrainConfig = field(default_factory=TrainConfig)
    baselines: BaselineConfig = field(default_factory=BaselineConfig)
    model: str = "phishssl"
    out: Path = Path("runs/default")
    raw: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}")

    @property
    def split(self) -> SplitConfig:
        return SplitConfig(self.split_ratios, self.seed)

    def with_seed(self, seed: int) -> "RunConfig":
        raw = dict(self.raw, seed=seed)
        return replace(self, seed=seed, train=replace(self.train, seed=seed), raw=raw)

    def digest(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _resolve(base: Path, value: str) -> Path:
    p = Path(value)
    return p if p.is_absolute() else (base / p)


def parse_run_config(doc: dict, base_dir: Path = Path(".")) -> RunConfig:
    """Build a :class:`RunConfig`; relative paths resolve against ``base_dir``.

    ``dataset.schema`` may be an inline object or a path to a schema JSON file.
    The single top-level ``seed`` drives the split and all training randomness.
    """
    ds = doc["dataset"]
    schema = ds["schema"]
    if isinstance(schema, str):
        schema = DatasetSchema.from_json(_resolve(base_dir, schema))
    else:
        schema = DatasetSchema.from_dict(schema)
    seed = int(doc.get("seed", 0))
    train_doc = dict(doc.get("train", {}))
    train_doc["seed"] = seed
    return RunConfig(
        dataset_path=_resolve(base_dir, ds["path"]),
        schema=schema,
        seed=seed,
        split_ratios=tuple(doc.get("split", {}).get("ratios", (0.6, 0.2, 0.2))),
        train=TrainConfig.from_dict(train_doc),
        baselines=BaselineConfig(**doc.get("baselines", {})),
        model=doc.get("model", "phishssl"),
        out=_resolve(base_dir, doc.get("out", "runs/default")),
        raw=doc,
    )


def load_run_config(path: str | Path) -> RunConfig:
    path = Path(path)
    doc = json.loads(path.read_text(encoding="utf-8"))
    return parse_run_config(doc, path.parent)
