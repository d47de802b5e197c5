"""Command-line entry point: extract, train, eval, ablate, predict, export-embeddings."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import platform
import sys
from dataclasses import replace
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy

from . import baselines
from .config import MODELS, RunConfig, load_run_config
from .dataset import DatasetError, DatasetSchema, SplitConfig, load_csv, standardize
from .inference import build_prototypes, predict_labels, score_batch
from .metrics import MetricsReport, roc_curve
from .train import (
    Checkpoint,
    PreparedData,
    embed,
    evaluate_checkpoint,
    fit,
    prepare,
    run_ablation,
)
from .urlfeat import FEATURE_COLUMNS, UrlParseError, extract_url_features

logger = logging.getLogger("phishssl")


class CliError(Exception):
    pass


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8")


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _versions() -> dict:
    try:
        pkg = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        pkg = "unknown"
    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__, "phishssl": pkg}


def _out_dir(args, default: Path | None = None) -> Path:
    out = Path(args.out) if args.out else default
    if out is None:
        raise CliError("--out is required")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _run_config(args) -> RunConfig:
    if not args.config:
        raise CliError("--config is required")
    if not Path(args.config).exists():
        raise CliError(f"config not found: {args.config}")
    cfg = load_run_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if getattr(args, "dataset", None):
        cfg = replace(cfg, dataset_path=Path(args.dataset))
    return cfg


def _load_prepared(path: Path, schema: DatasetSchema, split: SplitConfig) -> PreparedData:
    if not path.exists():
        raise CliError(f"dataset not found: {path}")
    return prepare(load_csv(path, schema), split)


def _checkpoint_data(ck: Checkpoint, dataset: str | None) -> PreparedData:
    extra = ck.extra
    schema = DatasetSchema.from_dict(extra["schema"])
    path = Path(dataset) if dataset else Path(extra["dataset_path"])
    if not path.exists():
        raise CliError(f"dataset not found: {path}")
    # the checkpoint width is the binding constraint, so report it instead of the schema count
    ds = load_csv(path, replace(schema, feature_count=None))
    if ds.dim != ck.dims.input_dim:
        raise CliError(f"dimension mismatch: checkpoint expects {ck.dims.input_dim} features, dataset has {ds.dim}")
    split = SplitConfig(tuple(extra["split"]["ratios"]), int(extra["split"]["seed"]))
    return prepare(ds, split, ck.standardizer)


def cmd_extract(args) -> int:
    src = Path(args.input)
    if not src.exists():
        raise CliError(f"input not found: {src}")
    out = Path(args.out)
    rows = []
    for lineno, line in enumerate(src.read_text(encoding="utf-8").splitlines(), start=1):
        url = line.strip()
        if not url or url.startswith("#"):
            continue
        try:
            feats = extract_url_features(url)
        except UrlParseError as err:
            raise CliError(f"line {lineno}: {err}") from None
        rows.append([url, *(feats[c] for c in FEATURE_COLUMNS)])
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_csv(out, ["url", *FEATURE_COLUMNS], rows)
    print(f"wrote {len(rows)} rows to {out}")
    return 0


def cmd_train(args) -> int:
    cfg = _run_config(args)
    out = _out_dir(args, cfg.out)
    data = _load_prepared(cfg.dataset_path, cfg.schema, cfg.split)
    ck, history = fit(data, cfg.train)
    ck.extra = {
        "schema": cfg.schema.to_dict(),
        "split": {"ratios": list(cfg.split_ratios), "seed": cfg.seed},
        "dataset_path": str(cfg.dataset_path),
    }
    ck.save(out / "checkpoint.json")
    (out / "history.csv").write_text(history.to_csv(), encoding="utf-8")
    _write_json(
        out / "manifest.json",
        {
            "command": "train",
            "seed": cfg.seed,
            "config_sha256": cfg.digest(),
            "config": cfg.raw,
            "versions": _versions(),
            "best_epoch": ck.best_epoch,
            "best_val_auc": ck.best_val_auc,
            "outputs": ["checkpoint.json", "history.csv", "manifest.json"],
        },
    )
    print(f"best epoch {ck.best_epoch} val AUC {ck.best_val_auc:.4f}; wrote {out}")
    return 0


def _write_report(out: Path, report: MetricsReport, scores, labels) -> None:
    _write_json(out / "metrics.json", report.to_dict())
    _write_csv(out / "roc.csv", ["fpr", "tpr", "threshold"], roc_curve(scores, labels))
    _write_csv(out / "confusion.csv", ["tn", "fp", "fn", "tp"], [[report.tn, report.fp, report.fn, report.tp]])


def cmd_eval(args) -> int:
    model = args.model or "phishssl"
    if model == "phishssl":
        if not args.checkpoint:
            raise CliError("--checkpoint is required for --model phishssl")
        ck = Checkpoint.load(args.checkpoint)
        data = _checkpoint_data(ck, args.dataset)
        out = _out_dir(args)
        report, scores = evaluate_checkpoint(ck, data, args.mode)
    else:
        cfg = _run_config(args)
        out = _out_dir(args, cfg.out)
        data = _load_prepared(cfg.dataset_path, cfg.schema, cfg.split)
        b = cfg.baselines
        if model == "kmeans":
            report, scores, _ = baselines.evaluate_kmeans(
                data.train.X, data.train.y, data.test.X, data.test.y, b.kmeans_k, cfg.seed
            )
        else:
            report, scores, _ = baselines.evaluate_autoencoder(
                data.train.X, data.train.y, data.val.X, data.val.y, data.test.X, data.test.y,
                b.ae_epochs, b.ae_lr, b.ae_batch_size, cfg.seed, b.ae_hidden, b.ae_fit_on,
            )  # fmt: skip
    _write_report(out, report, scores, data.test.y)
    print(json.dumps(report.to_dict(), sort_keys=True))
    return 0


def cmd_ablate(args) -> int:
    cfg = _run_config(args)
    out = _out_dir(args, cfg.out)
    data = _load_prepared(cfg.dataset_path, cfg.schema, cfg.split)
    rows = run_ablation(data, cfg.train)
    cols = ["configuration", "seed", "roc_auc", "accuracy", "precision", "recall", "f1"]
    _write_csv(out / "ablation.csv", cols, [[r[c] for c in cols] for r in rows])
    _write_json(
        out / "ablation_manifest.json",
        {"command": "ablate", "seed": cfg.seed, "config_sha256": cfg.digest(), "config": cfg.raw, "versions": _versions()},
    )
    for r in rows:
        print(f"{r['configuration']:<20} roc_auc={r['roc_auc']:.4f} f1={r['f1']:.4f}")
    return 0


def _feature_matrix(ck: Checkpoint, path: Path) -> tuple[np.ndarray, list[str]]:
    """Read raw feature rows in checkpoint column order; label and dropped columns are ignored."""
    schema = DatasetSchema.from_dict(ck.extra["schema"])
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        skip = {schema.label_column, *schema.drop_columns}
        idx = [i for i, h in enumerate(header) if h not in skip]
        rows = [[float(r[i]) for i in idx] for r in reader if r]
    if not rows:
        raise CliError("no rows")
    X = np.asarray(rows)
    if X.shape[1] != ck.dims.input_dim:
        raise CliError(f"dimension mismatch: checkpoint expects {ck.dims.input_dim} features, file has {X.shape[1]}")
    return X, [header[i] for i in idx]


def cmd_predict(args) -> int:
    if not args.checkpoint or not args.dataset:
        raise CliError("--checkpoint and --dataset are required")
    ck = Checkpoint.load(args.checkpoint)
    if ck.prototypes is None:
        raise CliError("checkpoint carries no prototypes")
    path = Path(args.dataset)
    if not path.exists():
        raise CliError(f"dataset not found: {path}")
    X, _ = _feature_matrix(ck, path)
    protos = ck.prototypes.with_mode(args.mode) if args.mode else ck.prototypes
    z = embed(standardize(X, ck.standardizer), ck.params, ck.config)
    probs = score_batch(z, protos)
    labels = predict_labels(z, protos, ck.config.threshold)
    out = _out_dir(args)
    _write_csv(out / "predictions.csv", ["prob_phishing", "label"], zip(probs, labels))
    print(f"wrote {len(labels)} predictions to {out / 'predictions.csv'}")
    return 0


def cmd_export_embeddings(args) -> int:
    if not args.checkpoint:
        raise CliError("--checkpoint is required")
    ck = Checkpoint.load(args.checkpoint)
    data = _checkpoint_data(ck, args.dataset)
    part = {"train": data.train, "val": data.val, "test": data.test}[args.split]
    z = embed(part.X, ck.params, ck.config)
    out = _out_dir(args)
    header = [f"z{i}" for i in range(z.shape[1])] + ["label"]
    _write_csv(out / f"embeddings_{args.split}.csv", header, ([*row, int(y)] for row, y in zip(z, part.y)))
    print(f"wrote {z.shape[0]} embeddings to {out}")
    return 0


COMMANDS = {
    "extract": cmd_extract,
    "train": cmd_train,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "predict": cmd_predict,
    "export-embeddings": cmd_export_embeddings,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phishssl", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True, checkpoint=False, dataset=True):
        if config:
            p.add_argument("--config")
        if checkpoint:
            p.add_argument("--checkpoint")
        if dataset:
            p.add_argument("--dataset")
        p.add_argument("--out")
        p.add_argument("--seed", type=int)

    p = sub.add_parser("extract", help="lexical URL features for one URL per line")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)

    common(sub.add_parser("train", help="train the contrastive encoder"))

    p = sub.add_parser("eval", help="test-split metrics, ROC curve and confusion matrix")
    common(p, checkpoint=True)
    p.add_argument("--model", choices=MODELS, default="phishssl")
    p.add_argument("--mode", choices=("euclidean", "cosine"))

    common(sub.add_parser("ablate", help="four-way component ablation"))

    p = sub.add_parser("predict", help="score raw feature rows with a checkpoint")
    common(p, config=False, checkpoint=True)
    p.add_argument("--mode", choices=("euclidean", "cosine"))

    p = sub.add_parser("export-embeddings", help="write split embeddings with labels")
    common(p, config=False, checkpoint=True)
    p.add_argument("--split", choices=("train", "val", "test"), default="test")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (CliError, DatasetError, ValueError, KeyError, OSError, RuntimeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
