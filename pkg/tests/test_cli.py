import csv
import json

import numpy as np
import pytest

from phishssl.cli import main
from phishssl.metrics import MetricsReport
from phishssl.urlfeat import FEATURE_COLUMNS

FAST_TRAIN = {"epochs": 2, "att_dim": 8, "hidden1": 32, "hidden2": 16, "embed_dim": 8}


def write_config(tmp_path, dataset, **extra):
    doc = {
        "dataset": {
            "path": str(dataset),
            "schema": {"label_column": "label", "positive_label": "phishing", "drop_columns": ["id"], "feature_count": 10},
        },
        "seed": 0,
        "train": dict(FAST_TRAIN),
        "baselines": {"ae_epochs": 5},
        "out": str(tmp_path / "run"),
    }
    doc.update(extra)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc))
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture
def trained_run(tmp_path, synthetic_csv):
    cfg = write_config(tmp_path, synthetic_csv)
    out = tmp_path / "run"
    assert main(["train", "--config", str(cfg), "--out", str(out)]) == 0
    return cfg, out


def test_train_writes_outputs_and_reruns_identically(trained_run, tmp_path):
    cfg, out = trained_run
    for name in ("checkpoint.json", "history.csv", "manifest.json"):
        assert (out / name).exists()
    rows = read_csv(out / "history.csv")
    assert rows[0] == ["epoch", "loss", "val_auc"] and len(rows) == 3
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 0 and len(manifest["config_sha256"]) == 64
    again = tmp_path / "again"
    assert main(["train", "--config", str(cfg), "--out", str(again)]) == 0
    for name in ("checkpoint.json", "history.csv"):
        assert (out / name).read_bytes() == (again / name).read_bytes()


def test_seed_override_changes_run(trained_run, tmp_path):
    cfg, out = trained_run
    other = tmp_path / "seed1"
    assert main(["train", "--config", str(cfg), "--out", str(other), "--seed", "1"]) == 0
    assert (out / "checkpoint.json").read_bytes() != (other / "checkpoint.json").read_bytes()


def test_missing_dataset_exits_1(tmp_path, capsys):
    cfg = write_config(tmp_path, tmp_path / "absent.csv")
    assert main(["train", "--config", str(cfg)]) == 1
    assert "dataset not found" in capsys.readouterr().err


def test_missing_config_exits_1(tmp_path, capsys):
    assert main(["train", "--config", str(tmp_path / "nope.json")]) == 1
    assert "config not found" in capsys.readouterr().err


@pytest.mark.parametrize("model", ["phishssl", "kmeans", "autoencoder"])
def test_eval_outputs(trained_run, tmp_path, model):
    cfg, out = trained_run
    ev = tmp_path / f"eval_{model}"
    args = ["eval", "--model", model, "--out", str(ev)]
    args += ["--checkpoint", str(out / "checkpoint.json")] if model == "phishssl" else ["--config", str(cfg)]
    assert main(args) == 0
    doc = json.loads((ev / "metrics.json").read_text())
    assert set(doc) == {"tn", "fp", "fn", "tp", "accuracy", "precision", "recall", "f1", "roc_auc"}
    assert MetricsReport.from_dict(doc).to_dict() == doc
    assert doc["tn"] + doc["fp"] + doc["fn"] + doc["tp"] == 200
    roc = read_csv(ev / "roc.csv")
    assert roc[0] == ["fpr", "tpr", "threshold"]
    assert roc[1][:2] == ["0.0", "0.0"] and roc[-1][:2] == ["1.0", "1.0"]
    assert read_csv(ev / "confusion.csv")[0] == ["tn", "fp", "fn", "tp"]


def test_eval_cosine_mode(trained_run, tmp_path):
    _, out = trained_run
    assert main(["eval", "--checkpoint", str(out / "checkpoint.json"), "--mode", "cosine", "--out", str(tmp_path / "c")]) == 0


def test_eval_dimension_mismatch(trained_run, tmp_path, capsys):
    _, out = trained_run
    narrow = tmp_path / "narrow.csv"
    narrow.write_text("id,a,b,label\n0,1.0,2.0,phishing\n1,0.0,1.0,legitimate\n")
    code = main(["eval", "--checkpoint", str(out / "checkpoint.json"), "--dataset", str(narrow), "--out", str(tmp_path / "e")])
    assert code == 1
    assert "dimension mismatch" in capsys.readouterr().err


def test_export_embeddings_unit_norm(trained_run, tmp_path):
    _, out = trained_run
    ex = tmp_path / "emb"
    assert main(["export-embeddings", "--checkpoint", str(out / "checkpoint.json"), "--split", "val", "--out", str(ex)]) == 0
    rows = read_csv(ex / "embeddings_val.csv")
    assert rows[0][-1] == "label" and len(rows) == 201
    z = np.array([[float(v) for v in r[:-1]] for r in rows[1:]])
    assert np.allclose(np.linalg.norm(z, axis=1), 1.0, atol=1e-9)


def test_predict(trained_run, synthetic_csv, tmp_path):
    _, out = trained_run
    pr = tmp_path / "pred"
    assert main(["predict", "--checkpoint", str(out / "checkpoint.json"), "--dataset", str(synthetic_csv), "--out", str(pr)]) == 0
    rows = read_csv(pr / "predictions.csv")
    assert rows[0] == ["prob_phishing", "label"] and len(rows) == 1001
    probs = np.array([float(r[0]) for r in rows[1:]])
    labels = np.array([int(r[1]) for r in rows[1:]])
    assert np.all((probs >= 0) & (probs <= 1))
    np.testing.assert_array_equal(labels, (probs >= 0.5).astype(int))


def test_ablate(tmp_path, synthetic_csv):
    cfg = write_config(tmp_path, synthetic_csv, train=dict(FAST_TRAIN, epochs=1))
    ab = tmp_path / "ab"
    assert main(["ablate", "--config", str(cfg), "--out", str(ab)]) == 0
    rows = read_csv(ab / "ablation.csv")
    assert rows[0] == ["configuration", "seed", "roc_auc", "accuracy", "precision", "recall", "f1"]
    assert [r[0] for r in rows[1:]] == ["full", "no_attention", "no_traditional_aug", "no_dropout_aug"]
    assert (ab / "ablation_manifest.json").exists()


def test_extract(tmp_path):
    src = tmp_path / "urls.txt"
    src.write_text("# comment\nhttp://example.com\n\nhttps://192.168.0.1/login\n")
    dst = tmp_path / "features.csv"
    assert main(["extract", "--input", str(src), "--out", str(dst)]) == 0
    rows = read_csv(dst)
    assert rows[0] == ["url", *FEATURE_COLUMNS]
    assert len(rows) == 3
    assert rows[1][FEATURE_COLUMNS.index("url_length") + 1] == "18"


def test_extract_bad_url(tmp_path, capsys):
    src = tmp_path / "urls.txt"
    src.write_text("http://\n")
    assert main(["extract", "--input", str(src), "--out", str(tmp_path / "f.csv")]) == 1
    assert "line 1" in capsys.readouterr().err
