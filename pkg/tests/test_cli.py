import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from arae import nn
from arae.cli import run
from arae.metrics import fpr_at_tpr
from arae.model import Autoencoder
from arae.modelfile import save_model


def _train(tmp_path, name="run", *extra):
    out = tmp_path / name
    assert run(["train", "--preset", "bars", "--epochs", "4", "--out", str(out), *extra]) == 0
    return out


def _rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def test_train_writes_three_files_and_is_deterministic(tmp_path):
    a = _train(tmp_path, "a")
    assert sorted(p.name for p in a.iterdir()) == ["config.json", "model.arae", "train_log.csv"]
    assert len(_rows(a / "train_log.csv")) == 4
    assert json.loads((a / "config.json").read_text())["train"]["epochs"] == 4
    b = _train(tmp_path, "b")
    assert (a / "model.arae").read_bytes() == (b / "model.arae").read_bytes()
    d = _train(tmp_path, "d", "--variant", "dae")
    assert (a / "model.arae").read_bytes() != (d / "model.arae").read_bytes()


def test_eval_and_scores_consistent(tmp_path, capsys):
    a = _train(tmp_path)
    assert run(["eval", "--model", str(a / "model.arae")]) == 0
    row = _rows(a / "eval.csv")[0]
    assert row["dataset"] == "bars" and row["protocol"] == "p2" and row["normal_classes"] == "0"
    assert 0 < float(row["auc"]) <= 1 and len(row["auc"].split(".")[1]) == 4
    scores = _rows(a / "scores.csv")
    s = np.array([float(r["score"]) for r in scores])
    lab = np.array([r["anomalous"] == "1" for r in scores])
    assert float(row["fpr_at_99.5_tpr"]) == pytest.approx(fpr_at_tpr(s, lab, 0.995), abs=5e-5)
    assert int(row["n_test"]) == len(scores) == 200


def test_attack_eval(tmp_path):
    a = _train(tmp_path)
    assert run(["attack-eval", "--model", str(a / "model.arae"), "--epsilon", "0,0.05,0.1"]) == 0
    rows = _rows(a / "attack_eval.csv")
    assert rows[0]["attacked_auc"] == rows[0]["clean_auc"]
    for r in rows[1:]:
        assert float(r["attacked_auc"]) <= float(r["clean_auc"])


def test_saliency_and_minima_deterministic(tmp_path):
    a = _train(tmp_path)
    m = str(a / "model.arae")
    for out in ("s1", "s2"):
        assert run(["saliency", "--model", m, "--count", "2", "--out", str(tmp_path / out)]) == 0
        assert run(["minima", "--model", m, "--count", "2", "--max-iters", "50", "--out", str(tmp_path / out)]) == 0
    names = sorted(p.name for p in (tmp_path / "s1").iterdir())
    assert "saliency_0.ppm" in names and "minimum_1.pgm" in names and "minima.csv" in names
    for n in names:
        assert (tmp_path / "s1" / n).read_bytes() == (tmp_path / "s2" / n).read_bytes()
    assert (tmp_path / "s1" / "saliency_0.ppm").read_bytes().startswith(b"P6\n8 8\n255\n")


def test_identity_model_gives_neutral_saliency(tmp_path):
    eye = lambda: nn.DenseLayer(np.eye(64), np.zeros(64), "identity")
    save_model(Autoencoder([eye()], [eye()]), tmp_path / "id.arae")
    out = tmp_path / "sal"
    assert run(["saliency", "--preset", "bars", "--model", str(tmp_path / "id.arae"),
                "--count", "1", "--noise", "0", "--out", str(out)]) == 0
    ppm = (out / "saliency_0.ppm").read_bytes()
    assert set(ppm[len(b"P6\n8 8\n255\n"):]) == {0}


def test_sweep_per_class_dirs(tmp_path):
    out = tmp_path / "sweep"
    assert run(["train", "--preset", "bars", "--epochs", "2", "--out", str(out),
                "--sweep", "0", "1", "--jobs", "2"]) == 0
    rows = _rows(out / "summary.csv")
    assert [r["normal_classes"] for r in rows] == ["0", "1"]
    assert (out / "class_1" / "model.arae").exists()


def test_exit_codes(tmp_path):
    assert run(["train", "--preset", "nope", "--out", str(tmp_path)]) == 1
    assert run(["train", "--preset", "bars", "--gamma", "-1", "--out", str(tmp_path)]) == 1
    assert run(["eval", "--preset", "bars", "--model", str(tmp_path / "missing.arae")]) == 2
    bad = tmp_path / "bad.arae"
    bad.write_bytes(b"ARAE" + b"\x00" * 20)
    assert run(["eval", "--preset", "bars", "--model", str(bad)]) == 2
    small = tmp_path / "small.arae"
    save_model(Autoencoder.create(4, (2,)), small)
    assert run(["eval", "--preset", "bars", "--model", str(small)]) == 2
    assert run(["train", "--preset", "mnist8-mini", "--data-dir", str(tmp_path / "none"),
                "--out", str(tmp_path / "m")]) == 2


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_numeric_failure_exit_code(tmp_path):
    assert run(["train", "--preset", "bars", "--epochs", "2", "--out", str(tmp_path / "x")]) == 0
    cfg = json.loads((tmp_path / "x" / "config.json").read_text())
    cfg["train"]["learning_rate"] = float("inf")
    cfg["train"]["optimizer"] = "sgd"
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    assert run(["train", "--config", str(tmp_path / "c.json"), "--out", str(tmp_path / "y")]) == 3


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "arae", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "attack-eval" in r.stdout
