import csv
import json
import subprocess
import sys

import pytest

from awpctc.cli import main

TINY = {
    "seed": 3,
    "synth": {"words_per_utt": [1, 2], "sigma": 0.3},
    "data": {"n_train": 6, "n_eval": 3},
    "model": {"past_context": 2, "hidden": 8},
    "awp": {"alpha": 0.01, "start_epoch": 1, "log_domain": True},
    "optimizer": {"lr": 0.01},
    "train": {"epochs": 2},
}


@pytest.fixture
def workdir(tmp_path):
    (tmp_path / "cfg.json").write_text(json.dumps(TINY))
    return tmp_path


def test_gen_train_eval_align(workdir, capsys):
    d = workdir
    assert main(["gen", "--config", str(d / "cfg.json"), "--out", str(d / "data")]) == 0
    assert {"vocab.json", "train.bin", "eval.bin"} <= {p.name for p in (d / "data").iterdir()}

    assert main(["train", "--config", str(d / "cfg.json"), "--data", str(d / "data"),
                 "--out", str(d / "run")]) == 0
    rows = list(csv.DictReader((d / "run" / "metrics.csv").open()))
    assert len(rows) == 2 and rows[-1]["step"] == "12"

    assert main(["eval", "--run", str(d / "run"), "--ref", str(d / "run")]) == 0
    report = json.loads((d / "run" / "eval.json").read_text())
    assert report["n_utts"] == 3
    assert report["latency_ref"]["dl_frames"] == 0.0
    assert (d / "run" / "eval.csv").read_text().startswith("n_utts,wer,cer")

    capsys.readouterr()
    out = d / "align.json"
    assert main(["align", "--run", str(d / "run"), "--utt", "1", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert len(doc["alignment"]) == len(doc["posteriors"])
    assert doc["uid"] == 1
    assert main(["align", "--run", str(d / "run"), "--utt", "99"]) == 2


def test_sweep(workdir, capsys):
    grid = workdir / "grid.json"
    grid.write_text(json.dumps({"awp.alpha": [0.0, 0.01]}))
    out = workdir / "sweep.csv"
    assert main(["sweep", "--config", str(workdir / "cfg.json"), "--grid", str(grid),
                 "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert [r["awp.alpha"] for r in rows] == ["0.0", "0.01"]
    assert "spearman(awp.alpha, dl_frames)" in capsys.readouterr().out


def test_bad_config_reports_error(workdir, capsys):
    bad = workdir / "bad.json"
    bad.write_text(json.dumps({"awp": {"alpha": -1}}))
    assert main(["gen", "--config", str(bad), "--out", str(workdir / "x")]) == 1
    assert "error" in capsys.readouterr().err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "awpctc", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("gen", "train", "eval", "align", "sweep"):
        assert cmd in res.stdout
