import csv

import numpy as np
import pytest

from w2fair.cli import main, read_config, ConfigError
from w2fair.datagen import make_two_gaussians, write_csv
from w2fair.datamodel import Dataset
from w2fair.metrics import FairnessReport
from w2fair.model import LogisticModel, save_checkpoint


@pytest.fixture
def tiny_csv(tmp_path):
    path = tmp_path / "tiny.csv"
    write_csv(make_two_gaussians(200, 3, seed=0, separation=2.0), path)
    return path


FAST = ["--epochs", "2", "--hidden", "4", "--batch-size", "20", "--quiet"]


def test_train_outputs(tiny_csv, tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["train", "--data", str(tiny_csv), "--out-dir", str(out), *FAST]) == 0
    for name in ("model.ckpt", "history.csv", "preprocess.json", "report.txt", "manifest.txt"):
        assert (out / name).exists()
    rows = list(csv.DictReader((out / "history.csv").open()))
    assert len(rows) == 2
    report = FairnessReport.from_text((out / "report.txt").read_text())
    assert report.n == 50
    assert "accuracy=" in capsys.readouterr().out


def test_auto_lambda_trajectory_in_manifest(tiny_csv, tmp_path):
    out = tmp_path / "run"
    args = ["train", "--data", str(tiny_csv), "--out-dir", str(out), "--penalty", "pred-w2",
            "--auto-lambda", "--warm-epochs", "1", "--grid-size", "10", *FAST]
    assert main(args) == 0
    manifest = (out / "manifest.txt").read_text()
    line = next(l for l in manifest.splitlines() if l.startswith("# lambda_trajectory="))
    lams = [float(v) for v in line.split("=", 1)[1].split(",")]
    assert len(lams) == 2 and lams[0] == 0.0 and lams[1] > 0


def test_replay_from_manifest_is_byte_identical(tiny_csv, tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    args = ["train", "--data", str(tiny_csv), "--out-dir", str(first), "--penalty", "pred-w2",
            "--lambda", "0.5", "--grid-size", "10", "--seed", "3", *FAST]
    assert main(args) == 0
    assert main(["train", "--config", str(first / "manifest.txt"), "--out-dir", str(second)]) == 0
    for name in ("history.csv", "model.ckpt"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_bad_schema_names_missing_column(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("x0,label,s\n1,0,0\n2,1,1\n")
    assert main(["train", "--data", str(path), "--out-dir", str(tmp_path), *FAST]) != 0
    assert "y" in capsys.readouterr().err


def _di_047(tmp_path):
    """Group 0 has 47 of 100 rows with x0 = 1, group 1 all 100."""
    x = np.r_[np.ones(47), -np.ones(53), np.ones(100)].reshape(-1, 1)
    s = np.repeat([0, 1], 100)
    data = Dataset(x, (x[:, 0] > 0).astype(int), s, ("x0",))
    write_csv(data, tmp_path / "audit.csv")
    save_checkpoint(LogisticModel(0.0, np.array([50.0])), tmp_path / "lr.ckpt")
    return ["audit", "--data", str(tmp_path / "audit.csv"), "--checkpoint", str(tmp_path / "lr.ckpt")]


def test_audit_exit_codes(tmp_path, capsys):
    args = _di_047(tmp_path)
    assert main(args) == 1
    out = capsys.readouterr().out
    assert "di=0.47" in out and "passed=false" in out
    assert main(args + ["--tau", "0.4"]) == 0


def test_audit_fair_model(tmp_path):
    args = _di_047(tmp_path)
    save_checkpoint(LogisticModel(-50.0, np.array([0.0])), tmp_path / "lr.ckpt")
    assert main(args) == 0


def test_audit_unreadable_checkpoint(tmp_path):
    args = _di_047(tmp_path)
    (tmp_path / "lr.ckpt").write_bytes(b"junk")
    assert main(args) == 2


def test_audit_with_preprocess(tiny_csv, tmp_path):
    out = tmp_path / "run"
    assert main(["train", "--data", str(tiny_csv), "--out-dir", str(out), *FAST]) == 0
    code = main(["audit", "--data", str(tiny_csv), "--checkpoint", str(out / "model.ckpt"),
                 "--preprocess", str(out / "preprocess.json"), "--tau", "0"])
    assert code == 0


def test_synth(tiny_csv, tmp_path):
    out1, out2 = tmp_path / "s1", tmp_path / "s2"
    base = ["synth", "--data", str(tiny_csv), "--protocol", "sr", "--fraction", "0.65", "--seed", "1"]
    assert main(base + ["--out-dir", str(out1)]) == 0
    assert main(base + ["--out-dir", str(out2)]) == 0
    assert (out1 / "biased.csv").read_bytes() == (out2 / "biased.csv").read_bytes()
    orig = list(csv.reader(tiny_csv.open()))
    biased = list(csv.reader((out1 / "biased.csv").open()))
    flipped = {int(r[0]) for r in list(csv.reader((out1 / "flipped.csv").open()))[1:]}
    assert flipped
    for i, (a, b) in enumerate(zip(orig[1:], biased[1:])):
        assert a[:-2] == b[:-2] and a[-1] == b[-1]
        if i in flipped:
            assert (a[-2], a[-1], b[-2]) == ("1", "0", "0")
        else:
            assert a[-2] == b[-2]


def test_synth_zero_fraction_keeps_labels(tiny_csv, tmp_path):
    assert main(["synth", "--data", str(tiny_csv), "--fraction", "0", "--out-dir", str(tmp_path / "z")]) == 0
    orig = [r[-2] for r in csv.reader(tiny_csv.open())]
    new = [r[-2] for r in csv.reader((tmp_path / "z" / "biased.csv").open())]
    assert orig == new


def test_sweep_rows_sorted(tiny_csv, tmp_path):
    out = tmp_path / "sw"
    assert main(["sweep", "--data", str(tiny_csv), "--out-dir", str(out), "--lambdas", "5,0,1",
                 "--grid-size", "10", *FAST]) == 0
    rows = list(csv.reader((out / "sweep.csv").open()))
    assert rows[0] == ["lambda", "di", "mse", "gp0", "gp1", "gp0_gp1", "accuracy"]
    assert [float(r[0]) for r in rows[1:]] == [0.0, 1.0, 5.0]


def test_sweep_zero_matches_train(tiny_csv, tmp_path):
    assert main(["sweep", "--data", str(tiny_csv), "--out-dir", str(tmp_path / "sw"), "--lambdas", "0", *FAST]) == 0
    assert main(["train", "--data", str(tiny_csv), "--out-dir", str(tmp_path / "tr"), "--penalty", "pred-w2", *FAST]) == 0
    row = list(csv.DictReader((tmp_path / "sw" / "sweep.csv").open()))[0]
    report = FairnessReport.from_text((tmp_path / "tr" / "report.txt").read_text())
    assert float(row["di"]) == report.di and float(row["accuracy"]) == report.accuracy


def test_config_file(tmp_path, tiny_csv):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"# comment\ndata={tiny_csv}\nepochs=1\nhidden=3\nquiet=true\n")
    assert main(["train", "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) == 0
    assert len(list(csv.reader((tmp_path / "o" / "history.csv").open()))) == 2
    assert read_config(cfg)["epochs"] == "1"


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("nonsense=1\n")
    assert main(["train", "--config", str(cfg)]) == 2


def test_config_malformed(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("just words\n")
    with pytest.raises(ConfigError):
        read_config(cfg)


def test_sweep_di_trend_on_biased_data(tmp_path):
    write_csv(make_two_gaussians(4000, 4, seed=2, separation=2.0), tmp_path / "clean.csv")
    assert main(["synth", "--data", str(tmp_path / "clean.csv"), "--fraction", "0.65", "--predicate", "x0 > 0",
                 "--seed", "2", "--out-dir", str(tmp_path), "--quiet"]) == 0
    assert main(["sweep", "--data", str(tmp_path / "biased.csv"), "--lambdas", "0,30,100,300,1000",
                 "--epochs", "8", "--out-dir", str(tmp_path), "--quiet"]) == 0
    di = [float(r["di"]) for r in csv.DictReader((tmp_path / "sweep.csv").open())]
    assert all(b >= a for a, b in zip(di, di[1:]))
    assert di[-1] > di[0] + 0.3
