import csv
import json

import numpy as np
import pytest

from gsoftmax.cli import EXIT_DATA, EXIT_NUMERIC, EXIT_OK, EXIT_VALIDATION, main
from gsoftmax.experiment import run_experiment
from gsoftmax.config import validate_config

CONFIG = {
    "dataset": {"kind": "blobs", "num_classes": 3, "dim": 2, "centers": [[0, 0], [2, 0], [0, 2]],
                "spread": 0.6, "train_per_class": 30, "test_per_class": 20, "seed": 1},
    "model": {"hidden_dims": [8]},
    "loss_modes": ["softmax", "gsoftmax"],
    "schedule": {"kind": "malleable", "base_rate": 0.1, "max_epoch": 5, "pieces": [[5, 0, -2]]},
    "seeds": [0, 1, 2],
    "batch_size": 16,
}


@pytest.fixture
def config_file(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(CONFIG))
    return p


def test_run_summary_structure(tmp_path, config_file, capsys, monkeypatch):
    monkeypatch.delenv("GSOFTMAX_OUT", raising=False)
    out = tmp_path / "out"
    assert main(["run", "--config", str(config_file), "--out", str(out)]) == EXIT_OK
    summary = json.loads((out / "summary.json").read_text())
    assert len(summary["runs"]) == 6
    for run in summary["runs"]:
        assert len(run["separability"]["per_class"]) == 3
        assert {"accuracy", "mAP", "loss"} <= set(run["final"])
        assert len(run["per_class_ap"]) == 3
    assert len(summary["comparisons"]) == 3
    for comp in summary["comparisons"]:
        for key in ("paired_t_test", "pearson"):
            res = comp[key]
            assert "error" in res or 0.0 <= res["p_val"] <= 1.0
    first = (out / "summary.json").read_bytes()
    assert main(["run", "--config", str(config_file), "--out", str(out)]) == EXIT_OK
    assert (out / "summary.json").read_bytes() == first
    assert (out / "gsoftmax" / "seed0" / "scatter.csv").exists()


def test_env_overrides_output(tmp_path, config_file, monkeypatch):
    env_out = tmp_path / "env"
    monkeypatch.setenv("GSOFTMAX_OUT", str(env_out))
    assert main(["run", "--config", str(config_file), "--out", str(tmp_path / "flag"), "--seed", "4"]) == EXIT_OK
    assert (env_out / "summary.json").exists()
    assert not (tmp_path / "flag").exists()


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_run_error_codes(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({**CONFIG, "extra": True}))
    assert main(["run", "--config", str(bad)]) == EXIT_VALIDATION
    assert main(["run", "--config", str(tmp_path / "none.json")]) == EXIT_DATA
    cifar = tmp_path / "cifar.json"
    cifar.write_text(json.dumps({**CONFIG, "dataset": {"kind": "cifar10",
                                                        "train_files": [str(tmp_path / "no.bin")]}}))
    assert main(["run", "--config", str(cifar)]) == EXIT_DATA
    diverge = tmp_path / "div.json"
    big = {**CONFIG, "schedule": {"kind": "constant", "base_rate": 1e6, "max_epoch": 3}}
    diverge.write_text(json.dumps(big))
    assert main(["run", "--config", str(diverge), "--out", str(tmp_path / "d")]) == EXIT_NUMERIC


def test_gradcheck_command(capsys):
    assert main(["gradcheck", "--trials", "2", "--seed", "3"]) == EXIT_OK
    first = capsys.readouterr().out
    main(["gradcheck", "--trials", "2", "--seed", "3"])
    assert capsys.readouterr().out == first
    assert "single.sigma[lam=0]" in first
    assert main(["gradcheck", "--trials", "0"]) == EXIT_VALIDATION


def test_gradcheck_failure_exit(monkeypatch, capsys):
    import gsoftmax.cli as cli
    monkeypatch.setattr(cli, "TOLERANCE", 0.0)
    real = cli.run_gradcheck

    def strict(trials, seed):
        report = real(trials, seed)
        for b in report.blocks.values():
            b.max_rel_err += 1.0
        return report

    monkeypatch.setattr(cli, "run_gradcheck", strict)
    assert main(["gradcheck", "--trials", "1"]) == EXIT_NUMERIC
    assert "seed=0" in capsys.readouterr().err


def test_schedule_preview(tmp_path, capsys):
    p = tmp_path / "s.json"
    p.write_text(json.dumps({"kind": "constant", "base_rate": 0.1, "max_epoch": 3}))
    assert main(["schedule-preview", "--config", str(p)]) == EXIT_OK
    rows = list(csv.reader(capsys.readouterr().out.splitlines()))
    assert rows == [["epoch", "rate"], ["1", "0.1"], ["2", "0.1"], ["3", "0.1"]]
    p.write_text(json.dumps({"kind": "malleable", "base_rate": 1.0, "max_epoch": 1100,
                             "pieces": [[1000, 0, -8], [1100, -8, -9]]}))
    assert main(["schedule-preview", "--config", str(p)]) == EXIT_OK
    rates = [float(r.split(",")[1]) for r in capsys.readouterr().out.splitlines()[1:]]
    assert len(rates) == 1100 and all(b < a for a, b in zip(rates, rates[1:]))
    p.write_text(json.dumps({"kind": "malleable", "base_rate": 1.0, "max_epoch": 10, "pieces": [[9, 0, -1]]}))
    assert main(["schedule-preview", "--config", str(p)]) == EXIT_VALIDATION


def test_analyze_inputs(tmp_path, capsys):
    rng = np.random.default_rng(0)
    long_csv = tmp_path / "long.csv"
    with open(long_csv, "w") as fh:
        fh.write("class_id,feature_value\n")
        for c in range(3):
            for v in rng.normal(c, 1, 10):
                fh.write(f"{c},{float(v)!r}\n")
    out = tmp_path / "rep"
    assert main(["analyze", "--input", str(long_csv), "--out", str(out)]) == EXIT_OK
    rep = json.loads((out / "separability.json").read_text())
    assert [c["class_id"] for c in rep["per_class"]] == [0, 1, 2]
    assert (out / "separability.csv").read_text().startswith("class_id,compactness")
    capsys.readouterr()

    labels = np.repeat([0, 1], 10)
    feats = rng.normal(size=(20, 2)) + 2 * np.eye(2)[labels]
    dump = tmp_path / "features.json"
    dump.write_text(json.dumps({"labels": labels.tolist(), "features": feats.tolist()}))
    table = tmp_path / "features.csv"
    with open(table, "w") as fh:
        fh.write("label,x0,x1\n")
        for y, f in zip(labels, feats):
            fh.write(f"{y},{float(f[0])!r},{float(f[1])!r}\n")
    assert main(["analyze", "--input", str(dump), "--format", "csv"]) == EXIT_OK
    from_json = capsys.readouterr().out
    assert main(["analyze", "--input", str(table), "--format", "csv"]) == EXIT_OK
    assert capsys.readouterr().out == from_json
    assert main(["analyze", "--input", str(table), "--mode", "pooled"]) == EXIT_OK


def test_analyze_errors(tmp_path):
    assert main(["analyze", "--input", str(tmp_path / "none.csv")]) == EXIT_DATA
    junk = tmp_path / "junk.csv"
    junk.write_text("a,b\n1,2\n")
    assert main(["analyze", "--input", str(junk)]) == EXIT_DATA
    one = tmp_path / "one.csv"
    one.write_text("class_id,feature_value\n0,1\n0,2\n")
    assert main(["analyze", "--input", str(one)]) == EXIT_VALIDATION


def test_analyze_trainer_dump(tmp_path):
    cfg = validate_config({**CONFIG, "seeds": [0]})
    run_experiment(cfg, str(tmp_path))
    for name in ("features.csv", "features.json"):
        assert main(["analyze", "--input", str(tmp_path / "gsoftmax" / "seed0" / name),
                     "--out", str(tmp_path / name)]) == EXIT_OK
    a = json.loads((tmp_path / "features.csv" / "separability.json").read_text())
    b = json.loads((tmp_path / "features.json" / "separability.json").read_text())
    assert a == b


def test_metrics_command(tmp_path, capsys):
    p = tmp_path / "pred.csv"
    p.write_text("item_id,class_id,score,label\n"
                 "a,0,0.9,1\na,1,0.2,0\nb,0,0.4,0\nb,1,0.7,1\nc,0,0.6,0\nc,1,0.1,0\n")
    assert main(["metrics", "--input", str(p)]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["per_class_ap"] == {"0": 1.0, "1": 1.0}
    assert doc["C-P"] == pytest.approx(0.75)
    assert doc["O-R"] == 1.0
    assert main(["metrics", "--input", str(p), "--threshold", "1.5"]) == EXIT_VALIDATION
    p.write_text("item_id,class_id,score,label\na,0,0.9,1\na,1,0.2,0\nb,0,0.4,0\n")
    assert main(["metrics", "--input", str(p)]) == EXIT_DATA
