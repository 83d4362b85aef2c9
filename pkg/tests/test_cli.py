import json

import pytest
import yaml

from edgeprefetch.cli import main
from edgeprefetch.config import load_config


@pytest.fixture
def small_yaml(tmp_path, small_cfg):
    cfg = small_cfg.with_()
    cfg.dataset.seeds = [101, 102]
    path = tmp_path / "small.yaml"
    cfg.dump_yaml(path)
    return path


def _files(d):
    return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}


def test_simulate_twice_is_byte_identical(tmp_path, small_yaml, capsys):
    for out in ("a", "b"):
        assert main(["simulate", "--config", str(small_yaml), "--strategy", "legacy", "--seed", "1",
                     "--out", str(tmp_path / out)]) == 0
    (da,), (db,) = list((tmp_path / "a").iterdir()), list((tmp_path / "b").iterdir())
    fa, fb = _files(da), _files(db)
    assert set(fa) >= {"config.yaml", "events.csv", "traces.csv", "stalls.csv", "players.csv",
                       "report.json", "report.txt", "dataset.csv"}
    assert fa == fb
    assert "_legacy_s1_" in da.name


def test_artifacts_carry_hash_and_seed(tmp_path, small_yaml, capsys):
    main(["simulate", "--config", str(small_yaml), "--strategy", "preemptive", "--seed", "3",
          "--out", str(tmp_path)])
    (run,) = list(tmp_path.glob("*_preemptive_s3_*"))
    cfg_hash = load_config(run / "config.yaml").hash()
    for name in ("events.csv", "traces.csv", "stalls.csv", "players.csv"):
        first = (run / name).read_text().splitlines()[0]
        assert first == f"# config_hash={cfg_hash} seed=3 strategy=preemptive"
    report = json.loads((run / "report.json").read_text())
    assert report["config_hash"] == cfg_hash and report["seed"] == 3
    assert cfg_hash[:8] in run.name


def test_predictive_without_model_names_the_flag(tmp_path, small_yaml, capsys):
    rc = main(["simulate", "--config", str(small_yaml), "--strategy", "predictive", "--out", str(tmp_path)])
    assert rc != 0
    assert "--model" in capsys.readouterr().err
    assert main(["simulate", "--config", str(small_yaml), "--strategy", "predictive", "--oracle",
                 "--out", str(tmp_path)]) == 0


def test_invalid_config_exits_nonzero_with_itemized_errors(tmp_path, small_yaml, capsys):
    raw = yaml.safe_load(small_yaml.read_text())
    raw["players"]["count"] = 0
    raw["qoe"]["stall_cap"] = -1
    bad = tmp_path / "bad.yaml"
    bad.write_text(yaml.safe_dump(raw))
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "  - players.count" in err and "  - qoe.stall_cap" in err


def test_dataset_train_evaluate_flow(tmp_path, small_yaml, capsys):
    ds = tmp_path / "ds.csv"
    assert main(["gen-dataset", "--config", str(small_yaml), "--out", str(ds)]) == 0
    first = ds.read_bytes()
    assert main(["gen-dataset", "--config", str(small_yaml), "--seeds", "101,102", "--out", str(ds)]) == 0
    assert ds.read_bytes() == first
    rows = first.decode().splitlines()
    # 2 runs, 3 players, 10 segments: at most 9 labelled records per session
    assert 1 < len(rows) - 1 <= 2 * 3 * 9

    model = tmp_path / "m.json"
    assert main(["train", "--config", str(small_yaml), "--dataset", str(ds), "--model", "lda",
                 "--out", str(model)]) == 0
    assert "gate 0.75" in capsys.readouterr().out
    for out in ("e1", "e2"):
        assert main(["evaluate", "--config", str(small_yaml), "--dataset", str(ds), "--model", str(model),
                     "--out", str(tmp_path / out)]) == 0
    assert _files(tmp_path / "e1") == _files(tmp_path / "e2")
    assert {"evaluation.json", "confusion.csv", "confusion_normalized.csv", "correlation.csv"} <= set(
        _files(tmp_path / "e1"))
    out = capsys.readouterr().out
    assert "accuracy" in out and ("PASS" in out or "FAIL" in out)


def test_svm_is_not_implemented(tmp_path, small_yaml, capsys):
    ds = tmp_path / "ds.csv"
    main(["gen-dataset", "--config", str(small_yaml), "--seeds", "101", "--out", str(ds)])
    rc = main(["train", "--config", str(small_yaml), "--dataset", str(ds), "--model", "svm",
               "--out", str(tmp_path / "s.json")])
    assert rc != 0
    assert "not implemented" in capsys.readouterr().err
    assert not (tmp_path / "s.json").exists()


def test_unknown_model_kind(tmp_path, small_yaml, capsys):
    ds = tmp_path / "ds.csv"
    main(["gen-dataset", "--config", str(small_yaml), "--seeds", "101", "--out", str(ds)])
    assert main(["train", "--config", str(small_yaml), "--dataset", str(ds), "--model", "gbm",
                 "--out", str(tmp_path / "g.json")]) == 1
    assert "unknown model kind" in capsys.readouterr().err


def test_compare_reports_per_seed_and_pooled(tmp_path, small_yaml, capsys):
    assert main(["compare", "--config", str(small_yaml), "--oracle", "--seeds", "1..2",
                 "--out", str(tmp_path)]) == 0
    (run,) = list(tmp_path.glob("*_compare_*"))
    doc = json.loads((run / "report.json").read_text())
    assert doc["seeds"] == [1, 2]
    assert [r["strategy"] for r in doc["pooled"]] == ["legacy", "preemptive", "predictive"]
    assert set(doc["per_seed"]) == {"1", "2"}
    assert doc["pooled"][0]["cache"]["Hit_ratio"] is None
    text = (run / "report.txt").read_text()
    legacy_line = next(l for l in text.splitlines() if l.startswith("legacy") and "n/a" in l)
    assert legacy_line.count("n/a") == 3
    assert (run / "players.csv").exists() and (run / "predictive" / "s2" / "events.csv").exists()


def test_compare_without_model_fails(tmp_path, small_yaml, capsys):
    assert main(["compare", "--config", str(small_yaml), "--out", str(tmp_path)]) == 1
    assert "--model" in capsys.readouterr().err


def test_bad_seed_range(tmp_path, small_yaml, capsys):
    assert main(["simulate", "--config", str(small_yaml), "--seeds", "5..1", "--out", str(tmp_path)]) == 1
    assert "--seeds" in capsys.readouterr().err


def test_missing_model_file(tmp_path, small_yaml, capsys):
    assert main(["simulate", "--config", str(small_yaml), "--strategy", "predictive",
                 "--model", str(tmp_path / "none.json"), "--out", str(tmp_path)]) == 1
    assert "file not found" in capsys.readouterr().err
