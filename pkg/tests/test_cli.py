import csv
import hashlib
import json
import subprocess
import sys

import pytest

from moveprim.cli import RunConfig, main

SMALL = ["--counts", "24,24,24,24", "--recordings", "2"]
SUBCOMMANDS = ["synth", "featurize", "eval", "search", "bench", "report"]


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "data"
    assert main(["synth", *SMALL, "--seed", "2", "--out", str(out)]) == 0
    return out


def _files(d):
    return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}


def test_synth_is_reproducible(data_dir, tmp_path):
    assert main(["synth", *SMALL, "--seed", "2", "--out", str(tmp_path / "again")]) == 0
    assert _files(data_dir) == _files(tmp_path / "again")
    assert "labels.csv" in _files(data_dir)


def test_manifest_hashes_artifacts(data_dir):
    doc = json.loads((data_dir / "manifest.json").read_text())
    assert doc["command"] == "synth" and doc["seed"] == 2 and "out" not in doc["config"]
    for name, digest in doc["artifacts"].items():
        assert hashlib.sha256((data_dir / name).read_bytes()).hexdigest() == digest


def test_unknown_algorithm_exits_one(data_dir, tmp_path, capsys):
    code = main(["eval", "--data", str(data_dir), "--algorithms", "lda,forest", "--out", str(tmp_path)])
    assert code == 1
    err = capsys.readouterr().err
    assert "forest" in err and "lda, nbc, svm, knn" in err


def test_bad_flag_exits_one(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["eval", "--repeats", "many"])
    assert exc.value.code == 1


def test_bad_config_exits_one(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"windows": 3}))
    assert main(["eval", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    cfg.write_text("{not json")
    assert main(["eval", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1


def test_missing_data_exits_two(tmp_path):
    assert main(["featurize", "--data", str(tmp_path / "none"), "--out", str(tmp_path / "o")]) == 2


def test_config_file_with_flag_override(data_dir, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"data": str(data_dir), "sensors": ["Head"], "kind": "accel", "seed": 5}))
    out = tmp_path / "o"
    assert main(["featurize", "--config", str(cfg), "--sensors", "RHand,Pelvis", "--out", str(out)]) == 0
    names = (out / "feature_names.txt").read_text().split()
    assert len(names) == 2 * 3 * 8 and names[0].startswith("Pelvis.ax")
    echo = json.loads((out / "manifest.json").read_text())["config"]
    assert echo["seed"] == 5 and echo["sensors"] == ["RHand", "Pelvis"]


def test_exhaustive_search_rows(data_dir, tmp_path):
    out = tmp_path / "s"
    code = main(["search", "--data", str(data_dir), "--mode", "exhaustive", "--whitelist",
                 "Head,Sternum,RForearm", "--repeats", "1", "--out", str(out)])
    assert code == 0
    with (out / "search.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 7
    assert {r["sites"] for r in rows} >= {"Head", "Head+Sternum+RForearm"}


def test_search_budget_exits_two(data_dir, tmp_path):
    code = main(["search", "--data", str(data_dir), "--mode", "exhaustive", "--budget", "10",
                 "--out", str(tmp_path)])
    assert code == 2


def test_eval_and_report_regeneration(data_dir, tmp_path):
    out = tmp_path / "e"
    assert main(["eval", "--data", str(data_dir), "--algorithms", "lda,nbc", "--repeats", "2",
                 "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert set(rep["overall_ppv"]) == {"lda", "nbc"}
    assert (out / "plots" / "roc_reach.svg").exists()
    regen = tmp_path / "r"
    assert main(["report", str(out), "--out", str(regen)]) == 0
    assert (regen / "report.json").read_bytes() == (out / "report.json").read_bytes()


def test_bench_sample_scale(data_dir, tmp_path):
    out = tmp_path / "b"
    assert main(["bench", "--data", str(data_dir), "--algorithms", "lda,knn", "--fractions", "0.5,1.0",
                 "--reps", "1", "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert set(rep["timings"]["scaling"]["runs"]) == {"lda", "knn"}
    assert (out / "timing.csv").read_text().count("\n") == 1 + 2 * 2 * 2


def test_run_config_echo_omits_output():
    cfg = RunConfig(out="/somewhere")
    assert "out" not in cfg.echo() and cfg.to_dict()["out"] == "/somewhere"


@pytest.mark.parametrize("cmd", SUBCOMMANDS)
def test_help(cmd):
    res = subprocess.run([sys.executable, "-m", "moveprim.cli", cmd, "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "usage:" in res.stdout
