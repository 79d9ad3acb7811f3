import json
import math

import pytest

from moveprim.report import SCHEMA_VERSION, EvalReport, emit_plots, tuning_table

PRIMS = ["reach", "transport", "reposition", "idle"]


def full_report():
    algs = ["lda", "knn"]
    roc = {a: {p: {"fpr": [0.0, 0.0, 1.0], "tpr": [0.0, 0.8, 1.0], "threshold": [math.inf, 0.4, -2.0]}
               for p in PRIMS} for a in algs}
    ops = {a: {p: {"fpr": 0.0, "tpr": 0.8, "threshold": 0.4} for p in PRIMS} for a in algs}
    runs = {a: {"fractions": [0.5, 1.0], "n_samples": [100, 200], "train": [0.01, 0.02],
                "test": [1e-6, 1e-6], "projected_train": [None, None]} for a in algs}
    path = [{"n_sensors": n, "overall_ppv": 0.9, "kind": k, "sites": []} for k in ("imu", "accel") for n in (1, 7)]
    return EvalReport(config={"seed": 0}, algorithms=algs, roc=roc, operating_points=ops,
                      overall_ppv={a: {"mean": 0.9, "std": 0.0} for a in algs},
                      per_primitive_ppv={a: {p: {"mean": 0.9, "std": 0.01} for p in PRIMS} for a in algs},
                      timings={"scaling": {"runs": runs}}, ablation={"domain_path": path})


def test_tuning_table():
    t = tuning_table()
    assert (t["lda"]["n_parameters"], t["lda"]["domain_knowledge"]) == (3, "medium")
    assert (t["svm"]["n_parameters"], t["svm"]["domain_knowledge"]) == (9, "high")
    assert (t["nbc"]["n_parameters"], t["nbc"]["domain_knowledge"]) == (1, "low")
    assert t["nbc"]["parameters"] == "selection of prior distribution"
    assert (t["knn"]["n_parameters"], t["knn"]["domain_knowledge"]) == (5, "low")
    for row in t.values():
        assert len(row["names"]) == row["n_parameters"]


def test_json_round_trip_keeps_infinite_threshold():
    rep = full_report()
    text = rep.to_json()
    doc = json.loads(text)
    assert doc["schema_version"] == SCHEMA_VERSION
    assert doc["roc"]["lda"]["reach"]["threshold"][0] is None
    assert EvalReport.from_json(text) == rep


def test_non_finite_values_become_null():
    rep = EvalReport(overall_ppv={"lda": {"mean": 0.5, "std": float("nan")}})
    assert json.loads(rep.to_json())["overall_ppv"]["lda"]["std"] is None


def test_unknown_key_rejected():
    with pytest.raises(ValueError, match="unknown report keys"):
        EvalReport.from_dict({"bogus": 1})


def test_validate():
    assert full_report().validate() == []
    bad = EvalReport(overall_ppv={"lda": {"mean": 1.5}},
                     per_primitive_ppv={"lda": {"reach": {"mean": 0.5, "std": -0.1}}})
    problems = bad.validate()
    assert len(problems) == 2 and any("outside" in p for p in problems)


def test_emit_all_plots(tmp_path):
    written = emit_plots(full_report(), tmp_path)
    assert written == [f"roc_{p}.svg" for p in PRIMS] + ["time_train.svg", "time_test.svg", "ablation.svg"]
    for name in written:
        assert (tmp_path / name).read_text().lstrip().startswith("<?xml")


def test_emit_plots_skips_missing_sections(tmp_path):
    written = emit_plots(EvalReport(), tmp_path)
    assert all(w.startswith("skipped:") for w in written) and len(written) == 7
    assert list(tmp_path.iterdir()) == []


def test_plots_are_byte_identical(tmp_path):
    rep = full_report()
    emit_plots(rep, tmp_path / "a")
    emit_plots(rep, tmp_path / "b")
    for f in sorted((tmp_path / "a").iterdir()):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()
