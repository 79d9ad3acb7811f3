import math
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from moveprim.core import N_COLUMNS, SITE_NAMES, Dataset, LabeledSegment, PrimitiveLabel, Recording
from moveprim.errors import (
    IoError,
    MalformedHeader,
    MissingSensorAtTimestamp,
    NonMonotoneTimestamps,
    OverlapAfterRounding,
    UnknownLabel,
    UnknownSensor,
    ValidationError,
)
from moveprim.io import (
    LABEL_HEADER,
    SENSOR_HEADER,
    read_dataset,
    read_labels,
    read_recording,
    read_report,
    read_roc_csv,
    roc_csv_path,
    write_dataset,
    write_labels,
    write_recording,
    write_report,
)
from moveprim.report import EvalReport

from conftest import make_recording

RATE = 240.0


def _sensor_lines(stamps, drop=None):
    lines = [",".join(SENSOR_HEADER)]
    for t in stamps:
        for s in SITE_NAMES:
            if drop == (t, s):
                continue
            lines.append(f"{t!r},{s}," + ",".join(["0.5"] * 10))
    return "\n".join(lines) + "\n"


def test_two_timestamps(tmp_path):
    p = tmp_path / "rec.csv"
    p.write_text(_sensor_lines([0.0, 1 / RATE]))
    rec = read_recording(p, RATE)
    assert rec.n_samples == 2
    assert rec.samples.shape == (2, N_COLUMNS)
    assert np.all(rec.samples == 0.5)


def test_missing_sensor(tmp_path):
    p = tmp_path / "rec.csv"
    p.write_text(_sensor_lines([0.0, 1 / RATE], drop=(0.0, "RHand")))
    with pytest.raises(MissingSensorAtTimestamp) as err:
        read_recording(p, RATE)
    assert err.value.site == "RHand" and err.value.t == 0.0


def test_ten_seconds_round_trip(tmp_path):
    rec = make_recording(2400)
    write_recording(rec, tmp_path / "r.csv")
    back = read_recording(tmp_path / "r.csv", RATE)
    assert back.n_samples == 2400
    np.testing.assert_allclose(back.samples, rec.samples, rtol=1e-8, atol=1e-12)


def test_shuffled_sensor_rows_are_regrouped(tmp_path):
    text = _sensor_lines([0.0, 1 / RATE]).splitlines()
    body = text[1:]
    body[0], body[5] = body[5], body[0]
    (tmp_path / "r.csv").write_text("\n".join([text[0]] + body) + "\n")
    assert read_recording(tmp_path / "r.csv", RATE).n_samples == 2


def test_bad_header(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text("time,sensor\n0,Head\n")
    with pytest.raises(MalformedHeader):
        read_recording(p, RATE)


def test_unknown_sensor(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text(_sensor_lines([0.0]).replace("Pelvis", "Knee"))
    with pytest.raises(UnknownSensor):
        read_recording(p, RATE)


def test_decreasing_timestamps_reports_line(tmp_path):
    lines = _sensor_lines([0.0, 1 / RATE]).splitlines()
    lines = [lines[0]] + lines[12:] + lines[1:12]
    p = tmp_path / "r.csv"
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(NonMonotoneTimestamps) as err:
        read_recording(p, RATE)
    assert err.value.row == 13


def test_gap_in_timestamps(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text(_sensor_lines([0.0, 1 / RATE, 3 / RATE]))
    with pytest.raises(NonMonotoneTimestamps):
        read_recording(p, RATE)


def test_duplicate_sensor(tmp_path):
    lines = _sensor_lines([0.0]).splitlines()
    lines.append(lines[1])
    p = tmp_path / "r.csv"
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValidationError):
        read_recording(p, RATE)


def test_nan_channels_written_blank(tmp_path):
    rec = make_recording(3)
    rec.samples[:, 3:10] = np.nan
    write_recording(rec, tmp_path / "r.csv")
    first = (tmp_path / "r.csv").read_text().splitlines()[1]
    assert first.endswith(",,,,,,,")
    back = read_recording(tmp_path / "r.csv", RATE)
    assert back == rec or np.array_equal(np.isnan(back.samples), np.isnan(rec.samples))


@settings(max_examples=25, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.just(N_COLUMNS)),
              elements=st.integers(-10**7, 10**7).map(lambda v: v / 1000.0)))
def test_recording_round_trip_exact(tmp_path_factory, samples):
    path = tmp_path_factory.mktemp("rt") / "r.csv"
    rec = Recording.from_samples(samples, RATE, "S01", "T01")
    write_recording(rec, path)
    back = read_recording(path, RATE, "S01", "T01")
    assert np.array_equal(back.samples, rec.samples)
    np.testing.assert_allclose(back.timestamps, rec.timestamps, rtol=1e-9)


# labels ---------------------------------------------------------------------

def _labels(tmp_path, rows, T=600):
    write_labels([r + ("S01", "T01") for r in rows], tmp_path / "labels.csv")
    rec = make_recording(T, subject="S01", trial="T01")
    return read_labels(tmp_path / "labels.csv", rec)


def test_labels_exact_conversion(tmp_path):
    segs = _labels(tmp_path, [(0.0, 1.0, "reach"), (1.0, 2.0, "idle")])
    assert segs == [LabeledSegment(0, 240, PrimitiveLabel.REACH), LabeledSegment(240, 480, PrimitiveLabel.IDLE)]


def test_unknown_label(tmp_path):
    with pytest.raises(UnknownLabel) as err:
        _labels(tmp_path, [(0.0, 1.0, "grasp")])
    assert err.value.row == 2 and err.value.name == "grasp"


def test_overlap_after_rounding(tmp_path):
    with pytest.raises(OverlapAfterRounding) as err:
        _labels(tmp_path, [(0.0, 1.003, "reach"), (1.0, 2.0, "idle")])
    assert (err.value.i, err.value.j) == (2, 3)


def test_sub_sample_overhang_is_not_an_overlap(tmp_path):
    segs = _labels(tmp_path, [(0.0, 1.0004, "reach"), (1.0, 2.0, "idle")])
    assert segs[0].end == segs[1].start == 240


def test_labels_filtered_by_recording(tmp_path):
    write_labels([(0.0, 1.0, "reach", "S01", "T01"), (0.0, 1.0, "idle", "S01", "T02")],
                 tmp_path / "labels.csv")
    segs = read_labels(tmp_path / "labels.csv", make_recording(480, subject="S01", trial="T02"))
    assert [s.label for s in segs] == [PrimitiveLabel.IDLE]


def test_label_beyond_recording(tmp_path):
    with pytest.raises(ValidationError):
        _labels(tmp_path, [(0.0, 3.0, "reach")], T=480)


def test_label_header_checked(tmp_path):
    (tmp_path / "labels.csv").write_text("a,b\n")
    with pytest.raises(MalformedHeader):
        read_labels(tmp_path / "labels.csv", make_recording(10))
    assert LABEL_HEADER[0] == "start_t"


def test_dataset_round_trip(tmp_path, small_dataset):
    small = Dataset(small_dataset.recordings[:2])
    write_dataset(small, tmp_path)
    back = read_dataset(tmp_path, RATE)
    assert len(back) == 2
    for (r0, s0), (r1, s1) in zip(small, back):
        assert s0 == s1
        assert (r0.subject_id, r0.trial_id) == (r1.subject_id, r1.trial_id)
        np.testing.assert_allclose(r1.samples, r0.samples, rtol=5e-9, atol=1e-12)


def test_dataset_missing_sensor_file(tmp_path):
    write_labels([(0.0, 1.0, "reach", "S09", "T01")], tmp_path / "labels.csv")
    with pytest.raises(IoError):
        read_dataset(tmp_path)


# reports --------------------------------------------------------------------

def _report():
    algs = ["lda", "nbc", "svm", "knn"]
    prims = ["reach", "transport", "reposition", "idle"]
    roc = {a: {p: {"fpr": [0.0, 0.5, 1.0], "tpr": [0.0, 1.0, 1.0], "threshold": [math.inf, 0.3, -1.0]}
               for p in prims} for a in algs}
    ops = {a: {p: {"fpr": 0.5, "tpr": 1.0, "threshold": 0.3} for p in prims} for a in algs}
    return EvalReport(config={"seed": 1}, algorithms=algs, roc=roc, operating_points=ops,
                      overall_ppv={a: {"mean": 0.9, "std": 0.01} for a in algs})


def test_report_round_trip(tmp_path):
    rep = _report()
    js, csv_path = write_report(rep, tmp_path / "report.json")
    assert js.exists() and csv_path.exists() and csv_path == roc_csv_path(js)
    assert read_report(js) == rep


def test_report_roc_blocks(tmp_path):
    _, csv_path = write_report(_report(), tmp_path / "report.json")
    blocks = read_roc_csv(csv_path)
    assert len(blocks) == 16
    assert np.isinf(blocks[("lda", "reach")][0, 2])


def test_report_minimal_round_trip(tmp_path):
    write_report(EvalReport(), tmp_path / "r.json")
    assert read_report(tmp_path / "r.json") == EvalReport()


@pytest.mark.skipif(os.geteuid() == 0, reason="root ignores directory permissions")
def test_report_unwritable_permissions(tmp_path):
    d = tmp_path / "ro"
    d.mkdir(mode=0o500)
    with pytest.raises(IoError):
        write_report(EvalReport(), d / "r.json")


def test_report_unwritable_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(IoError):
        write_report(EvalReport(), blocker / "r.json")
