"""Text formats: long-format sensor CSV, label CSV, dataset directories, reports."""
from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np
import pandas as pd

from .core import (
    CHANNELS_PER_SENSOR,
    DEFAULT_RATE_HZ,
    IMU_CHANNELS,
    N_SITES,
    SITE_NAMES,
    Dataset,
    LabeledSegment,
    PrimitiveLabel,
    Recording,
    round_half_away,
)
from .errors import (
    IoError,
    MalformedHeader,
    MissingSensorAtTimestamp,
    NonMonotoneTimestamps,
    OverlapAfterRounding,
    UnknownLabel,
    UnknownSensor,
    ValidationError,
)
from .report import EvalReport

SENSOR_HEADER = ("t", "sensor") + IMU_CHANNELS
LABEL_HEADER = ("start_t", "end_t", "primitive", "subject", "trial")
ROC_HEADER = ("algorithm", "primitive", "fpr", "tpr", "threshold")
SPACING_TOL = 0.01  # allowed timestamp jitter, as a fraction of the sample period
_SITE_CODE = {name: i for i, name in enumerate(SITE_NAMES)}


def _check_header(path: Path, expected: tuple[str, ...]) -> None:
    try:
        with path.open(newline="") as fh:
            first = fh.readline().rstrip("\r\n")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if tuple(first.split(",")) != expected:
        raise MalformedHeader(f"{path}: header {first!r}, expected {','.join(expected)!r}")


def _fmt(v: float) -> str:
    return "" if np.isnan(v) else f"{v:.9g}"


# recordings ----------------------------------------------------------------

def write_recording(recording: Recording, path) -> None:
    """Write one row per sensor per timestamp.

    Timestamps are written exactly; channel values with 9 significant digits.

    NaN channels (e.g. accelerometer-only exports) are left blank.
    """
    path = Path(path)
    T = recording.n_samples
    data = recording.samples.reshape(T * N_SITES, CHANNELS_PER_SENSOR)
    t = np.repeat(recording.timestamps, N_SITES)
    names = SITE_NAMES * T
    fmt = "%r,%s," + ",".join(["%.9g"] * CHANNELS_PER_SENSOR) + "\n"
    body = "".join([fmt % (ti, name, *row) for ti, name, row in zip(t.tolist(), names, data.tolist())])
    if np.isnan(data).any():
        body = body.replace("nan", "")
    try:
        with path.open("w", newline="") as fh:
            fh.write(",".join(SENSOR_HEADER) + "\n")
            fh.write(body)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_recording(path, sample_rate_hz: float = DEFAULT_RATE_HZ, subject_id: str = "",
                   trial_id: str = "") -> Recording:
    """Parse a long-format sensor CSV into a ``T x 110`` recording.

    Rows sharing a timestamp are gathered into one sample; every timestamp
    must list all 11 sensors, timestamps must be non-decreasing in the file
    and spaced one sample period apart. Row numbers in errors are file line
    numbers (the header is line 1).
    """
    path = Path(path)
    _check_header(path, SENSOR_HEADER)
    try:
        frame = pd.read_csv(path, dtype={"sensor": str}, float_precision="round_trip", keep_default_na=False,
                            na_values={c: [""] for c in ("t",) + IMU_CHANNELS})
    except (OSError, pd.errors.ParserError, ValueError) as exc:
        raise ValidationError(f"{path}: unreadable sensor table: {exc}") from exc
    if frame.empty:
        raise ValidationError(f"{path}: no data rows")
    t = frame["t"].to_numpy(dtype=float)
    line = np.arange(frame.shape[0]) + 2
    bad = np.flatnonzero(~np.isfinite(t) | (t < 0))
    if bad.size:
        raise NonMonotoneTimestamps(int(line[bad[0]]), "missing or negative timestamp")
    down = np.flatnonzero(np.diff(t) < 0)
    if down.size:
        raise NonMonotoneTimestamps(int(line[down[0] + 1]), f"t={t[down[0] + 1]} after t={t[down[0]]}")
    names = frame["sensor"].astype(str).str.strip()
    codes = names.map(_SITE_CODE)
    if codes.isna().any():
        i = int(np.flatnonzero(codes.isna().to_numpy())[0])
        raise UnknownSensor(f"{path}: unknown sensor {names.iloc[i]!r} at line {line[i]}")
    codes = codes.to_numpy(dtype=np.intp)

    stamps, t_idx = np.unique(t, return_inverse=True)
    T = stamps.size
    seen = np.zeros((T, N_SITES), dtype=np.int64)
    np.add.at(seen, (t_idx, codes), 1)
    dup = np.argwhere(seen > 1)
    if dup.size:
        ti, s = dup[0]
        raise ValidationError(f"{path}: sensor {SITE_NAMES[s]} repeated at t={stamps[ti]}")
    missing = np.argwhere(seen == 0)
    if missing.size:
        ti, s = missing[0]
        raise MissingSensorAtTimestamp(float(stamps[ti]), SITE_NAMES[s])
    if T > 1:
        period = 1.0 / sample_rate_hz
        off = np.flatnonzero(np.abs(np.diff(stamps) - period) > SPACING_TOL * period)
        if off.size:
            first_row = int(line[np.flatnonzero(t_idx == off[0] + 1)[0]])
            raise NonMonotoneTimestamps(first_row, f"gap of {stamps[off[0] + 1] - stamps[off[0]]:.9g} s "
                                                   f"at {sample_rate_hz} Hz")

    values = frame[list(IMU_CHANNELS)].to_numpy(dtype=float)
    samples = np.empty((T, N_SITES, CHANNELS_PER_SENSOR))
    samples[t_idx, codes] = values
    return Recording(samples.reshape(T, N_SITES * CHANNELS_PER_SENSOR), stamps, sample_rate_hz,
                     subject_id, trial_id)


# labels --------------------------------------------------------------------

def labels_to_rows(recording: Recording, segments) -> list[tuple]:
    rate = recording.sample_rate_hz
    return [(seg.start / rate, seg.end / rate, str(seg.label), recording.subject_id, recording.trial_id)
            for seg in segments]


def write_labels(rows, path) -> None:
    """Write label rows ``(start_t, end_t, primitive, subject, trial)``."""
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(LABEL_HEADER)
            for s, e, prim, subj, trial in rows:
                w.writerow([_fmt(s), _fmt(e), prim, subj, trial])
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _read_label_rows(path: Path) -> list[tuple[int, dict]]:
    _check_header(path, LABEL_HEADER)
    try:
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            return [(i + 2, row) for i, row in enumerate(reader)]
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc


def read_labels(path, recording: Recording) -> list[LabeledSegment]:
    """Convert the label rows of ``recording`` into sample-index segments.

    Times are seconds from the recording's first sample and map to indices
    by ``round(t * rate)``, halves away from zero. When the recording has a
    subject or trial id only rows carrying the same ids are used. Row
    numbers in errors are file line numbers.
    """
    path = Path(path)
    rows = _read_label_rows(path)
    if recording.subject_id or recording.trial_id:
        rows = [(ln, r) for ln, r in rows
                if r["subject"] == recording.subject_id and r["trial"] == recording.trial_id]
    return _segments_from_rows(rows, recording)


def _segments_from_rows(rows, recording: Recording) -> list[LabeledSegment]:
    rate = recording.sample_rate_hz
    T = recording.n_samples
    segments: list[LabeledSegment] = []
    lines: list[int] = []
    prev_start = -np.inf
    for ln, row in rows:
        try:
            start_t = float(row["start_t"])
            end_t = float(row["end_t"])
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"line {ln}: non-numeric time") from exc
        try:
            label = PrimitiveLabel.parse(row["primitive"])
        except KeyError:
            raise UnknownLabel(ln, row["primitive"]) from None
        if not 0 <= start_t < end_t:
            raise ValidationError(f"line {ln}: need 0 <= start_t < end_t, got ({start_t}, {end_t})")
        if start_t < prev_start:
            raise ValidationError(f"line {ln}: label rows not sorted by start_t")
        prev_start = start_t
        start = round_half_away(start_t * rate)
        end = round_half_away(end_t * rate)
        if end <= start:
            raise ValidationError(f"line {ln}: interval shorter than one sample at {rate} Hz")
        if end > T:
            raise ValidationError(f"line {ln}: end index {end} beyond recording length {T}")
        if segments and start < segments[-1].end:
            raise OverlapAfterRounding(lines[-1], ln)
        segments.append(LabeledSegment(start, end, label))
        lines.append(ln)
    return segments


# datasets ------------------------------------------------------------------

def _sensor_file(subject: str, trial: str, r: int) -> str:
    key = f"{subject}_{trial}" if subject or trial else f"rec{r:03d}"
    return f"sensors_{key}.csv"


def write_dataset(dataset: Dataset, out_dir) -> list[Path]:
    """Write ``sensors_<subject>_<trial>.csv`` per recording plus one ``labels.csv``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {out}: {exc}") from exc
    written, rows = [], []
    for r, (rec, segs) in enumerate(dataset.recordings):
        p = out / _sensor_file(rec.subject_id, rec.trial_id, r)
        write_recording(rec, p)
        written.append(p)
        rows.extend(labels_to_rows(rec, segs))
    write_labels(rows, out / "labels.csv")
    written.append(out / "labels.csv")
    return written


def read_dataset(in_dir, sample_rate_hz: float = DEFAULT_RATE_HZ) -> Dataset:
    """Inverse of :func:`write_dataset`; recordings ordered by first label row."""
    src = Path(in_dir)
    rows = _read_label_rows(src / "labels.csv")
    order: list[tuple[str, str]] = []
    grouped: dict[tuple[str, str], list] = {}
    for ln, row in rows:
        key = (row["subject"], row["trial"])
        if key not in grouped:
            grouped[key] = []
            order.append(key)
        grouped[key].append((ln, row))
    recordings = []
    for r, key in enumerate(order):
        path = src / _sensor_file(key[0], key[1], r)
        if not path.exists():
            raise IoError(f"labels reference {key[0]}/{key[1]} but {path.name} is missing")
        rec = read_recording(path, sample_rate_hz, *key)
        recordings.append((rec, _segments_from_rows(grouped[key], rec)))
    return Dataset(recordings)


# reports -------------------------------------------------------------------

def roc_csv_path(json_path) -> Path:
    p = Path(json_path)
    return p.with_name(p.stem + "_roc.csv")


def write_report(report: EvalReport, path) -> tuple[Path, Path]:
    """Write the JSON report and a sibling ``<stem>_roc.csv`` of ROC points."""
    path = Path(path)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ROC_HEADER)
    for alg, curves in report.roc.items():
        for prim, c in curves.items():
            for f, t, th in zip(c["fpr"], c["tpr"], c["threshold"]):
                w.writerow([alg, prim, repr(float(f)), repr(float(t)), repr(float(th))])
    csv_path = roc_csv_path(path)
    try:
        path.write_text(report.to_json())
        csv_path.write_text(buf.getvalue())
    except OSError as exc:
        raise IoError(f"cannot write report to {path}: {exc}") from exc
    return path, csv_path


def read_report(path) -> EvalReport:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return EvalReport.from_json(text)


def read_roc_csv(path) -> dict[tuple[str, str], np.ndarray]:
    """ROC points keyed by ``(algorithm, primitive)`` as ``[n x 3]`` arrays."""
    out: dict[tuple[str, str], list] = {}
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != ROC_HEADER:
            raise MalformedHeader(f"{path}: unexpected ROC header {header}")
        for alg, prim, f, t, th in reader:
            out.setdefault((alg, prim), []).append((float(f), float(t), float(th)))
    return {k: np.array(v) for k, v in out.items()}
