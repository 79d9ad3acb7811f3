"""Sliding windows, z-score normalization and the eight per-channel window statistics."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .core import (
    DEFAULT_RATE_HZ,
    N_CLASSES,
    N_COLUMNS,
    Dataset,
    SensorConfig,
    channel_columns,
    channel_names,
    round_half_away,
)
from .errors import RecordingTooShort, TooFewSamples, ValidationError, WindowTooShort

STAT_NAMES = ("mean", "std", "min", "max", "entropy", "skewness", "energy", "rms")
N_STATS = len(STAT_NAMES)
STD_FLOOR = 1e-9
POWER_FLOOR = 1e-12
MIN_WINDOW = 8


@dataclass(frozen=True)
class WindowSpec:
    width_s: float = 0.25
    stride_s: float = 0.1

    def __post_init__(self):
        if not 0 < self.stride_s <= self.width_s:
            raise ValueError(f"need 0 < stride ({self.stride_s}) <= width ({self.width_s})")

    def samples(self, rate_hz: float = DEFAULT_RATE_HZ) -> tuple[int, int]:
        """Window width and stride in samples at ``rate_hz``."""
        w = round_half_away(self.width_s * rate_hz)
        s = max(1, round_half_away(self.stride_s * rate_hz))
        if w < MIN_WINDOW:
            raise WindowTooShort(f"window of {w} samples; at least {MIN_WINDOW} required")
        return w, s


def window_count(n_samples: int, spec: WindowSpec = WindowSpec(), rate_hz: float = DEFAULT_RATE_HZ) -> int:
    w, s = spec.samples(rate_hz)
    if n_samples < w:
        raise RecordingTooShort(f"{n_samples} samples is shorter than one {w}-sample window")
    return (n_samples - w) // s + 1


@dataclass(frozen=True)
class NormStats:
    mean: np.ndarray
    std: np.ndarray

    def apply(self, samples: np.ndarray) -> np.ndarray:
        return (samples - self.mean) / self.std


def fit_norm(samples) -> NormStats:
    """Column means and sample standard deviations (floored at 1e-9)."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    if samples.shape[0] < 2:
        raise TooFewSamples(f"need at least 2 samples per column, got {samples.shape[0]}")
    mean = samples.mean(axis=0)
    std = np.maximum(samples.std(axis=0, ddof=1), STD_FLOOR)
    return NormStats(mean, std)


def _raw_moments(windows: np.ndarray) -> np.ndarray:
    """Normalization-independent pieces of the window statistics.

    Returns ``(..., 7)``: mean, population variance, min, max, spectral
    entropy, unthresholded skewness and positive-frequency spectral power.
    """
    w = windows.shape[-1]
    out = np.empty(windows.shape[:-1] + (7,))
    mean = windows.mean(axis=-1)
    dev = windows - mean[..., None]
    m2 = np.einsum("...i,...i->...", dev, dev) / w
    m3 = np.einsum("...i,...i,...i->...", dev, dev, dev) / w
    out[..., 0] = mean
    out[..., 1] = m2
    out[..., 2] = windows.min(axis=-1)
    out[..., 3] = windows.max(axis=-1)
    spec = np.fft.rfft(windows, axis=-1)[..., 1:]
    power = spec.real ** 2 + spec.imag ** 2
    total = power.sum(axis=-1)
    p = power / np.where(total > 0, total, 1.0)[..., None]
    plogp = p * np.log2(np.where(p > 0, p, 1.0))
    out[..., 4] = np.maximum(-plogp.sum(axis=-1), 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out[..., 5] = np.where(m2 > 0, m3 / np.where(m2 > 0, m2, 1.0) ** 1.5, 0.0)
    out[..., 6] = total
    return out


def _finish(raw: np.ndarray, w: int, center=0.0, scale=1.0) -> np.ndarray:
    """Window statistics of ``(x - center) / scale`` from raw moments of ``x``."""
    out = np.empty(raw.shape[:-1] + (N_STATS,))
    scale = np.asarray(scale, dtype=float)
    mean = raw[..., 0]
    m2 = raw[..., 1] / scale ** 2
    total = raw[..., 6] / scale ** 2
    out[..., 0] = (mean - center) / scale
    out[..., 1] = np.sqrt(m2 * (w / (w - 1)))
    out[..., 2] = (raw[..., 2] - center) / scale
    out[..., 3] = (raw[..., 3] - center) / scale
    out[..., 4] = np.where(total < POWER_FLOOR, 0.0, raw[..., 4])
    out[..., 5] = np.where(m2 < POWER_FLOOR, 0.0, raw[..., 5])
    out[..., 6] = total / w
    out[..., 7] = np.sqrt(m2 + ((mean - center) / scale) ** 2)
    return out


def window_statistics(windows: np.ndarray) -> np.ndarray:
    """Statistics for a stack of windows.

    ``windows`` has shape ``(..., w)``; the result has shape ``(..., 8)`` in
    ``STAT_NAMES`` order. Entropy and energy are taken over the positive
    frequency bins of the real FFT (DC excluded).
    """
    windows = np.asarray(windows, dtype=float)
    w = windows.shape[-1]
    if w < MIN_WINDOW:
        raise WindowTooShort(f"window of {w} samples; at least {MIN_WINDOW} required")
    return _finish(_raw_moments(windows), w)


def extract_features(window) -> np.ndarray:
    """Feature vector of one normalized ``[w x C]`` window, channel-major."""
    window = np.asarray(window, dtype=float)
    if window.ndim == 1:
        window = window[:, None]
    if np.isnan(window).any():
        raise ValidationError("window contains NaN")
    return window_statistics(window.T).reshape(-1)


def feature_names(config: SensorConfig) -> list[str]:
    return [f"{ch}.{stat}" for ch in channel_names(config) for stat in STAT_NAMES]


@dataclass
class WindowIndex:
    """Labeled windows of a dataset: where they start and which segment owns them."""

    recording: np.ndarray
    start: np.ndarray
    label: np.ndarray
    segment: np.ndarray
    width: int
    stride: int

    def __len__(self) -> int:
        return self.start.shape[0]


def index_windows(dataset: Dataset, spec: WindowSpec = WindowSpec()) -> WindowIndex:
    """Assign each window the label holding most of its samples.

    Label ties go to the label of the segment containing the window's
    center sample (lowest code if the center is unlabeled). Within the
    winning label the window belongs to the segment with most samples,
    again preferring the one containing the center. Windows without any
    labeled sample are dropped.
    """
    recs, starts, labels, segs = [], [], [], []
    width = stride = None
    offset = 0
    for r, (rec, segments) in enumerate(dataset.recordings):
        w, s = spec.samples(rec.sample_rate_hz)
        if width is None:
            width, stride = w, s
        elif (w, s) != (width, stride):
            raise ValidationError("recordings with different sample rates cannot share one window grid")
        T = rec.n_samples
        if not segments or T < w:
            offset += len(segments)
            continue
        seg_start = np.array([sg.start for sg in segments])
        seg_end = np.array([sg.end for sg in segments])
        seg_lab = np.array([int(sg.label) for sg in segments])
        for a in range(0, T - w + 1, s):
            b = a + w
            lo = np.searchsorted(seg_end, a, side="right")
            hi = np.searchsorted(seg_start, b, side="left")
            if lo >= hi:
                continue
            cand = np.arange(lo, hi)
            overlap = np.minimum(seg_end[cand], b) - np.maximum(seg_start[cand], a)
            keep = overlap > 0
            cand, overlap = cand[keep], overlap[keep]
            if cand.size == 0:
                continue
            center = a + w // 2
            per_label = np.bincount(seg_lab[cand], weights=overlap, minlength=N_CLASSES)
            tied = np.flatnonzero(per_label == per_label.max())
            owner = cand[(seg_start[cand] <= center) & (center < seg_end[cand])]
            if tied.size > 1 and owner.size and seg_lab[owner[0]] in tied:
                label = seg_lab[owner[0]]
            else:
                label = tied[0]
            mine = seg_lab[cand] == label
            c2, o2 = cand[mine], overlap[mine]
            best = c2[o2 == o2.max()]
            if best.size > 1 and owner.size and owner[0] in best:
                seg = owner[0]
            else:
                seg = best[0]
            recs.append(r)
            starts.append(a)
            labels.append(label)
            segs.append(offset + seg)
        offset += len(segments)
    if width is None:
        width, stride = spec.samples(DEFAULT_RATE_HZ)
    as_int = lambda v: np.asarray(v, dtype=np.intp)
    return WindowIndex(as_int(recs), as_int(starts), as_int(labels), as_int(segs), width, stride)


@dataclass
class FeatureMatrix:
    """Windows-by-features matrix with per-row provenance."""

    X: np.ndarray
    labels: np.ndarray
    segments: np.ndarray
    config: SensorConfig | None = None
    spec: WindowSpec | None = None
    feature_names: list[str] = field(default_factory=list)
    recordings: np.ndarray | None = None
    starts: np.ndarray | None = None

    @property
    def n_windows(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def rows(self, mask) -> "FeatureMatrix":
        pick = lambda a: None if a is None else a[mask]
        return FeatureMatrix(self.X[mask], self.labels[mask], self.segments[mask], self.config,
                             self.spec, self.feature_names, pick(self.recordings), pick(self.starts))

    def select(self, config: SensorConfig) -> "FeatureMatrix":
        """Restrict the columns to a sub-configuration of the one featurized."""
        if self.config is None:
            raise ValidationError("feature matrix has no channel layout")
        have = {int(c): i for i, c in enumerate(channel_columns(self.config))}
        try:
            pos = np.array([have[int(c)] for c in channel_columns(config)])
        except KeyError as exc:
            raise ValidationError(f"{config} is not contained in {self.config}") from exc
        cols = (pos[:, None] * N_STATS + np.arange(N_STATS)).reshape(-1)
        return FeatureMatrix(self.X[:, cols], self.labels, self.segments, config, self.spec,
                             feature_names(config), self.recordings, self.starts)

    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["window", "segment", "label"] + [f"f{i}" for i in range(self.n_features)])
            for i in range(self.n_windows):
                writer.writerow([i, int(self.segments[i]), int(self.labels[i])]
                                + [f"{v:.9g}" for v in self.X[i]])

    @classmethod
    def from_csv(cls, path) -> "FeatureMatrix":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 3:], data[:, 2].astype(np.intp), data[:, 1].astype(np.intp))


@dataclass
class WindowMoments:
    """Raw (unnormalized) per-window moments of a set of recording columns.

    Because z-scoring is affine per channel, features under any
    normalization follow from these without revisiting the samples.
    """

    index: WindowIndex
    columns: np.ndarray
    raw: np.ndarray

    def features(self, config: SensorConfig, norm: NormStats | None = None) -> np.ndarray:
        cols = channel_columns(config)
        pos = np.searchsorted(self.columns, cols)
        if np.any(pos >= self.columns.size) or np.any(self.columns[np.minimum(pos, self.columns.size - 1)] != cols):
            raise ValidationError(f"moments were not computed for all channels of {config}")
        raw = self.raw[:, pos]
        if norm is None:
            X = _finish(raw, self.index.width)
        else:
            X = _finish(raw, self.index.width, norm.mean, norm.std)
        return X.reshape(raw.shape[0], cols.size * N_STATS)


def window_moments(dataset: Dataset, spec: WindowSpec = WindowSpec(), index: WindowIndex | None = None,
                   columns=None) -> WindowMoments:
    """Compute raw window moments for ``columns`` (default: all 110)."""
    if index is None:
        index = index_windows(dataset, spec)
    cols = np.arange(N_COLUMNS) if columns is None else np.unique(np.asarray(columns, dtype=np.intp))
    raw = np.empty((len(index), cols.size, 7))
    w = index.width
    for r in np.unique(index.recording):
        rows = np.flatnonzero(index.recording == r)
        data = dataset.recordings[r][0].samples[:, cols]
        views = sliding_window_view(data, w, axis=0)[index.start[rows]]
        raw[rows] = _raw_moments(views)
    return WindowMoments(index, cols, raw)


def featurize(dataset: Dataset, config: SensorConfig, spec: WindowSpec = WindowSpec(),
              norm: NormStats | None = None, index: WindowIndex | None = None,
              moments: WindowMoments | None = None) -> FeatureMatrix:
    """Normalize the configured channels and compute window features.

    ``norm`` must have been fitted on the same channel subset; when omitted
    the channels are used raw. Precomputed ``index`` or ``moments`` skip
    the labeling and moment passes.
    """
    cols = channel_columns(config)
    if norm is not None and np.shape(norm.mean) != (cols.size,):
        raise ValidationError(f"normalization fitted on {np.size(norm.mean)} channels, config has {cols.size}")
    if moments is None:
        moments = window_moments(dataset, spec, index, cols)
    index = moments.index
    X = moments.features(config, norm)
    if not np.all(np.isfinite(X)):
        raise ValidationError(f"non-finite features for {config}; channels missing from the recordings?")
    return FeatureMatrix(X, index.label.copy(), index.segment.copy(), config, spec,
                         feature_names(config), index.recording.copy(), index.start.copy())


def segment_samples(dataset: Dataset, config: SensorConfig, segment_ids=None) -> np.ndarray:
    """Stack the raw configured channels of the selected segments."""
    cols = channel_columns(config)
    wanted = None if segment_ids is None else set(int(i) for i in segment_ids)
    chunks = []
    for gid, r, seg in dataset.iter_segments():
        if wanted is None or gid in wanted:
            chunks.append(dataset.recordings[r][0].samples[seg.start:seg.end][:, cols])
    if not chunks:
        return np.empty((0, cols.size))
    return np.concatenate(chunks)


class WindowFeaturizer(TransformerMixin, BaseEstimator):
    """Fit z-score statistics on training segments, then featurize datasets.

    Parameters
    ----------
    config : SensorConfig, default all 11 sites with IMU channels
    window : WindowSpec, default 0.25 s windows sliding by 0.1 s
    """

    def __init__(self, config: SensorConfig | None = None, window: WindowSpec | None = None):
        self.config = config
        self.window = window

    def _config(self):
        return self.config if self.config is not None else SensorConfig.all_sites()

    def _window(self):
        return self.window if self.window is not None else WindowSpec()

    def fit(self, dataset: Dataset, y=None, segment_ids=None):
        self.norm_ = fit_norm(segment_samples(dataset, self._config(), segment_ids))
        return self

    def transform(self, dataset: Dataset, moments: WindowMoments | None = None) -> FeatureMatrix:
        check_is_fitted(self, "norm_")
        return featurize(dataset, self._config(), self._window(), self.norm_, moments=moments)
