"""Domain vocabulary: primitive labels, sensor layout, recordings and datasets."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

DEFAULT_RATE_HZ = 240.0
IMU_CHANNELS = ("ax", "ay", "az", "gx", "gy", "gz", "qw", "qx", "qy", "qz")
CHANNELS_PER_SENSOR = len(IMU_CHANNELS)


def round_half_away(x):
    """Round to nearest integer, halves away from zero (platform independent)."""
    x = np.asarray(x, dtype=float)
    out = np.sign(x) * np.floor(np.abs(x) + 0.5)
    return out.astype(np.int64) if out.ndim else int(out)


class PrimitiveLabel(enum.IntEnum):
    REACH = 0
    TRANSPORT = 1
    REPOSITION = 2
    IDLE = 3

    def __str__(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, name: str) -> "PrimitiveLabel":
        """Look up a label by its lowercase name (``"reach"`` etc.)."""
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise KeyError(name) from None


N_CLASSES = len(PrimitiveLabel)
LABEL_NAMES = tuple(str(lab) for lab in PrimitiveLabel)


class SensorSite(enum.IntEnum):
    """Body sites in canonical order: trunk/head, left arm proximal to distal, right arm."""

    HEAD = 0
    STERNUM = 1
    PELVIS = 2
    L_SCAPULA = 3
    L_ARM = 4
    L_FOREARM = 5
    L_HAND = 6
    R_SCAPULA = 7
    R_ARM = 8
    R_FOREARM = 9
    R_HAND = 10

    @property
    def label(self) -> str:
        return _SITE_LABELS[self]

    @classmethod
    def parse(cls, name: str) -> "SensorSite":
        key = name.strip()
        for site, lab in _SITE_LABELS.items():
            if lab == key or site.name == key.upper():
                return site
        raise KeyError(name)


_SITE_LABELS = {
    SensorSite.HEAD: "Head",
    SensorSite.STERNUM: "Sternum",
    SensorSite.PELVIS: "Pelvis",
    SensorSite.L_SCAPULA: "LScapula",
    SensorSite.L_ARM: "LArm",
    SensorSite.L_FOREARM: "LForearm",
    SensorSite.L_HAND: "LHand",
    SensorSite.R_SCAPULA: "RScapula",
    SensorSite.R_ARM: "RArm",
    SensorSite.R_FOREARM: "RForearm",
    SensorSite.R_HAND: "RHand",
}
SITE_NAMES = tuple(_SITE_LABELS[s] for s in SensorSite)
N_SITES = len(SensorSite)
N_COLUMNS = N_SITES * CHANNELS_PER_SENSOR


class DataKind(enum.Enum):
    IMU = "imu"
    ACCELEROMETER = "accel"

    @property
    def n_channels(self) -> int:
        return CHANNELS_PER_SENSOR if self is DataKind.IMU else 3

    @classmethod
    def parse(cls, name: str) -> "DataKind":
        key = name.strip().lower()
        if key in ("imu",):
            return cls.IMU
        if key in ("accel", "accelerometer", "acc"):
            return cls.ACCELEROMETER
        raise KeyError(name)


@dataclass(frozen=True)
class SensorConfig:
    """A set of body sites plus the data kind read from each.

    Sites are normalized into canonical order on construction.
    """

    sites: tuple[SensorSite, ...]
    kind: DataKind = DataKind.IMU

    def __post_init__(self):
        sites = tuple(SensorSite(s) if not isinstance(s, str) else SensorSite.parse(s)
                      for s in self.sites)
        if not sites:
            raise ValueError("sensor config needs at least one site")
        if len(set(sites)) != len(sites):
            raise ValueError(f"duplicate sites in {[s.label for s in sites]}")
        object.__setattr__(self, "sites", tuple(sorted(sites)))
        if isinstance(self.kind, str):
            object.__setattr__(self, "kind", DataKind.parse(self.kind))

    @classmethod
    def all_sites(cls, kind: DataKind = DataKind.IMU) -> "SensorConfig":
        return cls(tuple(SensorSite), kind)

    @classmethod
    def from_names(cls, names: Iterable[str], kind: DataKind | str = DataKind.IMU) -> "SensorConfig":
        return cls(tuple(SensorSite.parse(n) for n in names), kind)

    def with_kind(self, kind: DataKind) -> "SensorConfig":
        return SensorConfig(self.sites, kind)

    @property
    def site_names(self) -> tuple[str, ...]:
        return tuple(s.label for s in self.sites)

    def __str__(self) -> str:
        return f"{'+'.join(self.site_names)}/{self.kind.value}"


def channel_columns(config: SensorConfig) -> np.ndarray:
    """Column indices of ``config`` within the 110-wide recording matrix."""
    per = config.kind.n_channels
    cols = [int(site) * CHANNELS_PER_SENSOR + c for site in config.sites for c in range(per)]
    return np.asarray(cols, dtype=np.intp)


def channel_names(config: SensorConfig) -> list[str]:
    per = config.kind.n_channels
    return [f"{site.label}.{IMU_CHANNELS[c]}" for site in config.sites for c in range(per)]


@dataclass(frozen=True)
class LabeledSegment:
    """Half-open sample interval ``[start, end)`` carrying one primitive label."""

    start: int
    end: int
    label: PrimitiveLabel

    def __post_init__(self):
        object.__setattr__(self, "label", PrimitiveLabel(self.label))

    def __len__(self) -> int:
        return self.end - self.start


@dataclass(eq=False)
class Recording:
    samples: np.ndarray
    timestamps: np.ndarray
    sample_rate_hz: float = DEFAULT_RATE_HZ
    subject_id: str = ""
    trial_id: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        self.timestamps = np.asarray(self.timestamps, dtype=float)

    @classmethod
    def from_samples(cls, samples, sample_rate_hz=DEFAULT_RATE_HZ, subject_id="", trial_id="",
                     t0=0.0) -> "Recording":
        samples = np.asarray(samples, dtype=float)
        t = t0 + np.arange(samples.shape[0]) / sample_rate_hz
        return cls(samples, t, sample_rate_hz, subject_id, trial_id)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def key(self) -> str:
        return f"{self.subject_id}/{self.trial_id}"

    def __eq__(self, other):
        if not isinstance(other, Recording):
            return NotImplemented
        return (self.subject_id == other.subject_id and self.trial_id == other.trial_id
                and self.sample_rate_hz == other.sample_rate_hz
                and np.array_equal(self.timestamps, other.timestamps)
                and np.array_equal(self.samples, other.samples, equal_nan=True))


@dataclass
class Dataset:
    """Recordings, each paired with its sorted, non-overlapping labeled segments.

    Segments are addressed by a global id: their position when iterating
    recordings in order and segments within each recording in order.
    """

    recordings: list[tuple[Recording, list[LabeledSegment]]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.recordings)

    def __iter__(self):
        return iter(self.recordings)

    def iter_segments(self) -> Iterator[tuple[int, int, LabeledSegment]]:
        """Yield ``(global_id, recording_index, segment)``."""
        gid = 0
        for r, (_, segs) in enumerate(self.recordings):
            for seg in segs:
                yield gid, r, seg
                gid += 1

    @property
    def n_segments(self) -> int:
        return sum(len(segs) for _, segs in self.recordings)

    def segment_labels(self) -> np.ndarray:
        return np.fromiter((int(s.label) for _, _, s in self.iter_segments()), dtype=np.intp,
                           count=self.n_segments)

    def segment_offsets(self) -> np.ndarray:
        """Global id of the first segment of each recording."""
        counts = [len(segs) for _, segs in self.recordings]
        return np.concatenate([[0], np.cumsum(counts)[:-1]]).astype(np.intp) if counts else np.zeros(0, np.intp)

    def label_counts(self) -> dict[PrimitiveLabel, int]:
        labels = self.segment_labels()
        return {lab: int(np.sum(labels == lab)) for lab in PrimitiveLabel}

    def groups_by_label(self) -> dict[PrimitiveLabel, np.ndarray]:
        labels = self.segment_labels()
        return {lab: np.flatnonzero(labels == lab) for lab in PrimitiveLabel}


def validate_dataset(dataset: Dataset, require_all_labels: bool = False,
                     check_quaternions: bool = False) -> list[str]:
    """Return a list of human-readable invariant violations (empty when valid)."""
    problems: list[str] = []
    for r, (rec, segs) in enumerate(dataset.recordings):
        rid = rec.key or f"#{r}"
        T = rec.samples.shape[0] if rec.samples.ndim == 2 else 0
        if rec.samples.ndim != 2 or rec.samples.shape[1] != N_COLUMNS:
            problems.append(f"{rid}: sample matrix shape {rec.samples.shape}, expected (T, {N_COLUMNS})")
        if rec.sample_rate_hz <= 0:
            problems.append(f"{rid}: non-positive sample rate {rec.sample_rate_hz}")
        elif rec.timestamps.shape != (T,):
            problems.append(f"{rid}: {rec.timestamps.shape[0]} timestamps for {T} samples")
        elif T > 1:
            gaps = np.diff(rec.timestamps)
            bad = np.flatnonzero(np.abs(gaps - 1.0 / rec.sample_rate_hz) > 1e-6)
            if bad.size:
                problems.append(f"{rid}: irregular timestamp spacing at index {int(bad[0]) + 1}")
        if check_quaternions and rec.samples.ndim == 2 and rec.samples.shape[1] == N_COLUMNS:
            q = rec.samples.reshape(T, N_SITES, CHANNELS_PER_SENSOR)[:, :, 6:]
            norms = np.linalg.norm(q, axis=2)
            bad = np.argwhere(np.abs(norms - 1.0) > 1e-3)
            if bad.size:
                i, s = bad[0]
                problems.append(f"{rid}: quaternion of {SITE_NAMES[s]} not unit norm at index {int(i)}")
        prev = None
        for i, seg in enumerate(segs):
            if not (0 <= seg.start < seg.end <= T):
                problems.append(f"{rid}: segment {i} [{seg.start}, {seg.end}) out of range for T={T}")
            if prev is not None:
                j, p = prev
                if seg.start < p.end:
                    if seg.start >= p.start:
                        problems.append(f"{rid}: segments {j} [{p.start}, {p.end}) and {i} "
                                        f"[{seg.start}, {seg.end}) overlap")
                    else:
                        problems.append(f"{rid}: segments {j} and {i} not sorted")
            prev = (i, seg)
    if require_all_labels:
        counts = dataset.label_counts()
        for lab, n in counts.items():
            if n == 0:
                problems.append(f"dataset: no segments labeled {lab}")
    return problems
