"""Synthetic stand-ins for recorded patient data.

Two generators: a signal-level simulator producing labeled 11-sensor IMU
recordings, and a feature-level sampler drawing primitives from per-label
Gaussian feature moments (used for large timing benchmarks).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .core import (
    CHANNELS_PER_SENSOR,
    DEFAULT_RATE_HZ,
    N_CLASSES,
    N_COLUMNS,
    N_SITES,
    Dataset,
    LabeledSegment,
    PrimitiveLabel,
    Recording,
    SensorSite,
    round_half_away,
)
from .errors import InvalidSpec, LabelTooSmall
from .features import FeatureMatrix

GRAVITY = np.array([0.0, 0.0, 9.81])
DEFAULT_COUNTS = (810, 708, 781, 582)

# displacement gain, rotation gain along the active arm (distal moves most)
_ARM_GAINS = {"Scapula": (0.2, 0.15), "Arm": (0.5, 0.4), "Forearm": (0.8, 0.9), "Hand": (1.0, 1.0)}
_TRUNK = (SensorSite.HEAD, SensorSite.STERNUM, SensorSite.PELVIS)
_TRUNK_GAIN = 0.1


def _side_sites(side: str) -> dict[str, SensorSite]:
    prefix = {"right": "R", "left": "L"}[side]
    return {part: SensorSite.parse(prefix + part) for part in _ARM_GAINS}


@dataclass(frozen=True)
class SignalGenSpec:
    """Parameters of the signal-level simulator.

    ``noise_std`` is the accelerometer noise in m/s^2 (gyro noise is half
    of it in rad/s, quaternion noise 2% of it). ``jitter`` is the relative
    per-segment spread of movement amplitude and direction.
    """

    counts: tuple[int, int, int, int] = DEFAULT_COUNTS
    sample_rate_hz: float = DEFAULT_RATE_HZ
    durations_s: tuple[tuple[float, float], ...] = ((0.5, 1.0), (0.6, 1.2), (0.5, 1.0), (0.5, 1.0))
    noise_std: float = 0.6
    jitter: float = 0.25
    n_recordings: int = 24
    active_side: str = "right"
    seed: int = 0
    window_width_s: float = 0.25

    def validate(self) -> None:
        if len(self.counts) != N_CLASSES or any(int(c) <= 0 for c in self.counts):
            raise InvalidSpec(f"need a positive count for each of {N_CLASSES} primitives, got {self.counts}")
        if len(self.durations_s) != N_CLASSES:
            raise InvalidSpec("need one duration range per primitive")
        for lo, hi in self.durations_s:
            if lo < 2 * self.window_width_s or hi < lo:
                raise InvalidSpec(f"duration range ({lo}, {hi}) must satisfy "
                                  f"{2 * self.window_width_s} <= lo <= hi")
        if self.noise_std < 0 or self.jitter < 0:
            raise InvalidSpec("noise_std and jitter must be non-negative")
        if self.sample_rate_hz <= 0:
            raise InvalidSpec("sample rate must be positive")
        if self.n_recordings < 1:
            raise InvalidSpec("need at least one recording")
        if self.active_side not in ("left", "right"):
            raise InvalidSpec(f"active_side must be 'left' or 'right', not {self.active_side!r}")


def _min_jerk(u):
    """Position, velocity and acceleration of the quintic minimum-jerk profile on [0, 1]."""
    p = 10 * u ** 3 - 15 * u ** 4 + 6 * u ** 5
    v = 30 * u ** 2 - 60 * u ** 3 + 30 * u ** 4
    a = 60 * u - 180 * u ** 2 + 120 * u ** 3
    return p, v, a


def _sustained(u):
    """Cubic profile with a broad parabolic velocity bell."""
    return 3 * u ** 2 - 2 * u ** 3, 6 * u - 6 * u ** 2, 6 - 12 * u


# label -> (profile, displacement direction, rotation axis (body), rotation angle rad, base rotvec)
_TEMPLATES = {
    PrimitiveLabel.REACH: (_min_jerk, (1.0, 0.0, 0.15), (1.0, 0.0, 0.0), 0.6, (0.0, 0.0, 0.0)),
    PrimitiveLabel.TRANSPORT: (_sustained, (0.15, 1.0, 0.1), (0.0, 0.0, 1.0), 0.5, (0.0, 0.4, 0.0)),
    PrimitiveLabel.REPOSITION: (_min_jerk, (-1.0, 0.0, -0.15), (1.0, 0.0, 0.0), -0.6, (0.6, 0.0, 0.0)),
}
_DISTANCE_M = 0.25


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def _perturb_direction(direction, rng, scale):
    if scale == 0:
        return _unit(direction)
    return _unit(_unit(direction) + scale * rng.normal(size=3))


def _sensor_block(n, base: Rotation, axis, angle, dangle, acc_world, rng, noise):
    """Ten channels (acc, gyro, quaternion) of one sensor over ``n`` samples."""
    rot = base * Rotation.from_rotvec(np.outer(angle, axis))
    block = np.empty((n, CHANNELS_PER_SENSOR))
    block[:, 0:3] = rot.apply(acc_world + GRAVITY, inverse=True)
    block[:, 3:6] = np.outer(dangle, axis)
    xyzw = rot.as_quat()
    block[:, 6] = xyzw[:, 3]
    block[:, 7:10] = xyzw[:, :3]
    if noise > 0:
        block[:, 0:3] += rng.normal(0.0, noise, (n, 3))
        block[:, 3:6] += rng.normal(0.0, 0.5 * noise, (n, 3))
        block[:, 6:10] += rng.normal(0.0, 0.02 * noise, (n, 4))
    q = block[:, 6:10]
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    q *= np.where(q[:, :1] < 0, -1.0, 1.0)
    return block


def render_segment(label: PrimitiveLabel, n: int, spec: SignalGenSpec, rng) -> np.ndarray:
    """Sample matrix ``[n x 110]`` for one primitive of ``n`` samples."""
    out = np.empty((n, N_COLUMNS))
    dur = n / spec.sample_rate_hz
    u = np.arange(n) / max(n - 1, 1)
    noise = spec.noise_std
    rest = Rotation.identity()
    active = _side_sites(spec.active_side)
    passive = _side_sites("left" if spec.active_side == "right" else "right")
    sign = 1.0 if spec.active_side == "right" else -1.0

    if label == PrimitiveLabel.IDLE:
        pos_gain = np.zeros(n)
        acc_mag = np.zeros(n)
        ang = np.zeros(n)
        dang = np.zeros(n)
        direction = np.array([1.0, 0.0, 0.0])
        axis = np.array([1.0, 0.0, 0.0])
        base = rest
    else:
        profile, direction, axis, angle, base_vec = _TEMPLATES[label]
        _, v, a = profile(u)
        jit = spec.jitter
        dist = _DISTANCE_M * max(0.2, 1.0 + jit * rng.normal())
        theta = angle * max(0.2, 1.0 + jit * rng.normal())
        direction = _perturb_direction(np.array(direction) * [1.0, sign, 1.0], rng, 0.3 * jit)
        axis = _perturb_direction(axis, rng, 0.3 * jit)
        base_vec = np.asarray(base_vec, dtype=float) * [1.0, sign, sign]
        if jit:
            base_vec = base_vec + 0.1 * jit * rng.normal(size=3)
        base = Rotation.from_rotvec(base_vec)
        p, _, _ = profile(u)
        acc_mag = dist * a / dur ** 2
        ang = theta * p
        dang = theta * v / dur

    for part, site in active.items():
        g_pos, g_rot = _ARM_GAINS[part]
        block = _sensor_block(n, base, axis, g_rot * ang, g_rot * dang,
                              g_pos * np.outer(acc_mag, direction), rng, noise)
        out[:, int(site) * CHANNELS_PER_SENSOR:(int(site) + 1) * CHANNELS_PER_SENSOR] = block
    for site in _TRUNK:
        block = _sensor_block(n, rest, axis, _TRUNK_GAIN * ang, _TRUNK_GAIN * dang,
                              _TRUNK_GAIN * np.outer(acc_mag, direction), rng, noise)
        out[:, int(site) * CHANNELS_PER_SENSOR:(int(site) + 1) * CHANNELS_PER_SENSOR] = block
    zero = np.zeros(n)
    for site in passive.values():
        block = _sensor_block(n, rest, np.array([1.0, 0.0, 0.0]), zero, zero, np.zeros((n, 3)), rng, noise)
        out[:, int(site) * CHANNELS_PER_SENSOR:(int(site) + 1) * CHANNELS_PER_SENSOR] = block
    return out


def gen_signal_dataset(spec: SignalGenSpec = SignalGenSpec()) -> Dataset:
    """Tile rendered primitives back to back into labeled recordings.

    Primitive order is shuffled by ``spec.seed``; each primitive draws its
    duration and noise from its own seeded substream.
    """
    spec.validate()
    order_rng = np.random.default_rng([spec.seed, 0])
    labels = np.concatenate([np.full(int(c), k) for k, c in enumerate(spec.counts)])
    labels = labels[order_rng.permutation(labels.size)]
    groups = np.array_split(np.arange(labels.size), spec.n_recordings)
    rate = spec.sample_rate_hz
    recordings = []
    for r, ids in enumerate(groups):
        if ids.size == 0:
            continue
        blocks, segments, cursor = [], [], 0
        for gid in ids:
            lab = PrimitiveLabel(int(labels[gid]))
            rng = np.random.default_rng([spec.seed, 1, int(gid)])
            lo, hi = spec.durations_s[lab]
            n = max(round_half_away(rng.uniform(lo, hi) * rate), 2)
            blocks.append(render_segment(lab, n, spec, rng))
            segments.append(LabeledSegment(cursor, cursor + n, lab))
            cursor += n
        subject = f"S{r // 4 + 1:02d}"
        trial = f"T{r % 4 + 1:02d}"
        rec = Recording.from_samples(np.concatenate(blocks), rate, subject, trial)
        recordings.append((rec, segments))
    return Dataset(recordings)


@dataclass
class MomentSpec:
    """Per-label feature means/variances and class proportions for the sampler."""

    proportions: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    total: int = 300_000
    seed: int = 0
    feature_names: list[str] = field(default_factory=list)

    def validate(self) -> None:
        p = np.asarray(self.proportions, dtype=float)
        if p.shape != (N_CLASSES,) or np.any(p < 0) or not np.isclose(p.sum(), 1.0):
            raise InvalidSpec("proportions must be 4 non-negative values summing to 1")
        m, v = np.asarray(self.means), np.asarray(self.variances)
        if m.ndim != 2 or m.shape[0] != N_CLASSES or m.shape != v.shape:
            raise InvalidSpec("means and variances must both be [4 x F]")
        if np.any(v < 0):
            raise InvalidSpec("variances must be non-negative")
        if self.total < 1:
            raise InvalidSpec("total must be positive")


def allocate_counts(proportions, total: int) -> np.ndarray:
    """Round ``proportions * total`` and fix the sum by largest remainders."""
    raw = np.asarray(proportions, dtype=float) * total
    counts = round_half_away(raw)
    diff = int(total - counts.sum())
    rem = raw - counts
    if diff > 0:
        order = np.argsort(-rem, kind="stable")
    else:
        order = np.argsort(rem, kind="stable")
    for i in range(abs(diff)):
        counts[order[i % counts.size]] += 1 if diff > 0 else -1
    return counts


def gen_feature_dataset(spec: MomentSpec) -> FeatureMatrix:
    """One row per primitive, features drawn independently per label."""
    spec.validate()
    counts = allocate_counts(spec.proportions, spec.total)
    rng = np.random.default_rng(spec.seed)
    F = spec.means.shape[1]
    X = np.empty((int(counts.sum()), F))
    y = np.repeat(np.arange(N_CLASSES), counts)
    start = 0
    for k, c in enumerate(counts):
        X[start:start + c] = spec.means[k] + np.sqrt(spec.variances[k]) * rng.standard_normal((c, F))
        start += c
    perm = rng.permutation(X.shape[0])
    X, y = X[perm], y[perm]
    return FeatureMatrix(X, y.astype(np.intp), np.arange(X.shape[0], dtype=np.intp),
                         feature_names=list(spec.feature_names))


def segment_means(fm: FeatureMatrix) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Average window features per segment: ``(segment ids, labels, means)``."""
    ids, inverse = np.unique(fm.segments, return_inverse=True)
    sums = np.zeros((ids.size, fm.n_features))
    np.add.at(sums, inverse, fm.X)
    n = np.bincount(inverse, minlength=ids.size)
    labels = np.zeros(ids.size, dtype=np.intp)
    labels[inverse] = fm.labels
    return ids, labels, sums / n[:, None]


def estimate_moments(fm: FeatureMatrix, total: int = 300_000, seed: int = 0) -> MomentSpec:
    """Per-label mean and variance of segment-mean feature vectors."""
    _, labels, means = segment_means(fm)
    counts = np.bincount(labels, minlength=N_CLASSES)
    if np.any(counts < 2):
        raise LabelTooSmall(f"need at least 2 segments per label, got {counts.tolist()}")
    mu = np.stack([means[labels == k].mean(axis=0) for k in range(N_CLASSES)])
    var = np.stack([means[labels == k].var(axis=0, ddof=1) for k in range(N_CLASSES)])
    return MomentSpec(counts / counts.sum(), mu, var, total, seed, list(fm.feature_names))
