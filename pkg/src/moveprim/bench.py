"""Training/testing time measurement and log-log scaling fits."""
from __future__ import annotations

import csv
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from .classifiers import make_classifier
from .core import N_CLASSES, round_half_away
from .errors import BelowClockResolution, IoError, MissingClassAtFraction, ValidationError
from .features import FeatureMatrix
from .synth import MomentSpec, gen_feature_dataset

TIMING_HEADER = ("algorithm", "phase", "fraction", "n_samples", "time_s")
SAMPLE_FRACTIONS = tuple(round(0.2 + 0.1 * i, 1) for i in range(9))
QUARTILES = (0.25, 0.5, 0.75, 1.0)
DEFAULT_WALL_S = 30 * 60.0
FAST_CALL_S = 1e-3
FAST_CALL_REPS = 201


class _NoOpEstimator:
    def fit(self, X, y):
        return self


def _median_time(fn: Callable, reps: int, setup: Callable | None = None) -> float:
    """Median wall time of ``fn(setup())``; only ``fn`` is timed.

    Sub-millisecond calls get extra samples to stabilize the median.
    """
    pc = time.perf_counter
    times = []

    def once():
        arg = setup() if setup is not None else None
        t0 = pc()
        fn(arg)
        times.append(pc() - t0)

    for _ in range(max(reps, 1)):
        once()
    if times[0] < FAST_CALL_S:
        for _ in range(max(FAST_CALL_REPS - len(times), 0)):
            once()
    return statistics.median(times)


def clock_resolution(X=None, y=None) -> float:
    """Smallest training time the harness can report.

    Median duration of fitting a fresh estimator whose ``fit`` does
    nothing, timed exactly like real fits: timer reads plus call overhead.
    """
    if X is None:
        X, y = np.zeros((4, 1)), np.arange(4)
    return _median_time(lambda est: est.fit(X, y), 1001, _NoOpEstimator)


@dataclass
class TimingRun:
    """Per-fraction median fit time and per-sample predict time of one algorithm."""

    algorithm: str
    fractions: list[float]
    n_samples: list[int]
    train_s: list[float | None]
    test_s: list[float | None]
    reps: int = 1
    seed: int = 0
    projected_train_s: list[float | None] = field(default_factory=list)

    def __post_init__(self):
        f = np.asarray(self.fractions, dtype=float)
        if f.size and (np.any(f <= 0) or np.any(f > 1) or np.any(np.diff(f) <= 0)):
            raise ValidationError("fractions must be strictly increasing within (0, 1]")
        if not self.projected_train_s:
            self.projected_train_s = [None] * len(self.fractions)

    @property
    def skipped(self) -> list[bool]:
        return [t is None for t in self.train_s]


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    r2: float

    def predict(self, n) -> np.ndarray:
        return np.exp(self.intercept) * np.asarray(n, dtype=float) ** self.slope


def fit_power_law(n, t) -> ScalingFit:
    """Least-squares line through ``(log n, log t)``."""
    x = np.log(np.asarray(n, dtype=float))
    y = np.log(np.asarray(t, dtype=float))
    A = np.column_stack([x, np.ones_like(x)])
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + icpt)
    ss_res = float(resid @ resid)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot > 0:
        r2 = 1.0 - ss_res / ss_tot
    else:
        r2 = 1.0 if ss_res <= 1e-24 else 0.0
    return ScalingFit(float(slope), float(icpt), float(min(max(r2, 0.0), 1.0)))


def fit_scaling(run: TimingRun, phase: str = "train", resolution: float = 0.0, min_points: int = 4) -> ScalingFit:
    """Fit the growth exponent of ``phase`` times over the measured fractions.

    Points at or below ``resolution`` are discarded; at least ``min_points``
    must remain.
    """
    times = {"train": run.train_s, "test": run.test_s}[phase]
    pts = [(n, t) for n, t in zip(run.n_samples, times) if t is not None and t > resolution]
    if len(pts) < min_points:
        raise BelowClockResolution(f"{run.algorithm}/{phase}: only {len(pts)} of {len(times)} "
                                   f"fractions above the clock resolution {resolution:.3g} s")
    n, t = zip(*pts)
    return fit_power_law(n, t)


def stratified_prefixes(labels, fractions: Sequence[float], seed: int = 0) -> list[np.ndarray]:
    """Nested stratified subsets: per label, a fixed random order truncated at each fraction."""
    labels = np.asarray(labels, dtype=np.intp)
    rng = np.random.default_rng([seed, 7])
    orders = [rng.permutation(np.flatnonzero(labels == k)) for k in range(N_CLASSES)]
    out = []
    for f in fractions:
        parts = []
        for k, order in enumerate(orders):
            m = round_half_away(f * order.size)
            if m < 1:
                raise MissingClassAtFraction(f"fraction {f} leaves no samples of class {k}")
            parts.append(order[:m])
        out.append(np.sort(np.concatenate(parts)))
    return out


def time_training(algorithm: str, X, y, fractions: Sequence[float] = SAMPLE_FRACTIONS, reps: int = 3,
                  seed: int = 0, probe_size: int = 1000, wall_s: float | None = None,
                  params: dict | None = None, log: Callable[[str], None] | None = None) -> TimingRun:
    """Retrain from scratch at each data fraction and time fit and predict.

    Fit time is the median over ``reps`` fresh models; test time is the
    median per-sample predict latency on a fixed probe set drawn once from
    ``X``. A discarded warm-up fit on a small stratified subset precedes
    timing. When ``wall_s`` is set, a fraction whose train time,
    extrapolated from the fractions measured so far, would exceed it is
    skipped and only its projection recorded.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.intp)
    params = dict(params or {})
    subsets = stratified_prefixes(y, fractions, seed)
    rng = np.random.default_rng([seed, 11])
    probe = X[np.sort(rng.choice(X.shape[0], size=min(probe_size, X.shape[0]), replace=False))]
    warm = stratified_prefixes(y, [min(1.0, 400 / max(y.size, 1))], seed)[0] if y.size > 400 else subsets[0]
    train_s, test_s, projected = [], [], []
    with threadpool_limits(limits=1):
        make_classifier(algorithm, **params).fit(X[warm], y[warm]).predict(probe)
        for f, idx in zip(fractions, subsets):
            Xf, yf = X[idx], y[idx]
            measured = [(len(s), t) for s, t in zip(subsets, train_s) if t is not None]
            guess = _extrapolate(measured, idx.size)
            if wall_s is not None and guess is not None and guess > wall_s:
                train_s.append(None)
                test_s.append(None)
                projected.append(guess)
                if log:
                    log(f"{algorithm}: fraction {f} skipped, projected {guess:.1f} s > wall {wall_s:.0f} s")
                continue
            last = []

            def fresh():
                last[:] = [make_classifier(algorithm, **params)]
                return last[0]

            t_fit = _median_time(lambda m: m.fit(Xf, yf), reps, fresh)
            model = last[0]
            t_pred = _median_time(lambda _: model.predict(probe), reps) / probe.shape[0]
            train_s.append(t_fit)
            test_s.append(t_pred)
            projected.append(None)
            if log:
                log(f"{algorithm}: fraction {f} n={idx.size} fit {t_fit:.4g} s, predict {t_pred:.3g} s/sample")
    return TimingRun(algorithm, [float(f) for f in fractions], [int(s.size) for s in subsets],
                     train_s, test_s, reps, seed, projected)


def _extrapolate(measured: list[tuple[int, float]], n: int) -> float | None:
    """Project train time at ``n`` from earlier points (quadratic when only one exists)."""
    if not measured:
        return None
    if len(measured) == 1:
        n0, t0 = measured[0]
        return t0 * (n / n0) ** 2
    ns, ts = zip(*measured[-3:])
    if min(ts) <= 0:
        return None
    fit = fit_power_law(ns, ts)
    slope = max(fit.slope, 1.0)
    n0, t0 = measured[-1]
    return t0 * (n / n0) ** slope


def bench_realworld(source: MomentSpec | FeatureMatrix, algorithms: Sequence[str] = ("lda", "nbc", "svm", "knn"),
                    fractions: Sequence[float] = QUARTILES, reps: int = 1, seed: int = 0,
                    wall_s: float | None = DEFAULT_WALL_S, params: dict | None = None,
                    log: Callable[[str], None] | None = None) -> dict[str, TimingRun]:
    """Time every algorithm on a moment-matched feature dataset at the given fractions."""
    fm = gen_feature_dataset(source) if isinstance(source, MomentSpec) else source
    params = params or {}
    return {a: time_training(a, fm.X, fm.labels, fractions, reps, seed, wall_s=wall_s,
                             params=params.get(a), log=log) for a in algorithms}


def _fit_or_none(run: TimingRun, phase: str, resolution: float):
    try:
        return vars(fit_scaling(run, phase, resolution))
    except BelowClockResolution as exc:
        return {"slope": None, "intercept": None, "r2": None, "reason": str(exc)}


def scaling_summary(runs: dict[str, TimingRun], resolution: float, wall_s: float | None = None) -> dict:
    """Report fragment: raw series, log-log fits and full-data projections."""
    out = {"clock_resolution_s": resolution, "wall_s": wall_s, "runs": {}, "fits": {}}
    for alg, run in runs.items():
        out["runs"][alg] = {
            "fractions": run.fractions, "n_samples": run.n_samples,
            "train": run.train_s, "test": run.test_s, "projected_train": run.projected_train_s,
        }
        fits = {"train": _fit_or_none(run, "train", resolution), "test": _fit_or_none(run, "test", 0.0)}
        t = fits["train"]
        if t["slope"] is not None and run.n_samples:
            fits["train"]["extrapolated_full_s"] = float(ScalingFit(t["slope"], t["intercept"], t["r2"])
                                                         .predict(run.n_samples[-1]))
        out["fits"][alg] = fits
    return out


def timing_rows(runs: dict[str, TimingRun]) -> list[tuple]:
    rows = []
    for alg, run in runs.items():
        for phase, times in (("train", run.train_s), ("test", run.test_s)):
            for f, n, t in zip(run.fractions, run.n_samples, times):
                rows.append((alg, phase, f, n, t))
    return rows


def write_timing_csv(runs: dict[str, TimingRun], path) -> None:
    """One row per algorithm, phase and fraction; skipped fractions have an empty time."""
    try:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TIMING_HEADER)
            for alg, phase, f, n, t in timing_rows(runs):
                w.writerow([alg, phase, repr(float(f)), n, "" if t is None else repr(float(t))])
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_timing_csv(path) -> dict[str, TimingRun]:
    """Rebuild timing runs from :func:`write_timing_csv` output."""
    series: dict[str, dict] = {}
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        if tuple(next(reader)) != TIMING_HEADER:
            raise ValidationError(f"{path}: unexpected timing header")
        for alg, phase, f, n, t in reader:
            s = series.setdefault(alg, {"fractions": [], "n": [], "train": [], "test": []})
            if phase == "train":
                s["fractions"].append(float(f))
                s["n"].append(int(n))
            s[phase].append(None if t == "" else float(t))
    return {a: TimingRun(a, s["fractions"], s["n"], s["train"], s["test"]) for a, s in series.items()}
