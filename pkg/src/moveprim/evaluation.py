"""Repeated stratified splits, segment-level voting, PPV and ROC analysis."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .classifiers import make_classifier
from .core import LABEL_NAMES, N_CLASSES, Dataset, PrimitiveLabel, SensorConfig, channel_columns, round_half_away
from .errors import (
    ClassAbsent,
    LabelTooSmall,
    MissingClass,
    NoPredictionsForClass,
    OneClassOnly,
    SegmentWithoutWindows,
    ValidationError,
)
from .features import NormStats, WindowMoments, WindowSpec, fit_norm, index_windows, segment_samples, window_moments

DEFAULT_ALGORITHMS = ("lda", "nbc", "svm", "knn")


@dataclass(frozen=True)
class SplitPlan:
    train_frac: float = 0.6
    repeats: int = 10
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.train_frac < 1:
            raise ValidationError(f"train_frac must lie in (0, 1), got {self.train_frac}")
        if self.repeats < 1:
            raise ValidationError(f"repeats must be >= 1, got {self.repeats}")


def stratified_split(groups: Mapping[int, Sequence[int]], plan: SplitPlan, repeat: int):
    """Draw ``round(train_frac * n)`` training ids per label, uniformly at random.

    ``groups`` maps each label to the ids of its segments. The draw depends
    only on ``(plan.seed, repeat)``. Returns sorted ``(train, test)`` arrays.
    """
    rng = np.random.default_rng([plan.seed, repeat])
    train, test = [], []
    for label in sorted(groups):
        ids = np.asarray(groups[label], dtype=np.intp)
        if ids.size < 2:
            raise LabelTooSmall(f"label {label} has {ids.size} segment(s); at least 2 required")
        k = min(max(round_half_away(plan.train_frac * ids.size), 1), ids.size - 1)
        perm = rng.permutation(np.sort(ids))
        train.append(perm[:k])
        test.append(perm[k:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


class Confusion:
    """Square count matrix, rows = true class, columns = predicted class."""

    def __init__(self, counts):
        counts = np.asarray(counts)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise ValidationError(f"confusion must be square, got shape {counts.shape}")
        if np.any(counts < 0):
            raise ValidationError("confusion counts must be non-negative")
        self.counts = counts.astype(np.int64)

    @classmethod
    def from_predictions(cls, y_true, y_pred, n_classes=N_CLASSES) -> "Confusion":
        y_true = np.asarray(y_true, dtype=np.intp)
        y_pred = np.asarray(y_pred, dtype=np.intp)
        counts = np.zeros((n_classes, n_classes), dtype=np.int64)
        np.add.at(counts, (y_true, y_pred), 1)
        return cls(counts)

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __eq__(self, other):
        return isinstance(other, Confusion) and np.array_equal(self.counts, other.counts)

    def __repr__(self):
        return f"Confusion({self.counts.tolist()})"


def ppv(conf: Confusion, k: int) -> float:
    """TP / (TP + FP) for class ``k``."""
    predicted = conf.counts[:, k].sum()
    if predicted == 0:
        raise NoPredictionsForClass(f"class {k} was never predicted; PPV undefined")
    return float(conf.counts[k, k] / predicted)


def per_class_ppv(conf: Confusion) -> np.ndarray:
    """PPV of every class, NaN where undefined."""
    out = np.full(conf.n_classes, np.nan)
    for k in range(conf.n_classes):
        try:
            out[k] = ppv(conf, k)
        except NoPredictionsForClass:
            pass
    return out


def overall_ppv(conf: Confusion) -> float:
    """All true positives over all predictions (trace / total)."""
    if conf.total == 0:
        raise NoPredictionsForClass("empty confusion")
    return float(np.trace(conf.counts) / conf.total)


def sensitivity_specificity(conf: Confusion, k: int) -> tuple[float, float]:
    """One-vs-all ``(TP/(TP+FN), TN/(TN+FP))`` for class ``k``.

    Specificity is NaN when no other class appears in the truth.
    """
    c = conf.counts
    tp = c[k, k]
    fn = c[k].sum() - tp
    fp = c[:, k].sum() - tp
    tn = conf.total - tp - fn - fp
    if tp + fn == 0:
        raise ClassAbsent(f"class {k} does not occur in the ground truth")
    spec = tn / (tn + fp) if tn + fp else np.nan
    return float(tp / (tp + fn)), float(spec)


@dataclass
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float
    operating_index: int

    @property
    def operating_point(self) -> tuple[float, float, float]:
        i = self.operating_index
        return float(self.fpr[i]), float(self.tpr[i]), float(self.thresholds[i])


def roc_curve(y_true, scores) -> RocCurve:
    """ROC of binary ``y_true`` against ``scores`` (higher means positive).

    One point per distinct score, swept in descending order, preceded by
    ``(0, 0)`` at threshold ``+inf``. AUC by the trapezoid rule. The
    operating point is the point nearest ``(0, 1)``, ties to higher TPR.
    """
    y = np.asarray(y_true).astype(bool)
    s = np.asarray(scores, dtype=float)
    if y.shape != s.shape or y.ndim != 1:
        raise ValidationError("labels and scores must be 1-D arrays of equal length")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise OneClassOnly("ROC needs both positive and negative samples")
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    last = np.r_[np.flatnonzero(np.diff(s)), s.size - 1]
    tp = np.cumsum(y)[last]
    fp = (last + 1) - tp
    tpr = np.r_[0.0, tp / n_pos]
    fpr = np.r_[0.0, fp / n_neg]
    thr = np.r_[np.inf, s[last]]
    auc = float(np.trapezoid(tpr, fpr))
    dist = np.hypot(fpr, 1.0 - tpr)
    best = np.flatnonzero(dist == dist.min())
    op = int(best[np.argmax(tpr[best])])
    return RocCurve(fpr, tpr, thr, auc, op)


def segment_vote(window_pred, window_scores, window_segment, expected=None):
    """Aggregate window predictions into one label and score vector per segment.

    Majority label over the segment's windows; ties go to the tied class
    with the greatest mean score, then the lowest code. Segment scores are
    window-score means. ``expected`` lists segment ids that must each own
    at least one window.

    Returns ``(segment_ids, labels, scores)`` with ids sorted ascending.
    """
    pred = np.asarray(window_pred, dtype=np.intp)
    scores = np.asarray(window_scores, dtype=float)
    seg = np.asarray(window_segment, dtype=np.intp)
    ids, inv = np.unique(seg, return_inverse=True)
    if expected is not None:
        missing = np.setdiff1d(np.asarray(expected, dtype=np.intp), ids)
        if missing.size:
            raise SegmentWithoutWindows(f"segments {missing[:10].tolist()} have no windows")
    n_cls = scores.shape[1]
    votes = np.zeros((ids.size, n_cls))
    np.add.at(votes, (inv, pred), 1.0)
    sums = np.zeros((ids.size, n_cls))
    np.add.at(sums, inv, scores)
    mean = sums / np.bincount(inv, minlength=ids.size)[:, None]
    tied = votes == votes.max(axis=1, keepdims=True)
    labels = np.argmax(np.where(tied, mean, -np.inf), axis=1)
    return ids, labels, mean


@dataclass
class RepeatResult:
    """Outcome of one algorithm on one split."""

    confusion: Confusion
    segment_ids: np.ndarray
    segment_scores: np.ndarray
    truth: np.ndarray
    window_confusion: Confusion
    fit_s: float
    predict_s: float

    @property
    def ppv(self) -> np.ndarray:
        return per_class_ppv(self.confusion)

    @property
    def overall(self) -> float:
        return overall_ppv(self.confusion)

    def roc(self, k: int) -> RocCurve:
        return roc_curve(self.truth == k, self.segment_scores[:, k])


@dataclass
class ConfigResult:
    """Per-algorithm, per-repeat results for one sensor configuration."""

    config: SensorConfig
    repeats: dict[str, list[RepeatResult]] = field(default_factory=dict)

    def overall_ppv(self, algorithm: str) -> float:
        return float(np.mean([r.overall for r in self.repeats[algorithm]]))

    def per_primitive_ppv(self, algorithm: str) -> np.ndarray:
        stacked = np.array([r.ppv for r in self.repeats[algorithm]])
        with np.errstate(all="ignore"):
            return np.array([np.nanmean(c) if np.any(np.isfinite(c)) else np.nan for c in stacked.T])


class Experiment:
    """Repeated-split evaluation sharing work across sensor configurations.

    Window labels and raw window moments for every recording channel are
    computed once; splits and per-channel normalization statistics once per
    repeat. Any sensor configuration can then be scored without touching
    the samples again.
    """

    def __init__(self, dataset: Dataset, spec: WindowSpec = WindowSpec(), plan: SplitPlan = SplitPlan(),
                 params: Mapping[str, dict] | None = None):
        if not dataset.recordings:
            raise ValidationError("dataset has no recordings")
        counts = dataset.label_counts()
        absent = [str(k) for k, n in counts.items() if n == 0]
        if absent:
            raise MissingClass(f"no segments labeled {', '.join(absent)}")
        self.dataset = dataset
        self.spec = spec
        self.plan = plan
        self.params = dict(params or {})
        self.index = index_windows(dataset, spec)
        self.moments: WindowMoments | None = None
        self.labels = dataset.segment_labels()
        groups = dataset.groups_by_label()
        self.splits = [stratified_split({int(k): v for k, v in groups.items()}, plan, r)
                       for r in range(plan.repeats)]
        self._norms: dict[int, NormStats] = {}

    def _ensure_moments(self):
        if self.moments is None:
            self.moments = window_moments(self.dataset, self.spec, self.index)
        return self.moments

    def norm(self, repeat: int) -> NormStats:
        """Z-score statistics of all recording channels over the training segments."""
        if repeat not in self._norms:
            full = SensorConfig.all_sites()
            self._norms[repeat] = fit_norm(segment_samples(self.dataset, full, self.splits[repeat][0]))
        return self._norms[repeat]

    def features(self, config: SensorConfig, repeat: int) -> np.ndarray:
        cols = channel_columns(config)
        norm = self.norm(repeat)
        return self._ensure_moments().features(config, NormStats(norm.mean[cols], norm.std[cols]))

    def evaluate(self, config: SensorConfig, algorithms: Sequence[str] = DEFAULT_ALGORITHMS) -> ConfigResult:
        result = ConfigResult(config, {a: [] for a in algorithms})
        seg_of_window = self.index.segment
        for r, (train, test) in enumerate(self.splits):
            X = self.features(config, r)
            tr = np.isin(seg_of_window, train)
            te = np.isin(seg_of_window, test)
            for name in algorithms:
                clf = make_classifier(name, **self.params.get(name, {}))
                t0 = time.perf_counter()
                clf.fit(X[tr], self.index.label[tr])
                t1 = time.perf_counter()
                if name == "knn":
                    pred, scores = clf.predict_with_scores(X[te])
                else:
                    scores = clf.decision_function(X[te])
                    pred = np.argmax(scores, axis=1)
                t2 = time.perf_counter()
                ids, seg_pred, seg_scores = segment_vote(pred, scores, seg_of_window[te], expected=test)
                truth = self.labels[ids]
                result.repeats[name].append(RepeatResult(
                    Confusion.from_predictions(truth, seg_pred),
                    ids, seg_scores, truth,
                    Confusion.from_predictions(self.index.label[te], pred),
                    t1 - t0, t2 - t1))
        return result


def summarize(result: ConfigResult, notes: Sequence[str] = (), config_echo: Mapping | None = None):
    """Collapse per-repeat results into an ``EvalReport``.

    ROC curves and operating points are those of the first repeat; AUC and
    PPV are mean and standard deviation across repeats.
    """
    from .report import EvalReport, tuning_table

    algs = list(result.repeats)
    per_ppv, overall, roc, auc, ops, timings, window = {}, {}, {}, {}, {}, {}, {}
    for a in algs:
        reps = result.repeats[a]
        ppvs = np.array([r.ppv for r in reps])
        per_ppv[a] = {}
        for k, name in enumerate(LABEL_NAMES):
            col = ppvs[:, k]
            ok = col[np.isfinite(col)]
            per_ppv[a][name] = {
                "mean": float(ok.mean()) if ok.size else None,
                "std": float(ok.std()) if ok.size else None,
                "n_undefined": int(col.size - ok.size),
            }
        ov = np.array([r.overall for r in reps])
        overall[a] = {"mean": float(ov.mean()), "std": float(ov.std()), "per_repeat": ov.tolist()}
        roc[a], auc[a], ops[a] = {}, {}, {}
        for k, name in enumerate(LABEL_NAMES):
            aucs = []
            for i, r in enumerate(reps):
                try:
                    curve = r.roc(k)
                except OneClassOnly:
                    continue
                aucs.append(curve.auc)
                if i == 0:
                    roc[a][name] = {"fpr": curve.fpr.tolist(), "tpr": curve.tpr.tolist(),
                                    "threshold": curve.thresholds.tolist()}
                    f, t, th = curve.operating_point
                    ops[a][name] = {"fpr": f, "tpr": t, "threshold": th}
            auc[a][name] = ({"mean": float(np.mean(aucs)), "std": float(np.std(aucs))}
                            if aucs else {"mean": None, "std": None})
        fit = np.array([r.fit_s for r in reps])
        pred = np.array([r.predict_s for r in reps])
        timings[a] = {"fit_s": {"mean": float(fit.mean()), "std": float(fit.std())},
                      "predict_s": {"mean": float(pred.mean()), "std": float(pred.std())}}
        win = np.array([overall_ppv(r.window_confusion) for r in reps])
        window[a] = {"overall_ppv": {"mean": float(win.mean()), "std": float(win.std())}}
    return EvalReport(
        config=dict(config_echo or {"sensors": str(result.config)}),
        algorithms=algs,
        per_primitive_ppv=per_ppv,
        overall_ppv=overall,
        roc=roc,
        auc=auc,
        operating_points=ops,
        timings={"evaluation": timings},
        tuning_metadata=tuning_table(),
        notes=list(notes),
        window_level=window,
    )


ROC_AXES_NOTE = ("ROC curves plot false positive rate on the x-axis and true positive rate on the y-axis; "
                 "operating point = curve point nearest (0, 1).")
LEVEL_NOTE = "PPV, ROC and AUC are computed per segment after majority voting over its windows; " \
             "window_level holds per-window diagnostics."


def count_note(dataset: Dataset) -> str:
    """Segment total as the sum of per-label counts."""
    counts = dataset.label_counts()
    parts = ", ".join(f"{lab.name.lower()} {counts.get(lab, 0)}" for lab in PrimitiveLabel)
    return f"{dataset.n_segments} labeled segments ({parts}); the total is the sum of per-label counts."


def run_experiment(dataset: Dataset, config: SensorConfig | None = None, spec: WindowSpec = WindowSpec(),
                   algorithms: Sequence[str] = DEFAULT_ALGORITHMS, plan: SplitPlan = SplitPlan(),
                   params: Mapping[str, dict] | None = None, config_echo: Mapping | None = None):
    """Full repeated-split evaluation of ``algorithms`` on one sensor configuration."""
    config = config or SensorConfig.all_sites()
    for name in algorithms:
        make_classifier(name)
    exp = Experiment(dataset, spec, plan, params)
    echo = dict(config_echo) if config_echo else {
        "sensors": list(config.site_names), "kind": config.kind.value,
        "window": {"width_s": spec.width_s, "stride_s": spec.stride_s},
        "plan": {"train_frac": plan.train_frac, "repeats": plan.repeats, "seed": plan.seed},
        "algorithms": list(algorithms),
    }
    return summarize(exp.evaluate(config, algorithms), [ROC_AXES_NOTE, LEVEL_NOTE, count_note(dataset)], echo)
