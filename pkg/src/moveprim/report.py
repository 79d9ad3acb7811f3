"""Evaluation report documents, tuning metadata and static plots."""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

from .core import LABEL_NAMES

SCHEMA_VERSION = 1

_TUNING = {
    "lda": (3, "Prior probability, regularization term, optimizer",
            ["prior probability", "regularization term", "optimizer"], "medium"),
    "nbc": (1, "selection of prior distribution", ["selection of prior distribution"], "low"),
    "svm": (9, "Kernel function, kernel parameters (scale, offset), regularization term, # of iterations, Nu, "
               "prior probability, convergence parameter, optimizer",
            ["kernel function", "kernel scale", "kernel offset", "regularization term", "number of iterations",
             "nu", "prior probability", "convergence parameter", "optimizer"], "high"),
    "knn": (5, "# of neighbors (K), distance metric, search algorithm, tie breaker, weighing criterion",
            ["number of neighbors (k)", "distance metric", "search algorithm", "tie breaker",
             "weighing criterion"], "low"),
}


def tuning_table() -> dict[str, dict]:
    """Number of tuning parameters and required domain knowledge per algorithm."""
    return {alg: {"n_parameters": n, "parameters": text, "names": list(names), "domain_knowledge": grade}
            for alg, (n, text, names, grade) in _TUNING.items()}


@dataclass
class EvalReport:
    """Aggregated evaluation outcome; serializes to a versioned JSON document."""

    config: dict = field(default_factory=dict)
    algorithms: list = field(default_factory=list)
    per_primitive_ppv: dict = field(default_factory=dict)
    overall_ppv: dict = field(default_factory=dict)
    roc: dict = field(default_factory=dict)
    auc: dict = field(default_factory=dict)
    operating_points: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    tuning_metadata: dict = field(default_factory=tuning_table)
    notes: list = field(default_factory=list)
    window_level: dict = field(default_factory=dict)
    ablation: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return {f.name: _jsonable(copy.deepcopy(getattr(self, f.name))) for f in fields(self)}

    @classmethod
    def from_dict(cls, doc: dict) -> "EvalReport":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown report keys: {sorted(unknown)}")
        doc = copy.deepcopy(doc)
        for curves in doc.get("roc", {}).values():
            for curve in curves.values():
                curve["threshold"] = [math.inf if t is None else t for t in curve["threshold"]]
        for points in doc.get("operating_points", {}).values():
            for p in points.values():
                if p.get("threshold") is None:
                    p["threshold"] = math.inf
        return cls(**doc)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        return cls.from_dict(json.loads(text))

    def validate(self) -> list[str]:
        """Return violated report invariants (empty when consistent)."""
        problems = []
        for alg, per in self.per_primitive_ppv.items():
            for prim, stat in per.items():
                m, s = stat.get("mean"), stat.get("std")
                if m is not None and not 0 <= m <= 1:
                    problems.append(f"{alg}/{prim}: PPV {m} outside [0, 1]")
                if s is not None and s < 0:
                    problems.append(f"{alg}/{prim}: negative std")
        for alg, stat in self.overall_ppv.items():
            if not 0 <= stat["mean"] <= 1:
                problems.append(f"{alg}: overall PPV {stat['mean']} outside [0, 1]")
        return problems


def _jsonable(obj: Any):
    """Plain JSON types; non-finite floats become ``None``."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


# plotting ------------------------------------------------------------------

def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "moveprim"
    matplotlib.rcParams["svg.fonttype"] = "none"
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})


def emit_plots(report: EvalReport, out_dir) -> list[str]:
    """Write SVG figures for ``report`` into ``out_dir``.

    Produces ``roc_<primitive>.svg`` per primitive, ``time_train.svg`` and
    ``time_test.svg`` when scaling timings exist, and ``ablation.svg`` when
    a sensor-count series exists. Returns written file names followed by
    ``skipped: ...`` notes for anything omitted.
    """
    plt = _pyplot()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[str] = []

    for prim in LABEL_NAMES:
        curves = [(alg, report.roc.get(alg, {}).get(prim)) for alg in report.algorithms]
        curves = [(a, c) for a, c in curves if c]
        if not curves:
            written.append(f"skipped: roc_{prim}.svg (no curve with both classes)")
            continue
        fig, ax = plt.subplots(figsize=(4.5, 4.5))
        for alg, c in curves:
            line, = ax.plot(c["fpr"], c["tpr"], label=alg.upper(), linewidth=1.2)
            op = report.operating_points.get(alg, {}).get(prim)
            if op:
                ax.plot([op["fpr"]], [op["tpr"]], "o", color=line.get_color(), markersize=5)
        ax.plot([0, 1], [0, 1], ":", color="grey", linewidth=0.8)
        ax.set_xlabel("False positive rate")
        ax.set_ylabel("True positive rate")
        ax.set_title(prim)
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1.01)
        ax.legend(loc="lower right", fontsize=8)
        fig.tight_layout()
        name = f"roc_{prim}.svg"
        _save(fig, out / name)
        plt.close(fig)
        written.append(name)

    scaling = report.timings.get("scaling")
    for phase, name, ylabel in (("train", "time_train.svg", "Training time (s)"),
                                ("test", "time_test.svg", "Test time per sample (s)")):
        runs = (scaling or {}).get("runs", {})
        series = [(alg, run) for alg, run in runs.items() if run.get(phase)]
        if not series:
            written.append(f"skipped: {name} (no timings)")
            continue
        fig, ax = plt.subplots(figsize=(5, 4))
        for alg, run in series:
            n = run["n_samples"]
            t = [v if v is not None else np.nan for v in run[phase]]
            ax.plot(n, t, "o-", label=alg.upper(), markersize=3)
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("Training samples")
        ax.set_ylabel(ylabel)
        ax.legend(fontsize=8)
        fig.tight_layout()
        _save(fig, out / name)
        plt.close(fig)
        written.append(name)

    ablation = report.ablation.get("domain_path") if report.ablation else None
    if ablation:
        fig, ax = plt.subplots(figsize=(5, 4))
        for kind in ("imu", "accel"):
            pts = [(s["n_sensors"], s["overall_ppv"]) for s in ablation if s["kind"] == kind]
            if pts:
                x, y = zip(*pts)
                ax.plot(x, y, "o-", label="IMU" if kind == "imu" else "Accelerometer")
        ax.set_xlabel("Number of sensors")
        ax.set_ylabel("Overall PPV")
        ax.set_xticks(sorted({s["n_sensors"] for s in ablation}))
        ax.legend(fontsize=8)
        fig.tight_layout()
        _save(fig, out / "ablation.svg")
        plt.close(fig)
        written.append("ablation.svg")
    else:
        written.append("skipped: ablation.svg (no sensor-count series)")
    return written
