"""Sensor-count and placement ablations: hand-ordered removal path and exhaustive subset search."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import LABEL_NAMES, DataKind, Dataset, SensorConfig, SensorSite
from .errors import BudgetExceeded, IoError
from .evaluation import Experiment, SplitPlan
from .features import WindowSpec

SEARCH_HEADER = ("sites", "kind", "n_sensors", "overall_ppv") + tuple(f"{p}_ppv" for p in LABEL_NAMES)
_TRUNK = (SensorSite.HEAD, SensorSite.STERNUM, SensorSite.PELVIS)


@dataclass(frozen=True)
class AblationStep:
    config: SensorConfig
    overall_ppv: float
    per_primitive_ppv: tuple[float, ...]

    @property
    def n_sensors(self) -> int:
        return len(self.config.sites)

    def as_row(self) -> list[str]:
        fmt = lambda v: "" if v is None or not np.isfinite(v) else repr(float(v))
        return (["+".join(self.config.site_names), self.config.kind.value, str(self.n_sensors),
                 fmt(self.overall_ppv)] + [fmt(v) for v in self.per_primitive_ppv])

    def as_dict(self) -> dict:
        return {"sites": list(self.config.site_names), "kind": self.config.kind.value,
                "n_sensors": self.n_sensors, "overall_ppv": self.overall_ppv,
                "per_primitive_ppv": dict(zip(LABEL_NAMES, self.per_primitive_ppv))}


@dataclass
class SearchResult:
    steps: list[AblationStep]
    best: AblationStep
    evaluations: int = 0


def _arm(side: str) -> list[SensorSite]:
    prefix = {"right": "R", "left": "L"}[side.lower()]
    return [SensorSite.parse(prefix + part) for part in ("Scapula", "Arm", "Forearm", "Hand")]


def domain_knowledge_path(active_side: str = "right", kind: DataKind = DataKind.IMU) -> list[SensorConfig]:
    """Sensor sets from 11 down to 1 in the hand-chosen removal order.

    All sites; drop the non-active arm (7); drop sternum and pelvis (5);
    drop the head (4); then the active scapula (3), upper arm (2) and hand,
    leaving the active forearm.
    """
    scap, arm, fore, hand = _arm(active_side)
    seven = [*_TRUNK, scap, arm, fore, hand]
    sets = [
        list(SensorSite),
        seven,
        [SensorSite.HEAD, scap, arm, fore, hand],
        [scap, arm, fore, hand],
        [arm, fore, hand],
        [fore, hand],
        [fore],
    ]
    return [SensorConfig(tuple(s), kind) for s in sets]


def _better(a: AblationStep, b: AblationStep) -> bool:
    """Whether ``a`` beats ``b``: higher PPV, then fewer sensors, then canonical order."""
    if a.overall_ppv != b.overall_ppv:
        return a.overall_ppv > b.overall_ppv
    if a.n_sensors != b.n_sensors:
        return a.n_sensors < b.n_sensors
    return tuple(int(s) for s in a.config.sites) < tuple(int(s) for s in b.config.sites)


def best_step(steps: Sequence[AblationStep]) -> AblationStep:
    best = steps[0]
    for s in steps[1:]:
        if _better(s, best):
            best = s
    return best


def subset_configs(sites: Iterable[SensorSite | str], kind: DataKind = DataKind.IMU) -> list[SensorConfig]:
    """All non-empty subsets of ``sites``, ordered by bitmask over canonical order."""
    pool = sorted({SensorSite.parse(s) if isinstance(s, str) else SensorSite(s) for s in sites})
    out = []
    for mask in range(1, 1 << len(pool)):
        out.append(SensorConfig(tuple(s for i, s in enumerate(pool) if mask >> i & 1), kind))
    return out


class PpvEvaluator:
    """Score sensor configurations with one algorithm under a fixed split plan.

    Splits depend only on ``(plan.seed, repeat)``, so every configuration
    and data kind is evaluated on identical train/test segments. Results
    are memoized per configuration.
    """

    def __init__(self, dataset: Dataset, spec: WindowSpec = WindowSpec(), plan: SplitPlan = SplitPlan(),
                 algorithm: str = "lda", params: dict | None = None):
        self.algorithm = algorithm
        self.experiment = Experiment(dataset, spec, plan, {algorithm: dict(params or {})})
        self._cache: dict[SensorConfig, AblationStep] = {}
        self.calls = 0

    def __call__(self, config: SensorConfig) -> AblationStep:
        if config not in self._cache:
            self.calls += 1
            res = self.experiment.evaluate(config, (self.algorithm,))
            self._cache[config] = AblationStep(config, res.overall_ppv(self.algorithm),
                                               tuple(float(v) for v in res.per_primitive_ppv(self.algorithm)))
        return self._cache[config]


Evaluator = Callable[[SensorConfig], AblationStep]


def exhaustive_search(evaluator: Evaluator, kind: DataKind = DataKind.IMU, whitelist=None,
                      budget: int | None = None) -> SearchResult:
    """Evaluate every non-empty subset of ``whitelist`` (default: all 11 sites)."""
    configs = subset_configs(whitelist if whitelist is not None else list(SensorSite), kind)
    if budget is not None and len(configs) > budget:
        raise BudgetExceeded(f"{len(configs)} configurations exceed the budget of {budget}")
    steps = [evaluator(c) for c in configs]
    return SearchResult(steps, best_step(steps), len(steps))


def domain_search(evaluator: Evaluator, active_side: str = "right",
                  kind: DataKind = DataKind.IMU) -> SearchResult:
    steps = [evaluator(c) for c in domain_knowledge_path(active_side, kind)]
    return SearchResult(steps, best_step(steps), len(steps))


@dataclass
class KindComparison:
    sites: tuple[SensorSite, ...]
    imu: AblationStep
    accel: AblationStep


def compare_data_kinds(evaluator: Evaluator, configs: Iterable[SensorConfig]) -> list[KindComparison]:
    """Evaluate each configuration with full IMU channels and accelerometer channels only."""
    out = []
    for c in configs:
        out.append(KindComparison(c.sites, evaluator(c.with_kind(DataKind.IMU)),
                                  evaluator(c.with_kind(DataKind.ACCELEROMETER))))
    return out


def write_search_csv(steps: Iterable[AblationStep], path) -> None:
    try:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SEARCH_HEADER)
            for s in steps:
                w.writerow(s.as_row())
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_search_csv(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def ablation_section(path_steps: Sequence[AblationStep], search: SearchResult | None = None,
                     algorithm: str = "lda") -> dict:
    """Report fragment for sensor ablations."""
    doc = {"algorithm": algorithm, "domain_path": [s.as_dict() for s in path_steps]}
    if search is not None:
        doc["exhaustive"] = {"evaluations": search.evaluations, "best": search.best.as_dict()}
    return doc
