"""Command-line entry point: ``moveprim <subcommand> [options]``.

Subcommands ``synth``, ``featurize``, ``eval``, ``search``, ``bench`` and
``report`` each write their outputs plus a ``manifest.json`` (resolved
configuration, seed and SHA-256 of every artifact) under ``--out``.

Exit status: 0 on success, 1 on invalid input or configuration, 2 on any
other failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .classifiers import ALGORITHMS
from .core import SITE_NAMES, DataKind, SensorConfig
from .errors import MovePrimError, ValidationError

log = logging.getLogger("moveprim")

SYNTH_KEYS = ("counts", "noise_std", "jitter", "n_recordings", "active_side", "durations_s")
SEARCH_KEYS = ("mode", "whitelist", "kinds", "algorithm", "budget", "active_side")
BENCH_KEYS = ("scale", "total", "reps", "wall_s", "fractions", "sensors", "kind", "algorithms")


@dataclass
class RunConfig:
    """Everything a command needs; loadable from one JSON file."""

    data: str | None = None
    sample_rate_hz: float = 240.0
    window_width_s: float = 0.25
    window_stride_s: float = 0.1
    sensors: list = field(default_factory=lambda: list(SITE_NAMES))
    kind: str = "imu"
    train_frac: float = 0.6
    repeats: int = 10
    algorithms: list = field(default_factory=lambda: ["lda", "nbc", "svm", "knn"])
    seed: int = 0
    out: str = "out"
    threads: int = 1
    synth: dict = field(default_factory=dict)
    search: dict = field(default_factory=dict)
    bench: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise ValidationError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
        cfg = cls(**doc)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def echo(self) -> dict:
        """Configuration as recorded in outputs; the output location is left out
        so identical runs written to different directories match byte for byte."""
        doc = self.to_dict()
        del doc["out"]
        return doc

    def validate(self) -> None:
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad or not self.algorithms:
            raise ValidationError(f"unknown algorithm(s) {', '.join(bad) or '(none given)'}; "
                                  f"valid names: {', '.join(ALGORITHMS)}")
        for section, keys in (("synth", SYNTH_KEYS), ("search", SEARCH_KEYS), ("bench", BENCH_KEYS)):
            extra = set(getattr(self, section)) - set(keys)
            if extra:
                raise ValidationError(f"unknown {section} keys: {', '.join(sorted(extra))}")
        bad = set(self.params) - set(ALGORITHMS)
        if bad:
            raise ValidationError(f"params for unknown algorithm(s): {', '.join(sorted(bad))}")
        if self.seed < 0:
            raise ValidationError("seed must be non-negative")
        if self.threads < 1:
            raise ValidationError("threads must be >= 1")
        self.sensor_config()
        self.window()
        self.plan()

    def sensor_config(self, sensors=None, kind=None) -> SensorConfig:
        try:
            return SensorConfig.from_names(sensors or self.sensors, DataKind.parse(kind or self.kind))
        except (KeyError, ValueError) as exc:
            raise ValidationError(f"invalid sensor configuration: {exc}; valid sites: "
                                  f"{', '.join(SITE_NAMES)}; kinds: imu, accel") from None

    def window(self):
        from .features import WindowSpec

        try:
            return WindowSpec(self.window_width_s, self.window_stride_s)
        except ValueError as exc:
            raise ValidationError(str(exc)) from None

    def plan(self):
        from .evaluation import SplitPlan

        return SplitPlan(self.train_frac, self.repeats, self.seed)


# helpers -------------------------------------------------------------------

def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(out: Path, command: str, cfg: RunConfig) -> Path:
    """Record configuration, seed and a hash of every file under ``out``."""
    files = sorted(p for p in out.rglob("*") if p.is_file() and p.name != "manifest.json")
    doc = {
        "command": command,
        "version": __version__,
        "seed": cfg.seed,
        "config": cfg.echo(),
        "artifacts": {p.relative_to(out).as_posix(): _sha256(p) for p in files},
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def _synth_spec(cfg: RunConfig):
    from .synth import SignalGenSpec

    kw = dict(cfg.synth)
    if "counts" in kw:
        kw["counts"] = tuple(int(c) for c in kw["counts"])
    if "durations_s" in kw:
        kw["durations_s"] = tuple(tuple(float(v) for v in d) for d in kw["durations_s"])
    kw["sample_rate_hz"] = cfg.sample_rate_hz
    kw["window_width_s"] = cfg.window_width_s
    try:
        spec = SignalGenSpec(seed=cfg.seed, **kw)
    except TypeError as exc:
        raise ValidationError(str(exc)) from None
    spec.validate()
    return spec


def _load_dataset(cfg: RunConfig):
    """Read ``cfg.data`` or, when unset, simulate the default dataset."""
    from .core import validate_dataset
    from .io import read_dataset
    from .synth import gen_signal_dataset

    if cfg.data:
        log.info("reading dataset from %s", cfg.data)
        ds = read_dataset(cfg.data, cfg.sample_rate_hz)
    else:
        log.info("simulating dataset (seed %d)", cfg.seed)
        ds = gen_signal_dataset(_synth_spec(cfg))
    problems = validate_dataset(ds)
    if problems:
        raise ValidationError("invalid dataset: " + "; ".join(problems[:5]))
    return ds


# commands ------------------------------------------------------------------

def cmd_synth(cfg: RunConfig, out: Path, args) -> None:
    from .io import write_dataset
    from .synth import gen_signal_dataset

    ds = gen_signal_dataset(_synth_spec(cfg))
    write_dataset(ds, out)
    log.info("wrote %d recordings, %d segments", len(ds), ds.n_segments)


def cmd_featurize(cfg: RunConfig, out: Path, args) -> None:
    from .features import WindowFeaturizer

    ds = _load_dataset(cfg)
    fz = WindowFeaturizer(cfg.sensor_config(), cfg.window()).fit(ds)
    fm = fz.transform(ds)
    fm.to_csv(out / "features.csv")
    (out / "feature_names.txt").write_text("\n".join(fm.feature_names) + "\n")
    log.info("wrote %d windows x %d features", fm.n_windows, fm.n_features)


def _finish_report(report, out: Path, plots: bool = True) -> None:
    from .io import write_report
    from .report import emit_plots

    write_report(report, out / "report.json")
    if plots:
        for name in emit_plots(report, out / "plots"):
            if name.startswith("skipped"):
                log.info(name)


def cmd_eval(cfg: RunConfig, out: Path, args) -> None:
    from .evaluation import run_experiment

    ds = _load_dataset(cfg)
    report = run_experiment(ds, cfg.sensor_config(), cfg.window(), cfg.algorithms, cfg.plan(),
                            cfg.params, config_echo=cfg.echo())
    _finish_report(report, out)
    for a in report.algorithms:
        log.info("%s overall PPV %.3f", a, report.overall_ppv[a]["mean"])


def cmd_search(cfg: RunConfig, out: Path, args) -> None:
    from .evaluation import ROC_AXES_NOTE
    from .report import EvalReport
    from .sensorsearch import (
        PpvEvaluator,
        ablation_section,
        domain_knowledge_path,
        exhaustive_search,
        write_search_csv,
    )

    s = cfg.search
    mode = s.get("mode", "domain")
    if mode not in ("domain", "exhaustive"):
        raise ValidationError(f"search mode must be 'domain' or 'exhaustive', not {mode!r}")
    algorithm = s.get("algorithm", "lda")
    if algorithm not in ALGORITHMS:
        raise ValidationError(f"unknown algorithm {algorithm!r}; valid names: {', '.join(ALGORITHMS)}")
    try:
        default_kinds = ["imu", "accel"] if mode == "domain" else [cfg.kind]
        kinds = [DataKind.parse(k) for k in s.get("kinds", default_kinds)]
    except KeyError as exc:
        raise ValidationError(f"unknown data kind {exc}; valid kinds: imu, accel") from None
    side = s.get("active_side", cfg.synth.get("active_side", "right"))
    if side not in ("left", "right"):
        raise ValidationError(f"active_side must be 'left' or 'right', not {side!r}")
    ds = _load_dataset(cfg)
    evaluator = PpvEvaluator(ds, cfg.window(), cfg.plan(), algorithm, cfg.params.get(algorithm))
    steps, section = [], {}
    if mode == "domain":
        for kind in kinds:
            steps += [evaluator(c) for c in domain_knowledge_path(side, kind)]
        section = ablation_section(steps, None, algorithm)
    else:
        whitelist = s.get("whitelist")
        if whitelist is not None:
            try:
                whitelist = [SensorConfig.from_names([w]).sites[0] for w in whitelist]
            except KeyError as exc:
                raise ValidationError(f"unknown site {exc} in whitelist; valid: {', '.join(SITE_NAMES)}") from None
        results = [exhaustive_search(evaluator, kind, whitelist, s.get("budget")) for kind in kinds]
        for r in results:
            steps += r.steps
        section = {"algorithm": algorithm, "domain_path": [],
                   "exhaustive": {k.value: {"evaluations": r.evaluations, "best": r.best.as_dict()}
                                  for k, r in zip(kinds, results)}}
    write_search_csv(steps, out / "search.csv")
    report = EvalReport(config=cfg.echo(), algorithms=[algorithm], ablation=section,
                        notes=[f"sensor search ({mode}) with {algorithm.upper()}", ROC_AXES_NOTE])
    _finish_report(report, out)


def cmd_bench(cfg: RunConfig, out: Path, args) -> None:
    from .bench import (
        DEFAULT_WALL_S,
        QUARTILES,
        SAMPLE_FRACTIONS,
        bench_realworld,
        clock_resolution,
        scaling_summary,
        write_timing_csv,
    )
    from .features import WindowFeaturizer
    from .report import EvalReport
    from .synth import estimate_moments, gen_feature_dataset

    b = cfg.bench
    scale = b.get("scale", "sample")
    if scale not in ("sample", "realworld"):
        raise ValidationError(f"bench scale must be 'sample' or 'realworld', not {scale!r}")
    algorithms = b.get("algorithms", cfg.algorithms)
    bad = [a for a in algorithms if a not in ALGORITHMS]
    if bad:
        raise ValidationError(f"unknown algorithm(s) {', '.join(bad)}; valid names: {', '.join(ALGORITHMS)}")
    config = cfg.sensor_config(b.get("sensors"), b.get("kind"))
    ds = _load_dataset(cfg)
    fm = WindowFeaturizer(config, cfg.window()).fit(ds).transform(ds)
    if scale == "sample":
        data = fm
        fractions = b.get("fractions", SAMPLE_FRACTIONS)
    else:
        data = gen_feature_dataset(estimate_moments(fm, int(b.get("total", 300_000)), cfg.seed))
        fractions = b.get("fractions", QUARTILES)
    wall = b.get("wall_s", DEFAULT_WALL_S)
    runs = bench_realworld(data, algorithms, fractions, int(b.get("reps", 3 if scale == "sample" else 1)),
                           cfg.seed, wall, cfg.params, log=log.info)
    write_timing_csv(runs, out / "timing.csv")
    summary = scaling_summary(runs, clock_resolution(), wall)
    report = EvalReport(config=cfg.echo(), algorithms=list(algorithms), timings={"scaling": summary},
                        notes=[f"{scale} benchmark on {data.n_windows} rows x {data.n_features} features "
                               f"({config})"])
    _finish_report(report, out)


def cmd_report(cfg: RunConfig, out: Path, args) -> None:
    """Rebuild a report (and plots) from artifacts of earlier runs."""
    from .bench import read_timing_csv, scaling_summary
    from .io import read_report
    from .report import EvalReport
    from .sensorsearch import read_search_csv

    src = Path(args.source)
    if not src.is_dir():
        raise ValidationError(f"{src} is not a directory")
    base = read_report(src / "report.json") if (src / "report.json").exists() else EvalReport(config=cfg.echo())
    timing = src / "timing.csv"
    if timing.exists():
        old = base.timings.get("scaling", {})
        res = old.get("clock_resolution_s")
        if res is None:
            raise ValidationError("timing.csv found but report.json lacks the clock resolution it was measured with")
        base.timings["scaling"] = scaling_summary(read_timing_csv(timing), res, old.get("wall_s"))
        if "runs" in old:
            for alg, run in old["runs"].items():
                if alg in base.timings["scaling"]["runs"]:
                    base.timings["scaling"]["runs"][alg]["projected_train"] = run.get("projected_train")
    search = src / "search.csv"
    if search.exists() and not base.ablation.get("domain_path"):
        rows = read_search_csv(search)
        base.ablation.setdefault("domain_path", [
            {"sites": r["sites"].split("+"), "kind": r["kind"], "n_sensors": int(r["n_sensors"]),
             "overall_ppv": float(r["overall_ppv"])} for r in rows])
    _finish_report(base, out)


COMMANDS = {
    "synth": cmd_synth,
    "featurize": cmd_featurize,
    "eval": cmd_eval,
    "search": cmd_search,
    "bench": cmd_bench,
    "report": cmd_report,
}


# argument parsing ----------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--config", metavar="JSON", help="configuration file; flags override its values")
    g.add_argument("--seed", type=int, metavar="U64", help="master random seed (default 0)")
    g.add_argument("--out", metavar="DIR", help="output directory (default ./out)")
    g.add_argument("--threads", type=int, metavar="N", help="BLAS/numba thread cap (default 1)")
    g.add_argument("-v", "--verbose", action="store_true", help="progress messages on stderr")

    data = _Parser(add_help=False)
    d = data.add_argument_group("data options")
    d.add_argument("--data", metavar="DIR", help="dataset directory written by 'synth' "
                                                  "(default: simulate in memory)")
    d.add_argument("--rate", type=float, dest="sample_rate_hz", metavar="HZ", help="sample rate (default 240)")
    d.add_argument("--sensors", type=_csv_list, metavar="SITES",
                   help=f"comma-separated sites (default all: {','.join(SITE_NAMES)})")
    d.add_argument("--kind", choices=["imu", "accel"], help="channels per site (default imu)")
    d.add_argument("--window", type=float, dest="window_width_s", metavar="S", help="window width s (default 0.25)")
    d.add_argument("--stride", type=float, dest="window_stride_s", metavar="S", help="window stride s (default 0.1)")
    _add_synth_flags(d)

    evalp = _Parser(add_help=False)
    e = evalp.add_argument_group("evaluation options")
    e.add_argument("--algorithms", type=_csv_list, metavar="NAMES",
                   help=f"comma-separated subset of {','.join(ALGORITHMS)}")
    e.add_argument("--train-frac", type=float, dest="train_frac", metavar="FRAC", help="training share per label (default 0.6)")
    e.add_argument("--repeats", type=int, metavar="N", help="number of random splits (default 10)")

    parser = _Parser(prog="moveprim", description="Movement-primitive classification experiments.",
                     parents=[common])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", parents=[common], help="simulate a labeled dataset and write it as CSV")
    _add_synth_flags(p.add_argument_group("simulation options"))
    p.add_argument("--rate", type=float, dest="sample_rate_hz", metavar="HZ", help="sample rate (default 240)")

    sub.add_parser("featurize", parents=[common, data], help="write the window feature matrix")
    sub.add_parser("eval", parents=[common, data, evalp], help="repeated-split evaluation report")

    p = sub.add_parser("search", parents=[common, data, evalp], help="sensor-configuration ablation")
    p.add_argument("--mode", choices=["domain", "exhaustive"], help="removal path or all subsets (default domain)")
    p.add_argument("--whitelist", type=_csv_list, metavar="SITES", help="sites to enumerate in exhaustive mode")
    p.add_argument("--kinds", type=_csv_list, metavar="KINDS", help="data kinds to evaluate (default imu,accel for domain mode, --kind for exhaustive)")
    p.add_argument("--search-algorithm", dest="search_algorithm", metavar="NAME", help="scoring algorithm (default lda)")
    p.add_argument("--budget", type=int, metavar="N", help="refuse searches needing more evaluations")
    p.add_argument("--active-side", dest="search_side", choices=["left", "right"], help="active arm (default right)")

    p = sub.add_parser("bench", parents=[common, data, evalp], help="training/testing time scaling")
    p.add_argument("--scale", choices=["sample", "realworld"],
                   help="windows at 20..100%% (sample) or moment-matched rows at quartiles (realworld)")
    p.add_argument("--total", type=int, metavar="N", help="moment-matched rows for realworld scale (default 300000)")
    p.add_argument("--reps", type=int, metavar="N", help="timed repetitions per fraction")
    p.add_argument("--wall", type=float, dest="wall_s", metavar="S",
                   help="skip fractions projected to train longer than this (default 1800)")
    p.add_argument("--fractions", type=lambda t: [float(v) for v in _csv_list(t)], metavar="F",
                   help="comma-separated data fractions")
    p.add_argument("--bench-sensors", dest="bench_sensors", type=_csv_list, metavar="SITES",
                   help="sites whose features feed the benchmark (default --sensors)")
    p.add_argument("--bench-kind", dest="bench_kind", choices=["imu", "accel"], help="channels for the benchmark")

    p = sub.add_parser("report", parents=[common], help="rebuild report and plots from a previous run")
    p.add_argument("source", metavar="DIR", help="output directory of an earlier eval/search/bench run")
    return parser


def _add_synth_flags(group) -> None:
    group.add_argument("--counts", type=lambda t: [int(v) for v in _csv_list(t)], metavar="R,T,P,I",
                       help="segments per primitive (default 810,708,781,582)")
    group.add_argument("--noise-std", dest="noise_std", type=float, metavar="STD", help="accelerometer noise, m/s^2 (default 0.6)")
    group.add_argument("--jitter", type=float, metavar="FRAC", help="relative per-segment variability (default 0.25)")
    group.add_argument("--recordings", dest="n_recordings", type=int, metavar="N", help="number of recordings (default 24)")
    group.add_argument("--active-side-synth", dest="active_side", choices=["left", "right"],
                       help="simulated active arm (default right)")


_TOP = ("data", "sample_rate_hz", "sensors", "kind", "window_width_s", "window_stride_s", "algorithms",
        "train_frac", "repeats", "seed", "out", "threads")
_NESTED = {
    "synth": {"counts": "counts", "noise_std": "noise_std", "jitter": "jitter", "n_recordings": "n_recordings",
              "active_side": "active_side"},
    "search": {"mode": "mode", "whitelist": "whitelist", "kinds": "kinds", "search_algorithm": "algorithm",
               "budget": "budget", "search_side": "active_side"},
    "bench": {"scale": "scale", "total": "total", "reps": "reps", "wall_s": "wall_s", "fractions": "fractions",
              "bench_sensors": "sensors", "bench_kind": "kind"},
}


def resolve_config(args) -> RunConfig:
    doc: dict = {}
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ValidationError(f"cannot read config {args.config}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config {args.config} is not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ValidationError("config file must hold a JSON object")
    ns = vars(args)
    for key in _TOP:
        if ns.get(key) is not None:
            doc[key] = ns[key]
    for section, mapping in _NESTED.items():
        for flag, key in mapping.items():
            if ns.get(flag) is not None:
                doc.setdefault(section, {})[key] = ns[flag]
    try:
        return RunConfig.from_dict(doc)
    except TypeError as exc:
        raise ValidationError(f"invalid configuration: {exc}") from None


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = resolve_config(args)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=cfg.threads):
            COMMANDS[args.command](cfg, out, args)
        write_manifest(out, args.command, cfg)
    except (ValidationError, KeyError) as exc:
        print(f"moveprim {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except (MovePrimError, OSError, ArithmeticError, RuntimeError, ValueError, MemoryError) as exc:
        print(f"moveprim {args.command}: failed: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
