"""End-to-end experiment driver and result tables."""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from aoiadapt import aoi_init
from aoiadapt.adaptation import AdaptationConfig, run_direct, run_gradient
from aoiadapt.aoi_map import save_label_map
from aoiadapt.classifier import EnsembleParams, TreeEnsemble, average_class_accuracy
from aoiadapt.features import compute_features
from aoiadapt.gaze_data import load_dataset, stimulus_holdout_split
from aoiadapt.synth import SynthSpec, generate_synthetic, planted_offset_spec

logger = logging.getLogger(__name__)

INIT_METHODS = ("grid", "kmeans", "gradient")
ADAPTATIONS = ("none", "direct", "gradient")


class ConfigError(ValueError):
    """Raised for invalid or contradictory experiment settings."""


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    data: str | None = None
    width: int | None = None
    height: int | None = None
    oob_policy: str = "drop"
    synth: SynthSpec | None = None
    dataset_name: str = ""
    init_method: str = "grid"
    grid_rows: int = 4
    grid_cols: int = 4
    kmeans_k: int = 5
    heatmap_sigma: float = 25.0
    smoothing: float = 2.0
    merge_threshold: float = 0.05
    adaptation: str = "gradient"
    iterations: int = 50
    max_step: int = 10
    val_fraction: float = 1 / 3
    test_fraction: float = 0.25
    classifier: EnsembleParams = field(default_factory=EnsembleParams)
    output_dir: str | None = None
    figures: bool = True

    def __post_init__(self):
        if self.seed is None:
            raise ConfigError("a seed is required")
        if self.iterations < 0:
            raise ConfigError("iterations must be >= 0")
        if self.init_method not in INIT_METHODS:
            raise ConfigError(f"init method must be one of {INIT_METHODS}, got {self.init_method!r}")
        if self.adaptation not in ADAPTATIONS:
            raise ConfigError(f"adaptation must be one of {ADAPTATIONS}, got {self.adaptation!r}")
        if self.data is None and self.synth is None:
            raise ConfigError("give either a dataset path or a synthetic spec")
        if self.data is not None and self.synth is not None:
            raise ConfigError("give a dataset path or a synthetic spec, not both")
        if self.data is not None and (self.width is None or self.height is None):
            raise ConfigError("a CSV dataset needs --width and --height")

    @property
    def parameter(self):
        if self.init_method == "grid":
            return f"{self.grid_rows}x{self.grid_cols}"
        if self.init_method == "kmeans":
            return str(self.kmeans_k)
        return f"sigma={self.heatmap_sigma:g}"

    def to_dict(self):
        out = asdict(self)
        if self.synth is not None:
            out["synth"] = self.synth.to_dict()
        return out

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if isinstance(data.get("synth"), dict):
            data["synth"] = SynthSpec.from_dict(data["synth"])
        if isinstance(data.get("classifier"), dict):
            data["classifier"] = EnsembleParams(**data["classifier"])
        return cls(**data)


def load_config(path, **overrides):
    """Read a JSON config and apply non-``None`` overrides."""
    data = json.loads(Path(path).read_text(encoding="utf-8")) if path else {}
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(data)


@dataclass
class ReportRow:
    dataset: str
    adaptation: str
    init_method: str
    parameter: str
    init_acc: float
    opti_acc: float | None
    chance: float
    best: bool = False


@dataclass
class ExperimentResult:
    row: ReportRow
    initial_map: object
    final_map: object
    trace: object
    train: object
    test: object
    runtime_s: float


def _streams(seed):
    names = ("synth", "split", "init", "eval", "adapt")
    return dict(zip(names, np.random.SeedSequence(seed).spawn(len(names))))


def build_initial_map(cfg, d, seed):
    if cfg.init_method == "grid":
        return aoi_init.grid_init(d.width, d.height, cfg.grid_rows, cfg.grid_cols)
    if len(d) == 0:
        raise ConfigError(f"{cfg.init_method} initialisation needs gaze data, the training set is empty")
    if cfg.init_method == "kmeans":
        return aoi_init.kmeans_init(d, cfg.kmeans_k, seed=seed)
    h = aoi_init.compute_heatmap(d, cfg.heatmap_sigma)
    return aoi_init.gradient_segment_heatmap(h, cfg.smoothing, cfg.merge_threshold)


def evaluate_map(train, test, m, params, seed):
    """Balanced test accuracy of a model trained on ``train`` under map ``m``."""
    fm_train = compute_features(train, m)
    model = TreeEnsemble(params).fit(fm_train.values, fm_train.subject_labels,
                                     np.random.default_rng(seed))
    fm_test = compute_features(test, m)
    return average_class_accuracy(model.predict(fm_test.values), fm_test.subject_labels)


def load_experiment_data(cfg):
    if cfg.synth is not None:
        return generate_synthetic(cfg.synth, seed=_streams(cfg.seed)["synth"])
    return load_dataset(cfg.data, cfg.width, cfg.height, cfg.oob_policy)


def run_experiment(cfg):
    """Run one configuration end to end.

    The stimulus-disjoint test split is drawn first and is only touched to
    score the initial and the adapted map after adaptation has finished.
    """
    start = time.perf_counter()
    streams = _streams(cfg.seed)
    data = load_experiment_data(cfg)
    if len(data.classes) < 2:
        raise ConfigError("the dataset holds fewer than two classes")
    split_seed = int(streams["split"].generate_state(1)[0])
    train, test = stimulus_holdout_split(data, cfg.test_fraction, seed=split_seed)
    init_seed = int(streams["init"].generate_state(1)[0])
    m0 = build_initial_map(cfg, train, init_seed)
    # both maps are scored with identically seeded models
    eval_seed = streams["eval"]
    init_acc = evaluate_map(train, test, m0, cfg.classifier, eval_seed)

    trace, m_final, opti_acc = None, m0, None
    if cfg.adaptation != "none":
        acfg = AdaptationConfig(iterations=cfg.iterations, val_fraction=cfg.val_fraction,
                                max_step=cfg.max_step, classifier=cfg.classifier)
        runner = run_direct if cfg.adaptation == "direct" else run_gradient
        m_final, trace = runner(train, m0, acfg, rng=np.random.default_rng(streams["adapt"]))
        opti_acc = evaluate_map(train, test, m_final, cfg.classifier, eval_seed)

    row = ReportRow(
        dataset=cfg.dataset_name or ("synthetic" if cfg.synth is not None else Path(cfg.data).stem),
        adaptation=cfg.adaptation,
        init_method=cfg.init_method,
        parameter=cfg.parameter,
        init_acc=init_acc,
        opti_acc=opti_acc,
        chance=1.0 / len(data.classes),
    )
    runtime = time.perf_counter() - start
    logger.info("%s/%s %s: init %.4f opti %s (%.1fs)", row.adaptation, row.init_method,
                row.parameter, init_acc, "-" if opti_acc is None else f"{opti_acc:.4f}", runtime)
    result = ExperimentResult(row, m0, m_final, trace, train, test, runtime)
    if cfg.output_dir:
        write_outputs(cfg, result)
    return result


def write_outputs(cfg, result):
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    export_report([result.row], out / "report.csv", out / "report.txt")
    save_label_map(result.initial_map, out / "aois_init.map")
    save_label_map(result.final_map, out / "aois_final.map")
    if result.trace is not None:
        result.trace.to_csv(out / "trace.csv")
    (out / "config.resolved").write_text(
        json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (out / "run_info.json").write_text(
        json.dumps({"runtime_s": round(result.runtime_s, 3)}, indent=2) + "\n", encoding="utf-8")
    if cfg.figures:
        from aoiadapt import plotting

        plotting.plot_aoi_map(result.initial_map, result.train, out / "aois_init.png",
                              title="initial AOIs")
        plotting.plot_aoi_map(result.final_map, result.train, out / "aois_final.png",
                              title=f"{cfg.adaptation} adapted AOIs")
        if result.trace is not None and len(result.trace):
            plotting.plot_trace(result.trace, out / "trace.png")


REPORT_COLUMNS = ("dataset", "adaptation", "init_method", "parameter", "init", "opti", "chance", "best")


def _pct(v):
    return "" if v is None else f"{100 * v:.2f}"


def flag_best(rows):
    """Mark the rows holding the highest Opti accuracy of their dataset."""
    top = {}
    for r in rows:
        if r.opti_acc is not None:
            top[r.dataset] = max(top.get(r.dataset, -np.inf), r.opti_acc)
    for r in rows:
        r.best = r.opti_acc is not None and r.opti_acc == top[r.dataset]
    return rows


def export_report(rows, csv_path, txt_path=None):
    """Write ``rows`` as CSV (and optionally an aligned text table)."""
    rows = flag_best(list(rows))
    if not rows:
        raise ValueError("report needs at least one row")
    table = [[r.dataset, r.adaptation, r.init_method, r.parameter, _pct(r.init_acc),
              _pct(r.opti_acc), _pct(r.chance), "*" if r.best else ""] for r in rows]
    with Path(csv_path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        w.writerows(table)
    if txt_path is not None:
        Path(txt_path).write_text(format_table(REPORT_COLUMNS, table), encoding="utf-8")
    return rows


def format_table(header, table):
    widths = [max(len(str(c)) for c in col) for col in zip(header, *table)]
    lines = ["  ".join(str(c).ljust(w) for c, w in zip(header, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for row in table:
        lines.append("  ".join(str(c).ljust(w) for c, w in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"


def read_report(path):
    rows = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            rows.append(ReportRow(
                dataset=rec["dataset"], adaptation=rec["adaptation"],
                init_method=rec["init_method"], parameter=rec["parameter"],
                init_acc=float(rec["init"]) / 100,
                opti_acc=float(rec["opti"]) / 100 if rec["opti"] else None,
                chance=float(rec["chance"]) / 100,
            ))
    return rows


def benchmark_config(seed, adaptation="direct", iterations=50, **synth_kw):
    """Configuration of the planted-offset synthetic benchmark."""
    return ExperimentConfig(seed=seed, synth=planted_offset_spec(**synth_kw),
                            dataset_name="planted-offset", init_method="grid",
                            adaptation=adaptation, iterations=iterations)
