"""Command line interface.

Subcommands::

    aoiadapt synth      write a synthetic gaze CSV
    aoiadapt init-aois  build an initial AOI map
    aoiadapt adapt      adapt an AOI map on a dataset
    aoiadapt evaluate   full experiment: split, init, adapt, score, report
    aoiadapt report     merge report.csv files into one table and figure
"""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from aoiadapt import experiment
from aoiadapt.adaptation import AdaptationConfig, run_direct, run_gradient
from aoiadapt.aoi_map import LabelMapFormatError, load_label_map, save_label_map
from aoiadapt.classifier import EnsembleParams
from aoiadapt.gaze_data import DataFormatError, load_dataset, save_dataset
from aoiadapt.synth import generate_synthetic, planted_offset_spec

logger = logging.getLogger("aoiadapt")


def _add_data_args(p, required=True):
    p.add_argument("--data", required=required, help="gaze CSV (recording_id,subject_label,stimulus_id,t,x,y)")
    p.add_argument("--width", type=int, required=required, help="stimulus width in pixels")
    p.add_argument("--height", type=int, required=required, help="stimulus height in pixels")
    p.add_argument("--oob-policy", choices=("drop", "clamp"), default="drop")


def _add_synth_args(p):
    g = p.add_argument_group("synthetic planted-offset data")
    g.add_argument("--n-classes", type=int, default=2)
    g.add_argument("--recordings-per-class", type=int, default=20)
    g.add_argument("--samples", type=int, default=300, help="samples per recording")
    g.add_argument("--size", type=int, default=200, help="square stimulus size")
    g.add_argument("--offset", type=float, default=12.0, help="blob offset from grid corners [px]")
    g.add_argument("--noise", type=float, default=0.3, help="uniform noise fraction")
    g.add_argument("--jitter", type=float, default=8.0, help="per-recording blob shift std [px]")
    g.add_argument("--spread", type=float, default=10.0, help="blob std [px]")
    g.add_argument("--contrast", type=float, default=0.2, help="class difference in dwell share")
    g.add_argument("--n-stimuli", type=int, default=4)


def _synth_spec(args):
    return planted_offset_spec(
        offset=args.offset, noise=args.noise, n_classes=args.n_classes,
        recordings_per_class=args.recordings_per_class, samples_per_recording=args.samples,
        size=args.size, blob_spread=args.spread, jitter=args.jitter, contrast=args.contrast,
        n_stimuli=args.n_stimuli)


def _add_init_args(p):
    p.add_argument("--init", dest="init_method", choices=experiment.INIT_METHODS)
    p.add_argument("--rows", dest="grid_rows", type=int)
    p.add_argument("--cols", dest="grid_cols", type=int)
    p.add_argument("-k", "--k", dest="kmeans_k", type=int)
    p.add_argument("--sigma", dest="heatmap_sigma", type=float, help="heatmap kernel std [px]")
    p.add_argument("--smoothing", type=float, help="extra Gaussian smoothing before segmentation [px]")
    p.add_argument("--merge-threshold", type=float)


def _add_adapt_args(p):
    p.add_argument("--iterations", type=int)
    p.add_argument("--max-step", type=int, help="largest growth step of the gradient method [px]")
    p.add_argument("--val-fraction", type=float)
    p.add_argument("--n-trees", type=int)
    p.add_argument("--min-leaf", type=int)
    p.add_argument("--max-depth", type=int)
    p.add_argument("--features-per-split", type=int)


def _classifier_params(args, base=None):
    base = base or EnsembleParams()
    kw = {k: getattr(args, k) for k in ("n_trees", "min_leaf", "max_depth", "features_per_split")
          if getattr(args, k, None) is not None}
    return replace(base, **kw)


def build_parser():
    parser = argparse.ArgumentParser(prog="aoiadapt", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic gaze CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    _add_synth_args(p)

    p = sub.add_parser("init-aois", help="build an initial AOI map")
    _add_data_args(p)
    _add_init_args(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="label map file to write")
    p.add_argument("--png", help="also render the map to this image")

    p = sub.add_parser("adapt", help="adapt an AOI map on a dataset")
    _add_data_args(p)
    p.add_argument("--aois", required=True, help="initial label map")
    p.add_argument("--method", choices=("direct", "gradient"), default="gradient")
    _add_adapt_args(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("evaluate", help="run a full experiment")
    p.add_argument("--config", help="JSON experiment config; flags override it")
    _add_data_args(p, required=False)
    p.add_argument("--synth", action="store_true", help="use the planted-offset synthetic benchmark")
    _add_synth_args(p)
    _add_init_args(p)
    p.add_argument("--adaptation", choices=experiment.ADAPTATIONS)
    _add_adapt_args(p)
    p.add_argument("--dataset-name")
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir")
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("report", help="merge report.csv files")
    p.add_argument("inputs", nargs="+", help="report.csv files or experiment directories")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--no-figures", action="store_true")
    return parser


def cmd_synth(args):
    d = generate_synthetic(_synth_spec(args), seed=args.seed)
    save_dataset(d, args.out)
    print(f"wrote {len(d)} recordings to {args.out}")


def cmd_init_aois(args):
    d = load_dataset(args.data, args.width, args.height, args.oob_policy)
    cfg = experiment.ExperimentConfig.from_dict({
        "seed": args.seed, "data": args.data, "width": args.width, "height": args.height,
        **{k: getattr(args, k) for k in ("init_method", "grid_rows", "grid_cols", "kmeans_k",
                                          "heatmap_sigma", "smoothing", "merge_threshold")
           if getattr(args, k) is not None}})
    m = experiment.build_initial_map(cfg, d, args.seed)
    save_label_map(m, args.out)
    if args.png:
        from aoiadapt import plotting
        plotting.plot_aoi_map(m, d, args.png, title=f"{cfg.init_method} {cfg.parameter}")
    print(f"wrote {m.label_set().size} AOIs to {args.out}")


def cmd_adapt(args):
    d = load_dataset(args.data, args.width, args.height, args.oob_policy)
    m0 = load_label_map(args.aois)
    if (m0.width, m0.height) != (d.width, d.height):
        raise experiment.ConfigError(
            f"AOI map is {m0.width}x{m0.height} but the stimulus is {d.width}x{d.height}")
    defaults = AdaptationConfig()
    cfg = AdaptationConfig(
        iterations=args.iterations if args.iterations is not None else defaults.iterations,
        max_step=args.max_step or defaults.max_step,
        val_fraction=args.val_fraction or defaults.val_fraction,
        classifier=_classifier_params(args))
    runner = run_direct if args.method == "direct" else run_gradient
    m, trace = runner(d, m0, cfg, rng=np.random.default_rng(args.seed))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_label_map(m0, out / "aois_init.map")
    save_label_map(m, out / "aois_final.map")
    trace.to_csv(out / "trace.csv")
    if not args.no_figures:
        from aoiadapt import plotting
        plotting.plot_aoi_map(m, d, out / "aois_final.png", title=f"{args.method} adapted AOIs")
        if len(trace):
            plotting.plot_trace(trace, out / "trace.png")
    accepted = sum(r.accepted and r.changed for r in trace)
    print(f"{args.method}: {accepted}/{len(trace)} growth steps accepted; outputs in {out}")


EVAL_KEYS = ("data", "width", "height", "oob_policy", "init_method", "grid_rows", "grid_cols",
             "kmeans_k", "heatmap_sigma", "smoothing", "merge_threshold", "adaptation",
             "iterations", "max_step", "val_fraction", "dataset_name", "seed")


def cmd_evaluate(args):
    data = json.loads(Path(args.config).read_text(encoding="utf-8")) if args.config else {}
    for k in EVAL_KEYS:
        v = getattr(args, k, None)
        if v is not None and not (k == "oob_policy" and v == "drop" and "oob_policy" in data):
            data[k] = v
    if args.synth:
        data["synth"] = _synth_spec(args).to_dict()
        data.pop("data", None)
        data.setdefault("dataset_name", "planted-offset")
    if args.out_dir:
        data["output_dir"] = args.out_dir
    if args.no_figures:
        data["figures"] = False
    if "seed" not in data:
        raise experiment.ConfigError("a seed is required (--seed or \"seed\" in the config)")
    cfg = experiment.ExperimentConfig.from_dict(data)
    base = cfg.classifier
    cfg = replace(cfg, classifier=_classifier_params(args, base))
    result = experiment.run_experiment(cfg)
    r = result.row
    opti = "-" if r.opti_acc is None else f"{100 * r.opti_acc:.2f}"
    print(f"{r.dataset} {r.adaptation} {r.init_method} {r.parameter}: "
          f"init {100 * r.init_acc:.2f}  opti {opti}  chance {100 * r.chance:.2f}  "
          f"({result.runtime_s:.1f}s)")
    if cfg.output_dir:
        print(f"outputs in {cfg.output_dir}")


def cmd_report(args):
    rows = []
    for item in args.inputs:
        p = Path(item)
        if p.is_dir():
            p = p / "report.csv"
        rows.extend(experiment.read_report(p))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = experiment.export_report(rows, out / "report.csv", out / "report.txt")
    if not args.no_figures:
        from aoiadapt import plotting
        plotting.plot_report(rows, out / "report.png")
    sys.stdout.write((out / "report.txt").read_text(encoding="utf-8"))


COMMANDS = {
    "synth": cmd_synth,
    "init-aois": cmd_init_aois,
    "adapt": cmd_adapt,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except (experiment.ConfigError, DataFormatError, LabelMapFormatError, FileNotFoundError,
            ValueError) as exc:
        print(f"aoiadapt {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
