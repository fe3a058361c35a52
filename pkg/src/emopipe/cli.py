"""Command-line entry point: ``emopipe <subcommand> [flags]``.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

from . import data, evaluation
from . import features as F
from .errors import EmopipeError
from .nn import CnnModel, MlpModel, TrainConfig, read_model, train, write_model
from .pipeline import (ImageDirectory, LandmarkReplay, PipelineConfig,
                       SyntheticStream, default_endpoints, orchestrate, read_trace)

log = logging.getLogger("emopipe")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(2, f"{self.prog}: error: {message}\n")


def _csv_list(value: str) -> list:
    return [v.strip() for v in value.split(",") if v.strip()]


def _int_list(value: str) -> list:
    try:
        return [int(v) for v in _csv_list(value)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {value!r}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="emopipe", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND",
                           parser_class=_Parser)

    s = sub.add_parser("features", help="write a feature CSV from a landmark CSV")
    s.add_argument("--landmarks", required=True)
    s.add_argument("--rep", choices=("absolute", "modified"), required=True)
    s.add_argument("--out", required=True)

    def dataset_flags(s):
        s.add_argument("--legend", required=True)
        s.add_argument("--landmarks", required=True)
        s.add_argument("--exclude-submitters", type=_csv_list,
                       default=sorted(data.DEFAULT_EXCLUDED))
        s.add_argument("--labels", type=_csv_list, default=sorted(data.DEFAULT_KEPT))
        s.add_argument("--val-per-class", type=int, default=0,
                       help="records per class held out for validation (191 in the original setup)")
        s.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("train", help="train an MLP (absolute/modified) or CNN (raster)")
    dataset_flags(s)
    s.add_argument("--rep", choices=F.REPRESENTATIONS, default="modified")
    s.add_argument("--epochs", type=int, default=5000)
    s.add_argument("--batch-size", type=int, default=32)
    s.add_argument("--lr", type=float, default=1e-6)
    s.add_argument("--hidden", type=_int_list, default=[1024, 512, 256])
    s.add_argument("--dropout", type=float, default=None,
                   help="defaults to 0.5 for MLPs and 0.25 for the CNN")
    s.add_argument("--grid-size", type=int, default=F.GRID_SIZE)
    s.add_argument("--no-flip", action="store_true", help="disable raster flip augmentation")
    s.add_argument("--out", required=True)
    s.add_argument("--history", help="defaults to <out>.history.csv")

    s = sub.add_parser("eval", help="certainty/accuracy report for a model")
    dataset_flags(s)
    s.add_argument("--model", required=True)
    s.add_argument("--rep", choices=F.REPRESENTATIONS, default="modified")
    s.add_argument("--csv", help="also write the report as CSV")

    def pipeline_flags(s):
        s.add_argument("--model", required=True)
        s.add_argument("--rep", choices=("absolute", "modified"), default="modified")
        s.add_argument("--source", choices=("synthetic", "replay", "images"), default="synthetic")
        s.add_argument("--landmarks", help="landmark CSV for --source replay")
        s.add_argument("--images", help="image directory for --source images")
        s.add_argument("--count", type=int, default=100, help="frames for --source synthetic")
        s.add_argument("--rate", type=float, default=None, help="replay frames per second")
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--port-base", type=int, default=None)
        s.add_argument("--timeout", type=float, default=None)

    s = sub.add_parser("run", help="run the input/model/controller/view pipeline")
    pipeline_flags(s)
    s.add_argument("--out", help="view output file (default: stdout)")
    s.add_argument("--trace", help="write controller per-frame timestamps here")

    s = sub.add_parser("synth", help="write a synthetic landmark CSV and legend CSV")
    s.add_argument("--n", type=int, required=True, help="records per class")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--sigma", type=float, default=2.0, help="jitter in pixels")
    s.add_argument("--out", required=True, help="landmark CSV path")
    s.add_argument("--legend-out", help="defaults to <out stem>_legend.csv")

    s = sub.add_parser("bench", help="time the controller over a pipeline run")
    pipeline_flags(s)
    s.add_argument("--out", help="write latency stats as JSON")

    s = sub.add_parser("inspect-model", help="print a model file's architecture")
    s.add_argument("--model", required=True)
    return p


def parse_args(argv=None) -> argparse.Namespace:
    args = build_parser().parse_args(argv)
    try:
        _validate(args)
    except UsageError as exc:
        print(f"emopipe {args.command}: error: {exc}", file=sys.stderr)
        raise SystemExit(2)
    return args


def _validate(args) -> None:
    positive = ["epochs", "batch_size", "n", "count"]
    for name in positive:
        if getattr(args, name, 1) is not None and getattr(args, name, 1) < 1:
            raise UsageError(f"--{name.replace('_', '-')} must be at least 1")
    if getattr(args, "val_per_class", 0) < 0:
        raise UsageError("--val-per-class cannot be negative")
    if args.command in ("run", "bench"):
        if args.source == "replay" and not args.landmarks:
            raise UsageError("--source replay needs --landmarks")
        if args.source == "images" and not args.images:
            raise UsageError("--source images needs --images")


def _load_split(args):
    ds = data.load_legend(args.legend, args.landmarks, args.exclude_submitters, args.labels)
    log.info("loaded %d records (dropped submitter=%d label=%d missing=%d)",
             len(ds), *ds.dropped.as_tuple())
    if args.val_per_class:
        return data.stratified_split(ds, args.val_per_class, args.seed)
    return ds, None


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def cmd_features(args) -> int:
    rows = data.read_landmarks_csv(args.landmarks)
    dim = F.feature_dim(args.rep)
    _write_csv(args.out, ["image_id", "label"] + [f"f{i}" for i in range(dim)],
               ([image_id, label] + [repr(float(v)) for v in F.featurize(pts, args.rep)]
                for image_id, label, pts in rows))
    return 0


def cmd_train(args) -> int:
    train_ds, val_ds = _load_split(args)
    labels = train_ds.class_labels
    if args.rep == "raster":
        flip = not args.no_flip
        model = CnnModel.create(args.grid_size, class_labels=labels, seed=args.seed,
                                dropout=0.25 if args.dropout is None else args.dropout)
        xt, yt = data.build_tensors(train_ds, "raster", flip, args.grid_size)
        val = data.build_tensors(val_ds, "raster", False, args.grid_size, labels) if val_ds else None
    else:
        model = MlpModel.create(F.feature_dim(args.rep), args.hidden, labels, seed=args.seed,
                                dropout=0.5 if args.dropout is None else args.dropout)
        xt, yt = data.build_tensors(train_ds, args.rep)
        val = data.build_tensors(val_ds, args.rep, class_labels=labels) if val_ds else None
    config = TrainConfig(epochs=args.epochs, batch_size=args.batch_size, seed=args.seed,
                         lr=args.lr)

    def progress(epoch, h):
        if epoch % max(1, args.epochs // 20) == 0 or epoch == args.epochs:
            log.info("epoch %d: loss %.4f train %.4f val %.4f", epoch, h.train_loss[-1],
                     h.train_acc[-1], h.val_acc[-1])

    model, history = train(model, (xt, yt), val, config, on_epoch=progress)
    write_model(model, args.out)
    _write_csv(args.history or f"{args.out}.history.csv",
               ["epoch", "train_loss", "train_acc", "val_acc"],
               ([e, repr(l), repr(a), repr(v)] for e, l, a, v in history.rows()))
    print(f"trained {model.kind} for {len(history)} epochs -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    model = read_model(args.model)
    full, val = _load_split(args)
    report = evaluation.evaluate(model, val if val is not None else full, args.rep)
    sys.stdout.write(report.to_table())
    if args.csv:
        Path(args.csv).write_text(report.to_csv(), encoding="utf-8")
    return 0


def _pipeline_config(args, **extra) -> PipelineConfig:
    if args.source == "synthetic":
        source = SyntheticStream(args.seed, args.count)
    elif args.source == "replay":
        source = LandmarkReplay(args.landmarks, args.rate)
    else:
        source = ImageDirectory(args.images)
    return PipelineConfig(model_path=args.model, source=source, representation=args.rep,
                          endpoints=default_endpoints(args.port_base), **extra)


def cmd_run(args) -> int:
    config = _pipeline_config(args, view_output=args.out, trace_path=args.trace)
    return orchestrate(config, timeout=args.timeout)


def cmd_bench(args) -> int:
    with tempfile.TemporaryDirectory() as tmp:
        trace = os.path.join(tmp, "trace.csv")
        config = _pipeline_config(args, view_output=os.devnull, trace_path=trace)
        orchestrate(config, timeout=args.timeout)
        stats = evaluation.bench_latency(evaluation.trace_latencies_ms(read_trace(trace)))
    print(f"controller latency over {stats.count} frames: "
          f"mean {stats.mean:.3f} ms, stddev {stats.stddev:.3f} ms")
    if args.out:
        Path(args.out).write_text(json.dumps(
            {"count": stats.count, "mean_ms": stats.mean, "stddev_ms": stats.stddev},
            indent=2) + "\n", encoding="utf-8")
    return 0


def cmd_synth(args) -> int:
    ds = data.synth_generate(args.n, args.seed, args.sigma)
    out = Path(args.out)
    legend = args.legend_out or str(out.with_name(f"{out.stem}_legend.csv"))
    data.write_landmarks_csv(out, ds.records)
    data.write_legend_csv(legend, ds.records)
    print(f"wrote {len(ds)} records to {out} and {legend}")
    return 0


def cmd_inspect(args) -> int:
    model = read_model(args.model)
    print(model.describe())
    print(f"labels: {', '.join(f'{i}={l}' for i, l in enumerate(model.class_labels))}")
    print(f"parameters: {model.n_params()}")
    return 0


COMMANDS = {
    "features": cmd_features, "train": cmd_train, "eval": cmd_eval, "run": cmd_run,
    "synth": cmd_synth, "bench": cmd_bench, "inspect-model": cmd_inspect,
}


def dispatch(args: argparse.Namespace) -> int:
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (EmopipeError, OSError, ValueError) as exc:
        print(f"emopipe {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main(argv=None) -> int:
    return dispatch(parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
