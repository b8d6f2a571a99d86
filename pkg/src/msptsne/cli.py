"""Command-line interface: gen, fit, transform, evaluate, experiment."""
from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import datasets
from .experiment import (DEFAULT_PERPLEXITIES, JITTER_SEED_OFFSET, OutputSet, atomic_write,
                         run_experiment, write_curve, write_train_log)
from .neural_net import DEFAULT_WIDTHS, ModelFormatError, load_model, save_model
from .quality import evaluate_embedding
from .similarities import DegenerateRowError
from .trainer import TrainConfig, fit, transform


class CliError(Exception):
    pass


def _int_list(s):
    try:
        vals = [int(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}")
    if not vals or any(v < 1 for v in vals):
        raise argparse.ArgumentTypeError(f"expected positive integers, got {s!r}")
    return tuple(vals)


def _float_list(s):
    try:
        return tuple(float(v) for v in s.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}")


def _width_grid(s):
    return [_int_list(part) for part in s.split(";") if part.strip()]


def _load(path, args):
    return datasets.load_csv(path, has_labels=args.labels, skip_header=args.skip_header)


def _preprocess(ds, args):
    x, labels = ds.x, ds.labels
    if getattr(args, "dedup", False):
        x, labels = datasets.dedup_rows(x, labels)
    if getattr(args, "jitter", 0.0):
        x = datasets.jitter(x, args.jitter, args.seed + JITTER_SEED_OFFSET)
    if getattr(args, "minmax", False):
        x = datasets.minmax_scale(x)
    return x, labels


def cmd_gen(args):
    if args.kind == "helix":
        ds = datasets.gen_helix(args.n, args.noise, args.seed, coils=args.coils)
    else:
        ds = datasets.gen_blobs(args.n, args.m, args.centers, seed=args.seed)
    outs = OutputSet()
    try:
        atomic_write(outs.path(args.out), lambda t: datasets.save_csv(
            t, ds.x, ds.labels if args.with_labels else None))
    except BaseException:
        outs.rollback()
        raise
    print(f"N={ds.n} M={ds.m}")


def _train_config(args, mode=None):
    perp = args.perplexity
    mode = mode or args.mode
    if mode == "multiscale":
        perp = None
    elif perp is None:
        raise CliError("--mode fixed requires --perplexity")
    cfg = TrainConfig(mode=mode, perplexity=perp, epochs=args.epochs, learning_rate=args.lr,
                      layer_widths=args.layers, batch_size=args.batch_size, seed=args.seed,
                      n_components=args.components, log_every=args.log_every)
    try:
        return cfg.validate()
    except ValueError as exc:
        raise CliError(str(exc)) from None


def cmd_fit(args):
    cfg = _train_config(args)
    ds = _load(args.data, args)
    x, _ = _preprocess(ds, args)
    try:
        model, tlog = fit(x, cfg)
    except DegenerateRowError as exc:
        raise CliError(f"{exc} (try --dedup or --jitter)") from None
    log_path = args.log or os.path.splitext(args.out)[0] + ".log.csv"
    outs = OutputSet()
    try:
        atomic_write(outs.path(args.out), lambda t: save_model(model, t))
        atomic_write(outs.path(log_path), lambda t: write_train_log(t, tlog))
    except BaseException:
        outs.rollback()
        raise
    print(f"loss first={tlog.losses[0]:.6g} last={tlog.losses[-1]:.6g} final={tlog.final_loss:.6g}")


def cmd_transform(args):
    try:
        model = load_model(args.model)
    except ModelFormatError as exc:
        raise CliError(f"{args.model}: {exc}") from None
    ds = _load(args.data, args)
    if ds.m != model.input_dim:
        raise CliError(f"input has {ds.m} columns, model expects M={model.input_dim}")
    y = transform(model, ds.x)
    outs = OutputSet()
    try:
        atomic_write(outs.path(args.out), lambda t: datasets.save_csv(t, y, ds.labels))
    except BaseException:
        outs.rollback()
        raise
    print(f"N={y.shape[0]} P={y.shape[1]}")


def cmd_evaluate(args):
    hd = _load(args.hd, args)
    ld = _load(args.ld, args)
    if hd.n != ld.n:
        raise CliError(f"HD file has {hd.n} rows but LD file has {ld.n}")
    curve = evaluate_embedding(hd.x, ld.x)
    if args.out:
        outs = OutputSet()
        try:
            write_curve(outs.path(args.out), curve)
        except BaseException:
            outs.rollback()
            raise
    print(f"auc={curve.auc!r}")


def cmd_experiment(args):
    # validate flags up front so bad configs fail before any training
    _train_config(args, mode="multiscale")
    for p in args.perplexities:
        if not p > 1:
            raise CliError(f"perplexity must be > 1, got {p:g}")
    ds = _load(args.data, args)
    x, labels = _preprocess(ds, args)
    try:
        report = run_experiment(
            x, args.out, labels=labels, perplexities=args.perplexities,
            test_fraction=args.test_fraction, width_grid=args.width_grid, seed=args.seed,
            epochs=args.epochs, learning_rate=args.lr, layer_widths=args.layers,
            batch_size=args.batch_size, n_components=args.components, data_name=ds.name)
    except DegenerateRowError as exc:
        raise CliError(f"{exc} (try --dedup or --jitter)") from None
    except ValueError as exc:
        raise CliError(str(exc)) from None
    for r in report.records:
        print(f"{r.method:>12}  train AUC {r.train_auc:.4f}  extended AUC {r.extended_auc:.4f}")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", required=True, help="output file (directory for experiment)")
    common.add_argument("--labels", action="store_true",
                        help="input CSVs carry a trailing integer label column")
    common.add_argument("--skip-header", action="store_true", help="skip the first CSV line")
    common.add_argument("-v", "--verbose", action="store_true")

    train = argparse.ArgumentParser(add_help=False)
    train.add_argument("--epochs", type=int, default=500)
    train.add_argument("--lr", type=float, default=1e-3)
    train.add_argument("--layers", type=_int_list, default=DEFAULT_WIDTHS,
                       help="hidden widths, e.g. 500,500,2000,500")
    train.add_argument("--batch-size", type=int, default=1000)
    train.add_argument("--components", type=int, default=2)
    train.add_argument("--log-every", type=int, default=0)
    train.add_argument("--dedup", action="store_true", help="drop duplicate rows before training")
    train.add_argument("--jitter", type=float, default=0.0,
                       help="add Gaussian noise of this sd before training")

    p = argparse.ArgumentParser(prog="msptsne", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="generate a synthetic dataset")
    g.add_argument("--kind", choices=["helix", "blobs"], default="helix")
    g.add_argument("--n", type=int, default=1000)
    g.add_argument("--noise", type=float, default=0.05)
    g.add_argument("--coils", type=int, default=10)
    g.add_argument("--m", type=int, default=8)
    g.add_argument("--centers", type=int, default=8)
    g.add_argument("--with-labels", action="store_true")
    g.set_defaults(func=cmd_gen)

    f = sub.add_parser("fit", parents=[common, train], help="train a parametric map")
    f.add_argument("--data", required=True)
    f.add_argument("--mode", choices=["multiscale", "fixed"], default="multiscale")
    f.add_argument("--perplexity", type=float)
    f.add_argument("--log", help="training log CSV (default <out>.log.csv)")
    f.set_defaults(func=cmd_fit)

    t = sub.add_parser("transform", parents=[common], help="embed data with a trained model")
    t.add_argument("--model", required=True)
    t.add_argument("--data", required=True)
    t.set_defaults(func=cmd_transform)

    e = sub.add_parser("evaluate", parents=[common], help="Q_NX / R_NX / AUC of an embedding")
    e.add_argument("--hd", required=True)
    e.add_argument("--ld", required=True)
    e.set_defaults(func=cmd_evaluate)

    x = sub.add_parser("experiment", parents=[common, train],
                       help="multiscale vs fixed perplexities, train and extended scenarios")
    x.add_argument("--data", required=True)
    x.add_argument("--perplexities", type=_float_list, default=DEFAULT_PERPLEXITIES)
    x.add_argument("--test-fraction", type=float, default=0.3)
    x.add_argument("--width-grid", type=_width_grid, default=None,
                   help="semicolon-separated width lists, e.g. '100,100,400,100;500,500,2000,500'")
    x.add_argument("--minmax", action="store_true", help="min-max scale each feature")
    x.set_defaults(func=cmd_experiment, perplexity=None)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (CliError, datasets.CsvFormatError, FileNotFoundError, ValueError,
            RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
