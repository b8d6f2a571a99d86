"""Train-vs-extended comparison of multiscale and fixed-perplexity models.

For every method: split off a test fraction, fit on the training rows,
embed the training rows (train scenario) and the training rows followed by
the projected test rows (extended scenario), and score both with the
R_NX / AUC curves.
"""
from __future__ import annotations

import csv
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .datasets import save_csv, train_test_split
from .neural_net import DEFAULT_WIDTHS, save_model
from .quality import evaluate_embedding
from .trainer import TrainConfig, fit, transform

log = logging.getLogger(__name__)

# All randomness derives from one user seed via fixed offsets.
SPLIT_SEED_OFFSET = 0
MODEL_SEED_OFFSET = 1000
JITTER_SEED_OFFSET = 2000

DEFAULT_PERPLEXITIES = (8.0, 32.0, 128.0)


@dataclass
class MethodRecord:
    method: str
    widths: tuple
    train_auc: float
    extended_auc: float
    n_train: int
    n_extended: int
    curve_paths: dict = field(default_factory=dict)
    final_loss: float = float("nan")


@dataclass
class ExperimentReport:
    records: list
    config: dict
    seed: int

    def auc_table(self):
        return {(r.method, s): (r.train_auc if s == "train" else r.extended_auc)
                for r in self.records for s in ("train", "extended")}


def thread_limit():
    try:
        return max(1, int(os.environ.get("MSPTSNE_THREADS", "1")))
    except ValueError:
        return 1


class OutputSet:
    """Tracks files written during a run; removes them all if the run fails."""

    def __init__(self):
        self.paths = []

    def path(self, p):
        os.makedirs(os.path.dirname(p) or ".", exist_ok=True)
        self.paths.append(p)
        return p

    def rollback(self):
        for p in reversed(self.paths):
            try:
                os.remove(p)
            except FileNotFoundError:
                pass


def atomic_write(path, write_fn):
    """Call write_fn(tmp_path), then move tmp_path onto path."""
    tmp = f"{path}.tmp-{os.getpid()}"
    try:
        write_fn(tmp)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)


def write_curve(path, curve):
    def _w(tmp):
        with open(tmp, "w", newline="") as fh:
            fh.write(f"# auc={curve.auc!r}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["K", "qnx", "rnx"])
            for k, q, r in zip(curve.ks, curve.qnx, curve.rnx):
                w.writerow([int(k), repr(float(q)), repr(float(r))])
    atomic_write(path, _w)


def _method_configs(perplexities, base):
    cfgs = [TrainConfig(**{**base, "mode": "multiscale", "perplexity": None})]
    for p in perplexities:
        cfgs.append(TrainConfig(**{**base, "mode": "fixed", "perplexity": float(p)}))
    return cfgs


def _fit_method(cfg, x_train, x_test, width_grid):
    """Fit one method (with optional width search on train AUC)."""
    candidates = [tuple(w) for w in width_grid] if width_grid else [tuple(cfg.layer_widths)]
    best = None
    grid_rows = []
    for widths in candidates:
        c = TrainConfig(**{**asdict(cfg), "layer_widths": widths})
        try:
            model, tlog = fit(x_train, c)
        except Exception as exc:
            raise RuntimeError(f"method {cfg.label}: {exc}") from exc
        curve = evaluate_embedding(x_train, tlog.embedding)
        grid_rows.append((widths, curve.auc))
        log.info("%s widths %s train AUC %.4f", cfg.label, widths, curve.auc)
        if best is None or curve.auc > best[3].auc:
            best = (widths, model, tlog, curve)
    widths, model, tlog, train_curve = best
    y_ext = np.vstack([tlog.embedding, transform(model, x_test)])
    x_ext = np.vstack([x_train, x_test])
    ext_curve = evaluate_embedding(x_ext, y_ext)
    return dict(label=cfg.label, widths=widths, model=model, tlog=tlog,
                train_curve=train_curve, ext_curve=ext_curve, y_ext=y_ext,
                grid=grid_rows)


def run_experiment(x, out_dir, *, labels=None, perplexities=DEFAULT_PERPLEXITIES,
                   test_fraction=0.3, width_grid=None, seed=0, epochs=500,
                   learning_rate=1e-3, layer_widths=DEFAULT_WIDTHS, batch_size=1000,
                   n_components=2, data_name=""):
    """Run every method, write all artifacts under out_dir, return the report."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    split = train_test_split(n, test_fraction, seed + SPLIT_SEED_OFFSET)
    x_train, x_test = x[split.train_indices], x[split.test_indices]
    lab_train = lab_ext = None
    if labels is not None:
        lab_train = labels[split.train_indices]
        lab_ext = np.concatenate([lab_train, labels[split.test_indices]])

    base = dict(epochs=epochs, learning_rate=learning_rate, seed=seed + MODEL_SEED_OFFSET,
                layer_widths=tuple(layer_widths), batch_size=batch_size,
                n_components=n_components)
    cfgs = _method_configs(perplexities, base)
    for c in cfgs:
        c.validate()

    config = dict(data=data_name, n=n, m=x.shape[1], n_train=len(split.train_indices),
                  n_test=len(split.test_indices), perplexities=[float(p) for p in perplexities],
                  test_fraction=test_fraction, width_grid=[list(w) for w in width_grid or []],
                  seed=seed, model_seed=base["seed"],
                  **{k: (list(v) if isinstance(v, tuple) else v)
                     for k, v in base.items() if k != "seed"})

    outs = OutputSet()
    try:
        os.makedirs(out_dir, exist_ok=True)
        p = outs.path(os.path.join(out_dir, "config.json"))
        atomic_write(p, lambda t: _write_json(t, config))
        p = outs.path(os.path.join(out_dir, "data", "train.csv"))
        atomic_write(p, lambda t: save_csv(t, x_train, lab_train))
        p = outs.path(os.path.join(out_dir, "data", "extended.csv"))
        atomic_write(p, lambda t: save_csv(t, np.vstack([x_train, x_test]), lab_ext))

        workers = min(thread_limit(), len(cfgs))
        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                results = list(pool.map(
                    lambda c: _fit_method(c, x_train, x_test, width_grid), cfgs))
        else:
            results = [_fit_method(c, x_train, x_test, width_grid) for c in cfgs]

        records = []
        for res in results:
            label = res["label"]
            paths = {}
            for scen, curve, y, lab in (("train", res["train_curve"], res["tlog"].embedding, lab_train),
                                        ("extended", res["ext_curve"], res["y_ext"], lab_ext)):
                cp = outs.path(os.path.join(out_dir, "curves", f"{label}_{scen}.csv"))
                write_curve(cp, curve)
                ep = outs.path(os.path.join(out_dir, "embeddings", f"{label}_{scen}.csv"))
                atomic_write(ep, lambda t, y=y, lab=lab: save_csv(t, y, lab))
                paths[scen] = cp
            mp = outs.path(os.path.join(out_dir, "models", f"{label}.mspt"))
            atomic_write(mp, lambda t, m=res["model"]: save_model(m, t))
            lp = outs.path(os.path.join(out_dir, "logs", f"{label}.csv"))
            atomic_write(lp, lambda t, tl=res["tlog"]: write_train_log(t, tl))
            records.append(MethodRecord(label, res["widths"], res["train_curve"].auc,
                                        res["ext_curve"].auc, res["train_curve"].n,
                                        res["ext_curve"].n, paths, res["tlog"].final_loss))
        if width_grid:
            gp = outs.path(os.path.join(out_dir, "grid.csv"))
            atomic_write(gp, lambda t: _write_grid(t, results))
        sp = outs.path(os.path.join(out_dir, "summary.csv"))
        atomic_write(sp, lambda t: _write_summary(t, records))
    except BaseException:
        outs.rollback()
        raise
    return ExperimentReport(records, config, seed)


def write_train_log(path, tlog):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "loss"])
        for i, loss in enumerate(tlog.losses, start=1):
            w.writerow([i, repr(float(loss))])


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _widths_str(widths):
    return "-".join(str(int(w)) for w in widths)


def _write_summary(path, records):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "scenario", "n", "auc", "widths", "final_loss"])
        for r in records:
            w.writerow([r.method, "train", r.n_train, repr(r.train_auc),
                        _widths_str(r.widths), repr(r.final_loss)])
            w.writerow([r.method, "extended", r.n_extended, repr(r.extended_auc),
                        _widths_str(r.widths), repr(r.final_loss)])


def _write_grid(path, results):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "widths", "train_auc", "selected"])
        for res in results:
            for widths, auc in res["grid"]:
                w.writerow([res["label"], _widths_str(widths), repr(auc),
                            int(tuple(widths) == tuple(res["widths"]))])


def read_summary(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
