"""Run the multiscale-vs-fixed-perplexity comparison on helix and a 336x8
cluster dataset (or user CSVs) and print the AUC table.

    python scripts/run_experiments.py --out runs/ [--epochs 500] [--ecoli path.csv]
"""
import argparse
import os
import time

from msptsne.datasets import gen_blobs, gen_helix, load_csv
from msptsne.experiment import run_experiment


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="runs")
    ap.add_argument("--epochs", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--ecoli", help="CSV with ECOLI-like data (N x 8, trailing label column)")
    ap.add_argument("--extra", nargs="*", default=[], help="more CSV files (no labels)")
    args = ap.parse_args()

    sets = [("helix", gen_helix(1000, noise_sd=0.05, seed=args.seed))]
    if args.ecoli:
        sets.append(("ecoli", load_csv(args.ecoli, has_labels=True)))
    else:
        sets.append(("blobs", gen_blobs(336, 8, seed=args.seed)))
    sets += [(os.path.splitext(os.path.basename(p))[0], load_csv(p)) for p in args.extra]

    for name, ds in sets:
        t0 = time.perf_counter()
        rep = run_experiment(ds.x, os.path.join(args.out, name), labels=ds.labels,
                             seed=args.seed, epochs=args.epochs, data_name=name)
        print(f"== {name}  N={ds.n} M={ds.m}  ({time.perf_counter() - t0:.0f}s)")
        for r in rep.records:
            print(f"   {r.method:>12}  train {r.train_auc:.4f}  extended {r.extended_auc:.4f}")


if __name__ == "__main__":
    main()
