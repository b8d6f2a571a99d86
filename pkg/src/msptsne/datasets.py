"""Dataset generation, CSV ingestion and train/test splitting."""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np


class CsvFormatError(ValueError):
    def __init__(self, msg, line=None):
        self.line = line
        super().__init__(msg if line is None else f"line {line}: {msg}")


@dataclass
class Dataset:
    x: np.ndarray
    labels: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        if self.x.ndim != 2:
            raise ValueError(f"data matrix must be 2-D, got shape {self.x.shape}")
        if not np.all(np.isfinite(self.x)):
            raise ValueError("data matrix contains non-finite values")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.x.shape[0],):
                raise ValueError("labels length does not match number of rows")

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def m(self):
        return self.x.shape[1]


@dataclass(frozen=True)
class Split:
    train_indices: np.ndarray
    test_indices: np.ndarray
    seed: int


def gen_helix(n=1000, noise_sd=0.0, seed=0, coils=10, height=1.0):
    """Closed 3-D helix wound around the unit circle.

    Point i sits at t = i / n on (cos 2πt, sin 2πt, height·cos 2π·coils·t),
    plus isotropic Gaussian noise of standard deviation ``noise_sd``. Labels
    give the coil index each point belongs to.
    """
    if n < 8:
        raise ValueError(f"helix needs n >= 8, got {n}")
    if noise_sd < 0:
        raise ValueError("noise_sd must be >= 0")
    t = np.arange(n) / n
    x = np.column_stack([np.cos(2 * np.pi * t), np.sin(2 * np.pi * t),
                         height * np.cos(2 * np.pi * coils * t)])
    if noise_sd > 0:
        x = x + np.random.default_rng(seed).normal(scale=noise_sd, size=x.shape)
    labels = np.floor(t * coils).astype(np.int64)
    return Dataset(x, labels, name="helix")


def gen_blobs(n=336, m=8, centers=8, spread=0.25, seed=0):
    """Gaussian clusters of unequal size and width in the unit hypercube.

    A stand-in with the shape of small tabular benchmarks (e.g. N=336, M=8)
    when the real data is not at hand.
    """
    if n < 8 or m < 1 or centers < 1:
        raise ValueError("need n >= 8, m >= 1, centers >= 1")
    rng = np.random.default_rng(seed)
    weights = rng.dirichlet(np.full(centers, 2.0))
    labels = rng.choice(centers, size=n, p=weights)
    mu = rng.uniform(0, 1, size=(centers, m))
    widths = spread * rng.uniform(0.3, 1.0, size=centers)
    x = mu[labels] + rng.normal(size=(n, m)) * widths[labels, None]
    return Dataset(x, labels.astype(np.int64), name="blobs")


def load_csv(path, has_labels=False, skip_header=False):
    """Read a numeric CSV; blank lines and '#' comment lines are ignored.

    ``skip_header`` drops the first non-comment line.
    """
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        width = None
        header_pending = skip_header
        for lineno, rec in enumerate(reader, start=1):
            if not rec or (len(rec) == 1 and not rec[0].strip()):
                continue
            if rec[0].lstrip().startswith("#"):
                continue
            if header_pending:
                header_pending = False
                continue
            if width is None:
                width = len(rec)
            elif len(rec) != width:
                raise CsvFormatError(f"expected {width} fields, found {len(rec)}", lineno)
            try:
                rows.append([float(v) for v in rec])
            except ValueError:
                bad = next(v for v in rec if not _is_float(v))
                raise CsvFormatError(f"non-numeric value {bad!r}", lineno) from None
            if not all(math.isfinite(v) for v in rows[-1]):
                raise CsvFormatError("non-finite value", lineno)
    if not rows:
        raise CsvFormatError(f"{path}: no data rows")
    a = np.array(rows, dtype=np.float64)
    labels = None
    if has_labels:
        if a.shape[1] < 2:
            raise CsvFormatError("label column requested but rows have a single field")
        lab = a[:, -1]
        if not np.all(lab == np.round(lab)):
            raise CsvFormatError("label column is not integer-valued")
        labels = lab.astype(np.int64)
        a = a[:, :-1]
    name = os.path.splitext(os.path.basename(str(path)))[0]
    return Dataset(a, labels, name=name)


def _is_float(v):
    try:
        float(v)
    except ValueError:
        return False
    return True


def save_csv(path, x, labels=None, comment=None):
    """Write x (and an optional trailing integer label column) as CSV.

    Floats are written with 17 significant digits so that load_csv gives the
    same float64 values back.
    """
    x = np.asarray(x, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        if comment is not None:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        for i, row in enumerate(x):
            rec = [f"{v:.17g}" for v in row]
            if labels is not None:
                rec.append(str(int(labels[i])))
            w.writerow(rec)


def train_test_split(n, test_fraction=0.3, seed=0):
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must be in (0, 1)")
    n_test = int(round(test_fraction * n))
    if n - n_test < 1 or n_test < 1:
        raise ValueError(f"split of {n} points with test fraction {test_fraction} "
                         "leaves an empty side")
    perm = np.random.default_rng(seed).permutation(n)
    return Split(np.sort(perm[n_test:]), np.sort(perm[:n_test]), seed)


def minmax_scale(x):
    """Per-feature rescaling to [0, 1]; constant features map to 0."""
    x = np.asarray(x, dtype=np.float64)
    lo, hi = x.min(axis=0), x.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    return (x - lo) / span


def dedup_rows(x, labels=None):
    """Drop exact duplicate rows, keeping first occurrences in original order."""
    _, first = np.unique(x, axis=0, return_index=True)
    keep = np.sort(first)
    return x[keep], (None if labels is None else labels[keep])


def jitter(x, sd, seed=0):
    return x + np.random.default_rng(seed).normal(scale=sd, size=x.shape)
