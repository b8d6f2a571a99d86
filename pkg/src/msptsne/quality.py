"""Rank-based DR quality: Q_NX(K), R_NX(K) and the 1/K-weighted AUC.

Q_NX(K) is the average fraction of each point's K nearest HD neighbors that
are also among its K nearest LD neighbors. R_NX rescales it so that a random
embedding scores 0, and the AUC summarizes R_NX over K = 1..N-2 with weights
1/K, favouring small neighborhoods.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .similarities import squared_euclidean_distances


@dataclass
class QualityCurve:
    n: int
    qnx: np.ndarray     # K = 1..N-2
    rnx: np.ndarray
    auc: float

    @property
    def ks(self):
        return np.arange(1, self.n - 1)


def neighbor_table(d2):
    """Row i: the other N-1 indices by ascending distance, ties by index."""
    d2 = np.array(d2, dtype=np.float64)
    n = d2.shape[0]
    if n < 3:
        raise ValueError("need at least 3 points")
    np.fill_diagonal(d2, -np.inf)
    # stable sort keeps ascending index among equal distances
    order = np.argsort(d2, axis=1, kind="stable")
    return order[:, 1:]


def _ranks(table):
    n = table.shape[0]
    ranks = np.empty((n, n), dtype=np.int64)
    rows = np.arange(n)[:, None]
    ranks[rows, table] = np.arange(n - 1)[None, :]
    np.fill_diagonal(ranks, n)      # self never counts
    return ranks


def coincidence_counts(hd, ld):
    """sum_i |HD_i^K ∩ LD_i^K| for K = 1..N-2, as integers.

    j belongs to both K-neighborhoods of i exactly when
    max(rank_hd(i, j), rank_ld(i, j)) < K, so a histogram of those maxima
    and a cumulative sum give every K at once.
    """
    hd = np.asarray(hd)
    ld = np.asarray(ld)
    if hd.shape != ld.shape:
        raise ValueError(f"neighbor tables differ in size: {hd.shape} vs {ld.shape}")
    n = hd.shape[0]
    m = np.maximum(_ranks(hd), _ranks(ld))
    hist = np.bincount(m.ravel(), minlength=n + 1)
    return np.cumsum(hist)[: n - 2]


def qnx_curve(hd, ld):
    n = np.asarray(hd).shape[0]
    ks = np.arange(1, n - 1)
    return coincidence_counts(hd, ld) / (ks * n)


def rnx_curve(qnx, n):
    qnx = np.asarray(qnx, dtype=np.float64)
    ks = np.arange(1, n - 1)
    if qnx.shape != ks.shape:
        raise ValueError(f"expected {n - 2} Q_NX values, got {qnx.size}")
    return ((n - 1) * qnx - ks) / (n - 1 - ks)


def auc_log_k(rnx):
    rnx = np.asarray(rnx, dtype=np.float64)
    ks = np.arange(1, rnx.size + 1)
    return math.fsum(rnx / ks) / math.fsum(1.0 / ks)


def evaluate_embedding(hd, ld):
    """Quality curve of LD coordinates ``ld`` against HD data ``hd``.

    Pass the training set alone for the train scenario, or training rows
    followed by projected test rows for the extended scenario.
    """
    hd = np.asarray(hd, dtype=np.float64)
    ld = np.asarray(ld, dtype=np.float64)
    if hd.shape[0] != ld.shape[0]:
        raise ValueError(f"HD has {hd.shape[0]} points but LD has {ld.shape[0]}")
    n = hd.shape[0]
    if n < 4:
        raise ValueError("need at least 4 points")
    q = qnx_curve(neighbor_table(squared_euclidean_distances(hd)),
                  neighbor_table(squared_euclidean_distances(ld)))
    r = rnx_curve(q, n)
    return QualityCurve(n, q, r, auc_log_k(r))
