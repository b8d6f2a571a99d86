"""Pairwise distances and SNE-style similarity matrices.

HD similarities are Gaussian, calibrated per point by a perplexity target,
then symmetrized and (in multi-scale mode) averaged over perplexities
2, 4, ..., 2^H. LD similarities use a Student-t kernel with one degree of
freedom. Everything is float64.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform

log = logging.getLogger(__name__)

BETA_MIN = 1e-20
BETA_MAX = 1e20
MAX_ITER = 200
# Stopping tolerance on the natural-log entropy; tighter than the 1e-5 the
# calibration contract requires so that precisions are pinned to ~1e-9 rel.
ENTROPY_TOL = 1e-10


class DegenerateRowError(ValueError):
    """A point has zero distance to every other point."""

    def __init__(self, row):
        self.row = row
        super().__init__(f"row {row}: all distances are zero (duplicated point); "
                         "deduplicate or jitter the data first")


class PerplexityError(ValueError):
    """The requested perplexity cannot be reached for a row."""

    def __init__(self, msg, row=None):
        self.row = row
        self.detail = msg
        super().__init__(msg if row is None else f"row {row}: {msg}")


@dataclass(frozen=True)
class ScaleSet:
    num_scales: int
    perplexities: tuple


def squared_euclidean_distances(x):
    """Return the N x N matrix of squared Euclidean distances between rows of x."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-D data matrix, got shape {x.shape}")
    if x.shape[0] < 2:
        raise ValueError("need at least 2 points")
    bad = ~np.isfinite(x).all(axis=1)
    if bad.any():
        raise ValueError(f"non-finite coordinate in row {int(np.flatnonzero(bad)[0])}")
    # pdist sums explicit coordinate differences: exactly symmetric, exact
    # zeros on the diagonal, no |a|^2 + |b|^2 - 2ab cancellation.
    return squareform(pdist(x, "sqeuclidean"))


def _row_distribution(d2_row, beta):
    """Gaussian row distribution for precision beta and its entropy (nats)."""
    a = -0.5 * beta * d2_row
    a = a - a.max()
    e = np.exp(a)
    z = e.sum()
    p = e / z
    h = math.log(z) - float(np.dot(p, a))
    return p, h


def row_entropy(d2_row, beta):
    return _row_distribution(np.asarray(d2_row, dtype=np.float64), beta)[1]


def precision_for_perplexity(d2_row, target_perplexity, *, tol=ENTROPY_TOL,
                             max_iter=MAX_ITER, row=None):
    """Find the precision beta whose Gaussian row has the target perplexity.

    ``d2_row`` holds squared distances to the *other* points (self excluded).
    A row of equal distances has a uniform distribution whatever beta is, so
    beta = 1 is returned for it regardless of the target.
    The entropy is monotonically decreasing in beta; we bracket the root by
    doubling/halving from beta = 1 and then bisect.
    """
    d2_row = np.asarray(d2_row, dtype=np.float64)
    n = d2_row.size
    if not np.any(d2_row > 0):
        raise DegenerateRowError(row)
    if not (1.0 < target_perplexity <= n):
        raise PerplexityError(
            f"perplexity {target_perplexity} outside (1, {n}] for {n} neighbors", row)
    target = math.log(target_perplexity)
    top = d2_row.max()
    if top - d2_row.min() <= 1e-12 * top:
        # Equidistant neighbors: every beta gives the same uniform row.
        return 1.0

    lo, hi = None, None
    beta = 1.0
    it = 0
    while True:
        _, h = _row_distribution(d2_row, beta)
        if abs(h - target) <= tol:
            return beta
        it += 1
        if h > target:
            lo = beta
        else:
            hi = beta
        if lo is not None and hi is not None:
            break
        if it >= max_iter:
            break
        beta = beta * 2.0 if hi is None else beta / 2.0
        if not (BETA_MIN <= beta <= BETA_MAX):
            raise PerplexityError(
                f"perplexity {target_perplexity} unattainable (beta left [{BETA_MIN:g}, {BETA_MAX:g}])",
                row)

    while it < max_iter:
        beta = 0.5 * (lo + hi)
        _, h = _row_distribution(d2_row, beta)
        if abs(h - target) <= tol:
            return beta
        if h > target:
            lo = beta
        else:
            hi = beta
        it += 1
        if hi - lo <= 4 * np.finfo(float).eps * hi:
            # Bracket collapsed to machine precision; entropy is as close as
            # float64 allows.
            return beta
    if abs(h - target) <= 1e-5:
        return beta
    raise PerplexityError(
        f"binary search for perplexity {target_perplexity} did not converge "
        f"in {max_iter} iterations (entropy {h:.6g}, target {target:.6g})", row)


def _offdiag_rows(d2):
    n = d2.shape[0]
    mask = ~np.eye(n, dtype=bool)
    return d2[mask].reshape(n, n - 1), mask


def hd_similarities_fixed(d2, perplexity, *, return_betas=False):
    """Row-stochastic Gaussian similarities with per-row perplexity calibration."""
    d2 = np.asarray(d2, dtype=np.float64)
    n = d2.shape[0]
    rows, mask = _offdiag_rows(d2)
    sigma = np.zeros((n, n))
    betas = np.empty(n)
    out = np.empty((n, n - 1))
    for i in range(n):
        betas[i] = precision_for_perplexity(rows[i], perplexity, row=i)
        out[i], _ = _row_distribution(rows[i], betas[i])
    sigma[mask] = out.ravel()
    if return_betas:
        return sigma, betas
    return sigma


def symmetrize_tsne(sigma):
    """(sigma + sigma^T) / (2N): symmetric and summing to one overall."""
    sigma = np.asarray(sigma, dtype=np.float64)
    n = sigma.shape[0]
    return (sigma + sigma.T) / (2.0 * n)


def multiscale_num_levels(n):
    """Scales used by the multi-scale similarities for N points.

    H = round(log2(N / 2)) and perplexities 2, 4, ..., 2^H. A perplexity
    above N - 2 (possible through rounding) is clamped to N - 2.
    """
    if n < 8:
        raise ValueError(f"too few points for multi-scale similarities (N={n}, need >= 8)")
    h = int(round(math.log2(n / 2.0)))
    h = max(h, 1)
    perps = [float(2 ** k) for k in range(1, h + 1)]
    if perps[-1] > n - 2:
        log.info("clamping perplexity %g to N - 2 = %d", perps[-1], n - 2)
        perps[-1] = float(n - 2)
    return ScaleSet(num_scales=h, perplexities=tuple(perps))


def hd_similarities_multiscale(d2):
    """Average over scales of the symmetrized fixed-perplexity similarities."""
    d2 = np.asarray(d2, dtype=np.float64)
    scales = multiscale_num_levels(d2.shape[0])
    acc = np.zeros_like(d2)
    for perp in scales.perplexities:
        acc += symmetrize_tsne(hd_similarities_fixed(d2, perp))
    return acc / scales.num_scales


def hd_similarities(d2, perplexity=None):
    """Global-sum-one HD similarities: multi-scale when perplexity is None."""
    if perplexity is None:
        return hd_similarities_multiscale(d2)
    return symmetrize_tsne(hd_similarities_fixed(d2, perplexity))


def student_kernel(y):
    """Unnormalized Student-t kernel (1 + d^2)^-1 with zero diagonal."""
    w = 1.0 / (1.0 + squared_euclidean_distances(y))
    np.fill_diagonal(w, 0.0)
    return w


def ld_similarities_student(y):
    w = student_kernel(y)
    return w / w.sum()
