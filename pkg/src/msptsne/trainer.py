"""KL objective, its embedding gradient, and the network training loop."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .neural_net import DEFAULT_WIDTHS, AdamState, adam_step, backward, forward, init_mlp
from .similarities import (DegenerateRowError, PerplexityError, hd_similarities, ld_similarities_student,
                           squared_euclidean_distances, student_kernel)

log = logging.getLogger(__name__)

Q_FLOOR = 1e-12


@dataclass
class TrainConfig:
    mode: str = "multiscale"            # "multiscale" or "fixed"
    perplexity: float | None = None     # fixed mode only
    epochs: int = 500
    batch_size: int = 1000
    full_batch_threshold: int = 2048
    learning_rate: float = 1e-3
    seed: int = 0
    layer_widths: tuple = DEFAULT_WIDTHS
    n_components: int = 2
    log_every: int = 0

    def validate(self):
        if self.mode not in ("multiscale", "fixed"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 16:
            raise ValueError("batch_size must be >= 16")
        if not self.learning_rate > 0:
            raise ValueError("learning rate must be positive")
        if self.n_components < 1:
            raise ValueError("n_components must be >= 1")
        if len(self.layer_widths) < 1 or any(int(w) < 1 for w in self.layer_widths):
            raise ValueError(f"invalid layer widths {self.layer_widths}")
        if self.mode == "fixed":
            if self.perplexity is None:
                raise ValueError("fixed mode requires a perplexity")
            if not (1.0 < self.perplexity < self.batch_size - 1):
                raise ValueError(
                    f"perplexity must lie in (1, batch_size - 1) = (1, {self.batch_size - 1}), "
                    f"got {self.perplexity}")
        return self

    @property
    def label(self):
        return "multiscale" if self.mode == "multiscale" else f"perp{self.perplexity:g}"


@dataclass
class TrainLog:
    losses: list = field(default_factory=list)
    epoch_seconds: list = field(default_factory=list)
    final_loss: float = float("nan")
    # Embedding of the training rows by the final model, in input order.
    embedding: np.ndarray | None = None


def kl_loss(p, q):
    """sum_{i != j, p_ij > 0} p_ij log(p_ij / max(q_ij, 1e-12))."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"shape mismatch {p.shape} vs {q.shape}")
    mask = p > 0
    np.fill_diagonal(mask, False)
    pm = p[mask]
    return float(np.sum(pm * (np.log(pm) - np.log(np.maximum(q[mask], Q_FLOOR)))))


def kl_grad_embedding(p, q, y, w=None):
    """dC/dy_i = 4 sum_j (p_ij - q_ij) (1 + d_ij^2)^-1 (y_i - y_j).

    ``w`` (the unnormalized Student-t kernel) may be passed to avoid
    recomputing it.
    """
    y = np.asarray(y, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    n = y.shape[0]
    if p.shape != (n, n) or q.shape != (n, n):
        raise ValueError(f"similarity shapes {p.shape}/{q.shape} do not match {n} points")
    if w is None:
        w = student_kernel(y)
    f = (p - q) * w
    return 4.0 * (f.sum(axis=1)[:, None] * y - f @ y)


def loss_and_grad(p, y):
    """KL loss of embedding y against p, and its gradient w.r.t. y."""
    w = student_kernel(y)
    q = w / w.sum()
    return kl_loss(p, q), kl_grad_embedding(p, q, y, w)


def _make_batches(n, cfg, rng):
    if n <= cfg.full_batch_threshold:
        return [np.arange(n)]
    perm = rng.permutation(n)
    n_batches = -(-n // cfg.batch_size)
    return [np.sort(b) for b in np.array_split(perm, n_batches)]


def _batch_similarities(x, idx, cfg):
    d2 = squared_euclidean_distances(x[idx])
    perp = None if cfg.mode == "multiscale" else cfg.perplexity
    try:
        return hd_similarities(d2, perp)
    except DegenerateRowError as exc:
        raise DegenerateRowError(int(idx[exc.row])) from None
    except PerplexityError as exc:
        row = None if exc.row is None else int(idx[exc.row])
        raise PerplexityError(f"{exc.detail}; duplicated rows? "
                              "deduplicate or jitter the data", row) from None


def fit(x, cfg, model=None):
    """Train the parametric map on x. Returns (model, TrainLog).

    The training rows are partitioned once (seeded) into batches; each
    batch's HD similarities are computed on its own distance matrix and
    reused across epochs. With N <= full_batch_threshold there is a single
    batch holding every row in input order.
    """
    cfg.validate()
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-D data matrix, got shape {x.shape}")
    n, m = x.shape
    if cfg.mode == "multiscale" and n < 8:
        raise ValueError(f"multiscale mode needs at least 8 points, got {n}")
    if cfg.mode == "fixed" and not n > cfg.perplexity + 1:
        raise ValueError(f"fixed perplexity {cfg.perplexity} needs more than "
                         f"{cfg.perplexity + 1:g} points, got {n}")

    rng = np.random.default_rng(cfg.seed + 1)
    batches = _make_batches(n, cfg, rng)
    if cfg.mode == "fixed" and min(len(b) for b in batches) <= cfg.perplexity + 1:
        raise ValueError(f"perplexity {cfg.perplexity} too large for batches of "
                         f"{min(len(b) for b in batches)} points")
    ps = [_batch_similarities(x, idx, cfg) for idx in batches]

    if model is None:
        dims = [m, *[int(w) for w in cfg.layer_widths], cfg.n_components]
        model = init_mlp(dims, seed=cfg.seed)
    elif model.input_dim != m:
        raise ValueError(f"model expects {model.input_dim} input columns, data has {m}")
    state = AdamState(lr=cfg.learning_rate)
    tlog = TrainLog()

    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        order = rng.permutation(len(batches)) if len(batches) > 1 else [0]
        total = 0.0
        for b in order:
            y, cache = forward(model, x[batches[b]])
            loss, dy = loss_and_grad(ps[b], y)
            adam_step(model, backward(model, cache, dy), state)
            total += loss
        tlog.losses.append(total / len(batches))
        tlog.epoch_seconds.append(time.perf_counter() - t0)
        if cfg.log_every and (epoch + 1) % cfg.log_every == 0:
            log.info("%s epoch %d/%d loss %.6f", cfg.label, epoch + 1, cfg.epochs,
                     tlog.losses[-1])

    tlog.embedding = transform(model, x)
    tlog.final_loss = float(np.mean([
        kl_loss(p, ld_similarities_student(tlog.embedding[idx]))
        for p, idx in zip(ps, batches)]))
    return model, tlog


def transform(model, x):
    """Project rows of x through the trained network (out-of-sample map).

    Rows are pushed through one at a time: BLAS picks different kernels for
    different batch shapes, and a row's output must not depend on which other
    rows it is projected with.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        got = x.shape[1] if x.ndim == 2 else x.shape
        raise ValueError(f"input has {got} columns, model expects {model.input_dim}")
    out = np.empty((x.shape[0], model.output_dim))
    for i in range(x.shape[0]):
        out[i] = forward(model, x[i:i + 1].copy())[0][0]
    return out
