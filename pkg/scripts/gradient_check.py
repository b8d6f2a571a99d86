"""Finite-difference check of the full parameter gradient (KL through the
Student-t similarities through the network) on a few random tiny models."""
import numpy as np

from msptsne.neural_net import backward, forward, init_mlp
from msptsne.similarities import (hd_similarities_multiscale, ld_similarities_student,
                                  squared_euclidean_distances)
from msptsne.trainer import kl_grad_embedding, kl_loss


def loss(model, x, p):
    return kl_loss(p, ld_similarities_student(forward(model, x)[0]))


def check(seed, dims=(4, 6, 6, 2), n=8, h=1e-6):
    rng = np.random.default_rng(seed)
    model = init_mlp(list(dims), seed)
    x = rng.normal(size=(n, dims[0]))
    p = hd_similarities_multiscale(squared_euclidean_distances(x))
    y, cache = forward(model, x)
    g = backward(model, cache, kl_grad_embedding(p, ld_similarities_student(y), y))
    worst_rel, worst_abs = 0.0, 0.0
    for prm, gp in zip(model.parameters(), g.parameters()):
        for idx in np.ndindex(prm.shape):
            old = prm[idx]
            prm[idx] = old + h
            lp = loss(model, x, p)
            prm[idx] = old - h
            lm = loss(model, x, p)
            prm[idx] = old
            fd = (lp - lm) / (2 * h)
            err = abs(fd - gp[idx])
            # zero-gradient parameters (dead units, output biases) only show FD noise
            if max(abs(fd), abs(gp[idx])) < 1e-8:
                worst_abs = max(worst_abs, err)
            else:
                worst_rel = max(worst_rel, err / max(abs(fd), abs(gp[idx])))
    return worst_rel, worst_abs


if __name__ == "__main__":
    for s in range(5):
        rel, ab = check(s)
        print(f"seed {s}: max relative error {rel:.2e}, max abs error on zero gradients {ab:.1e}")
