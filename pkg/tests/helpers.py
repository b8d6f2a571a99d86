"""Independent oracles shared by the unit and acceptance tests."""
import math

import numpy as np

from msptsne.neural_net import forward


def kl_direct(p, q):
    """Straight double loop over ordered pairs."""
    n = len(p)
    total = 0.0
    for i in range(n):
        for j in range(n):
            if i != j and p[i][j] > 0:
                total += p[i][j] * math.log(p[i][j] / max(q[i][j], 1e-12))
    return total


def student_q_direct(y):
    n = len(y)
    w = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            if i != j:
                w[i][j] = 1.0 / (1.0 + sum((a - b) ** 2 for a, b in zip(y[i], y[j])))
    z = sum(map(sum, w))
    return [[v / z for v in row] for row in w]


def embedding_loss(p, y):
    return kl_direct(p, student_q_direct(np.asarray(y).tolist()))


def _relu_pattern(model, x):
    _, cache = forward(model, x)
    return [z > 0 for z in cache.pre_acts[:-1]]


def param_gradient_check(model, x, p, grads, step=1e-6, floor=1e-6):
    """Compare analytic parameter gradients with central differences of the
    full KL loss (direct-loop oracle, not the library's loss).

    Parameters whose +/- step flips any ReLU on/off state (a kink inside the
    stencil) are skipped. Returns (max relative error, checked, skipped).
    """
    base = _relu_pattern(model, x)
    worst, checked, skipped = 0.0, 0, 0
    for prm, g in zip(model.parameters(), grads.parameters()):
        for idx in np.ndindex(prm.shape):
            old = prm[idx]
            prm[idx] = old + step
            pat_p = _relu_pattern(model, x)
            lp = embedding_loss(p, forward(model, x)[0])
            prm[idx] = old - step
            pat_m = _relu_pattern(model, x)
            lm = embedding_loss(p, forward(model, x)[0])
            prm[idx] = old
            if any((a != b).any() or (a != c).any() for a, b, c in zip(base, pat_p, pat_m)):
                skipped += 1
                continue
            fd = (lp - lm) / (2 * step)
            err = abs(fd - g[idx]) / max(abs(fd), abs(g[idx]), floor)
            worst = max(worst, err)
            checked += 1
    return worst, checked, skipped


def brute_force_quality(hd, ld):
    """Q_NX / R_NX / AUC from explicit K-NN set intersections."""
    hd = np.asarray(hd, dtype=float)
    ld = np.asarray(ld, dtype=float)
    n = len(hd)

    def knn_lists(x):
        out = []
        for i in range(n):
            d = [(float(np.sum((x[i] - x[j]) ** 2)), j) for j in range(n) if j != i]
            d.sort()
            out.append([j for _, j in d])
        return out

    h, l = knn_lists(hd), knn_lists(ld)
    counts, qnx, rnx = [], [], []
    for k in range(1, n - 1):
        c = sum(len(set(h[i][:k]) & set(l[i][:k])) for i in range(n))
        counts.append(c)
        q = c / (k * n)
        qnx.append(q)
        rnx.append(((n - 1) * q - k) / (n - 1 - k))
    auc = math.fsum(r / k for k, r in enumerate(rnx, start=1)) / \
        math.fsum(1.0 / k for k in range(1, n - 1))
    return counts, qnx, rnx, auc


def bisect_free_entropy(d2_row, beta):
    """Entropy (nats) of the Gaussian row for precision beta, by direct summation."""
    shift = min(d2_row)
    w = [math.exp(-beta * (d - shift) / 2.0) for d in d2_row]
    z = math.fsum(w)
    return -math.fsum((v / z) * math.log(v / z) for v in w if v > 0)
