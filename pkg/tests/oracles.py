"""Independent reference implementations used as test oracles."""
import itertools

import numpy as np

from arae import nn
from arae.model import Autoencoder


def random_network(rng, max_layers=4, max_dim=6):
    depth = int(rng.integers(1, max_layers + 1))
    dims = [int(d) for d in rng.integers(1, max_dim + 1, size=depth + 1)]
    layers = []
    for i in range(depth):
        act = "sigmoid" if rng.random() < 0.7 else "identity"
        layers.append(nn.DenseLayer(rng.normal(0, 1.0, (dims[i + 1], dims[i])),
                                    rng.normal(0, 0.5, dims[i + 1]), act))
    return layers


def central_difference(f, x, h=1e-6):
    """Gradient of scalar ``f`` at array ``x`` (modified in place, then restored)."""
    g = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        old = x[i]
        x[i] = old + h
        up = f()
        x[i] = old - h
        down = f()
        x[i] = old
        g[i] = (up - down) / (2 * h)
    return g


def rel_error(a, b):
    a, b = np.asarray(a), np.asarray(b)
    denom = max(np.linalg.norm(a), np.linalg.norm(b))
    return 0.0 if denom < 1e-10 else float(np.linalg.norm(a - b) / denom)


def pairwise_auc(scores, labels):
    """P(anomaly outscores normal) with ties counted as 1/2, by brute force."""
    pos = [s for s, l in zip(scores, labels) if l]
    neg = [s for s, l in zip(scores, labels) if not l]
    total = 0.0
    for p in pos:
        for q in neg:
            total += 1.0 if p > q else 0.5 if p == q else 0.0
    return total / (len(pos) * len(neg))


def _confusions(scores, labels, positive):
    """Every distinct prediction the threshold family can make."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    cands = sorted(set(scores.tolist())) + [np.inf]
    cands = [-np.inf] + cands
    for t in cands:
        pred = scores >= t if positive == "anomalous" else scores < t
        tp = int(np.sum(pred & labels))
        fp = int(np.sum(pred & ~labels))
        fn = int(np.sum(~pred & labels))
        tn = int(np.sum(~pred & ~labels))
        yield t, tp, fp, fn, tn


def scan_best_f1(scores, labels, positive="anomalous"):
    best = 0.0
    for _, tp, fp, fn, _ in _confusions(scores, labels, positive):
        f1 = 2 * tp / (2 * tp + fp + fn) if tp else 0.0
        best = max(best, f1)
    return best


def scan_fpr_at_tpr(scores, labels, target=0.995, positive="anomalous"):
    best = 1.0
    for _, tp, fp, fn, tn in _confusions(scores, labels, positive):
        if tp / (tp + fn) >= target:
            best = min(best, fp / (fp + tn))
    return best


def grid_max(f, lo, hi, n=41):
    """Max of ``f`` over an n x n grid on the box ``[lo, hi]`` (2-D)."""
    xs = [np.linspace(lo[i], hi[i], n) for i in range(2)]
    return max(f(np.array([a, b])) for a, b in itertools.product(*xs))


def tiny_autoencoder(rng, d=2, k=1, scale=1.0):
    enc = [nn.DenseLayer(rng.normal(0, scale, (k, d)), rng.normal(0, 1, k), "sigmoid")]
    dec = [nn.DenseLayer(rng.normal(0, scale, (d, k)), rng.normal(0, 1, d), "sigmoid")]
    return Autoencoder(enc, dec)
