"""Occlusion saliency and input-space local minima of the reconstruction error."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .model import Autoencoder, Sample, anomaly_score, as_array


@dataclass
class SaliencyMap:
    """Change in reconstruction error when each pixel is set to 0."""

    deltas: np.ndarray
    height: int
    width: int

    def rgb(self) -> np.ndarray:
        """uint8 (h, w, 3) image: blue where the error rises, red where it falls."""
        d = self.deltas.reshape(self.height, self.width)
        peak = np.max(np.abs(d))
        mag = np.abs(d) / peak if peak > 0 else np.zeros_like(d)
        level = np.rint(255 * mag).astype(np.uint8)
        img = np.zeros((self.height, self.width, 3), dtype=np.uint8)
        img[..., 2] = np.where(d > 0, level, 0)
        img[..., 0] = np.where(d < 0, level, 0)
        return img


def occlusion1(ae: Autoencoder, x, shape=None) -> SaliencyMap:
    if shape is None and isinstance(x, Sample):
        shape = (x.height, x.width)
    x = as_array(x)
    d = x.shape[0]
    base = anomaly_score(ae, x)
    occluded = np.repeat(x[None, :], d, axis=0)
    occluded[np.arange(d), np.arange(d)] = 0.0
    deltas = anomaly_score(ae, occluded) - base
    # occluding an already-black pixel is a no-op
    deltas[x == 0] = 0.0
    h, w = shape if shape is not None else _square(d)
    return SaliencyMap(deltas, h, w)


def _square(d):
    side = int(round(np.sqrt(d)))
    return (side, side) if side * side == d else (1, d)


def score_and_input_grad(ae: Autoencoder, x):
    """``||x - AE(x)||^2`` and its gradient w.r.t. ``x`` (x is also the target)."""
    tape = nn.GradientTape()
    diff = nn.forward(ae.layers, x, tape) - x
    _, g = nn.backward(tape, 2.0 * diff)
    return float(np.sum(diff * diff)), g - 2.0 * diff


def local_minimum(ae: Autoencoder, rng, lr=0.1, max_iters=2000, tol=1e-8, x0=None):
    """Projected gradient descent on the reconstruction error from uniform noise.

    A step that would raise the loss is halved until it does not (at most 30
    times); if none is found the search stops. Returns ``(x_min, losses)``
    with ``losses[0]`` the starting loss.
    """
    x = rng.uniform(0.0, 1.0, size=ae.input_dim) if x0 is None else np.array(x0, dtype=float)
    loss, g = score_and_input_grad(ae, x)
    losses = [loss]
    for _ in range(max_iters):
        step = lr
        for _ in range(30):
            cand = np.clip(x - step * g, 0.0, 1.0)
            c_loss, c_g = score_and_input_grad(ae, cand)
            if c_loss <= loss:
                break
            step *= 0.5
        else:
            break
        decrease = loss - c_loss
        x, loss, g = cand, c_loss, c_g
        losses.append(loss)
        if decrease < tol:
            break
    return x, losses


def bar_template_correlations(x, shape) -> tuple[float, float]:
    """Best Pearson correlation of ``x`` with any horizontal / vertical bar template.

    Templates are one-pixel-wide bright lines on a black background, one per
    row (horizontal) or column (vertical).
    """
    h, w = shape
    img = np.asarray(x, dtype=float).reshape(h, w)

    def best(templates):
        out = -1.0
        for t in templates:
            if img.std() == 0:
                return 0.0
            out = max(out, float(np.corrcoef(img.ravel(), t.ravel())[0, 1]))
        return out

    rows, cols = [], []
    for r in range(h):
        t = np.zeros((h, w)); t[r, :] = 1.0; rows.append(t)
    for c in range(w):
        t = np.zeros((h, w)); t[:, c] = 1.0; cols.append(t)
    return best(rows), best(cols)
