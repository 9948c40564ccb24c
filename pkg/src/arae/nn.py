"""Dense feed-forward networks with exact reverse-mode gradients.

Everything works on float64 arrays. Inputs may be a single vector ``(d,)``
or a batch ``(n, d)``; a batch is processed row-wise and the caller is
responsible for any averaging inside the upstream gradient.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, UsageError

ACTIVATIONS = ("identity", "sigmoid")


def sigmoid(a: np.ndarray) -> np.ndarray:
    # split on sign so exp never overflows
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    ea = np.exp(a[~pos])
    out[~pos] = ea / (1.0 + ea)
    return out


@dataclass
class DenseLayer:
    """``y = act(W x + b)`` with ``W`` of shape (out_dim, in_dim)."""

    weights: np.ndarray
    biases: np.ndarray
    activation: str = "sigmoid"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.biases = np.asarray(self.biases, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ConfigurationError(f"weights must be 2-D, got shape {self.weights.shape}")
        if self.biases.shape != (self.weights.shape[0],):
            raise ConfigurationError(
                f"bias shape {self.biases.shape} does not match weights {self.weights.shape}"
            )
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(f"unknown activation {self.activation!r}")

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def glorot(cls, in_dim, out_dim, rng, activation="sigmoid"):
        limit = np.sqrt(6.0 / (in_dim + out_dim))
        w = rng.uniform(-limit, limit, size=(out_dim, in_dim))
        return cls(w, np.zeros(out_dim), activation)

    def copy(self) -> "DenseLayer":
        return DenseLayer(self.weights.copy(), self.biases.copy(), self.activation)


@dataclass
class GradientTape:
    """Forward intermediates needed by :func:`backward`.

    ``inputs[i]`` is what layer ``i`` consumed and ``outputs[i]`` what it
    produced, both as 2-D arrays.
    """

    layers: list = field(default_factory=list)
    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    squeeze: bool = False

    @property
    def recorded(self) -> bool:
        return bool(self.layers)


def check_chain(layers, in_dim: int) -> None:
    if not layers:
        raise ConfigurationError("network has no layers")
    expected = in_dim
    for i, layer in enumerate(layers):
        if layer.in_dim != expected:
            raise ConfigurationError(
                f"layer {i} expects input dim {layer.in_dim}, got {expected}"
            )
        expected = layer.out_dim


def forward(layers, x, tape: GradientTape | None = None) -> np.ndarray:
    """Evaluate the stack on ``x``; optionally record into ``tape``."""
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    h = x[None, :] if squeeze else x
    if h.ndim != 2:
        raise ConfigurationError(f"input must be 1-D or 2-D, got shape {x.shape}")
    check_chain(layers, h.shape[1])
    if tape is not None:
        tape.layers, tape.inputs, tape.outputs = list(layers), [], []
        tape.squeeze = squeeze
    for layer in layers:
        a = h @ layer.weights.T + layer.biases
        out = sigmoid(a) if layer.activation == "sigmoid" else a
        if tape is not None:
            tape.inputs.append(h)
            tape.outputs.append(out)
        h = out
    return h[0] if squeeze else h


def backward(tape: GradientTape, grad_output):
    """Back-propagate ``dL/dy`` through a recorded forward pass.

    Returns ``(param_grads, input_grad)`` where ``param_grads`` is a list of
    ``(dW, db)`` per layer, summed over the batch.
    """
    if not tape.recorded:
        raise UsageError("backward called on a tape with no recorded forward pass")
    g = np.asarray(grad_output, dtype=np.float64)
    if g.ndim == 1:
        g = g[None, :]
    if g.shape != tape.outputs[-1].shape:
        raise ConfigurationError(
            f"upstream gradient shape {g.shape} does not match output {tape.outputs[-1].shape}"
        )
    grads = [None] * len(tape.layers)
    for i in range(len(tape.layers) - 1, -1, -1):
        layer = tape.layers[i]
        if layer.activation == "sigmoid":
            y = tape.outputs[i]
            g = g * y * (1.0 - y)
        grads[i] = (g.T @ tape.inputs[i], g.sum(axis=0))
        g = g @ layer.weights
    return grads, (g[0] if tape.squeeze else g)


def squared_error(y, target):
    """Batch-mean of squared l2 distances and its gradient w.r.t. ``y``.

    For a single vector this is ``||y - target||^2`` and ``2 (y - target)``.
    """
    y = np.asarray(y, dtype=np.float64)
    diff = y - target
    n = 1 if y.ndim == 1 else y.shape[0]
    per_sample = np.sum(diff * diff, axis=-1)
    return float(np.sum(per_sample)) / n, (2.0 / n) * diff


def parameters(layers) -> list:
    out = []
    for layer in layers:
        out.extend((layer.weights, layer.biases))
    return out


def flatten_grads(grads) -> list:
    out = []
    for dw, db in grads:
        out.extend((dw, db))
    return out


class SGD:
    """Plain gradient descent: ``p <- p - lr * g``."""

    def __init__(self, learning_rate: float):
        if learning_rate <= 0:
            raise ConfigurationError("learning rate must be positive")
        self.learning_rate = learning_rate

    def step(self, params, grads):
        _check_shapes(params, grads)
        for p, g in zip(params, grads):
            p -= self.learning_rate * g
        return params


class Adam:
    """Adam with bias correction. Accumulators are created on first step."""

    def __init__(self, learning_rate=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        if learning_rate <= 0:
            raise ConfigurationError("learning rate must be positive")
        self.learning_rate = learning_rate
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = None
        self.v = None

    def step(self, params, grads):
        _check_shapes(params, grads)
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        elif len(self.m) != len(params) or any(
            m.shape != p.shape for m, p in zip(self.m, params)
        ):
            raise ConfigurationError("parameter shapes changed between optimizer steps")
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        lr_t = self.learning_rate * np.sqrt(1 - b2**self.t) / (1 - b1**self.t)
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p -= lr_t * m / (np.sqrt(v) + self.eps)
        return params


def make_optimizer(name: str, learning_rate: float):
    if name == "adam":
        return Adam(learning_rate)
    if name == "sgd":
        return SGD(learning_rate)
    raise ConfigurationError(f"unknown optimizer {name!r}")


def _check_shapes(params, grads):
    if len(params) != len(grads):
        raise ConfigurationError(f"{len(params)} parameters but {len(grads)} gradients")
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise ConfigurationError(f"parameter {i}: shape {p.shape} vs gradient {g.shape}")
