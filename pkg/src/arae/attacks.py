"""Adversarial example crafting against an autoencoder.

Objectives: the latent loss ``||Enc(x + delta) - Enc(x)||^2``, the
reconstruction loss ``||x - Dec(Enc(x + delta))||^2``, and the anomaly score
of the perturbed input itself (for test-time attacks on the detector). Gradient-based attacks run projected
sign (l-inf) or normalised (l2) ascent and keep the best iterate seen, so
the returned loss never drops below the loss at the starting point.
Rotation/translation is searched exhaustively on a quantised grid.
"""
from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from . import nn
from .errors import ConfigurationError
from .model import Autoencoder, Sample, SampleSet, as_array, encode

KINDS = ("linf", "l2", "rot_trans", "union", "recon_linf")
DEFAULT_ROTATIONS = tuple(range(-30, 31, 5))
DEFAULT_TRANSLATIONS = tuple(range(-3, 4))

# Used to pick a first ascent direction where the loss gradient vanishes.
_PROBE_STEP = 1e-4
_PROBE_ITERS = 3
_CHUNK = 2048


@dataclass
class PerturbationSpec:
    kind: str = "linf"
    epsilon: float = 0.2
    steps: int = 10
    step_size: float | None = None  # None -> 2.5 * epsilon / steps
    random_start: bool = False
    rotation_grid: tuple = DEFAULT_ROTATIONS
    translation_grid: tuple = DEFAULT_TRANSLATIONS
    children: tuple = field(default_factory=tuple)
    # recon_linf only: "clean" scores Dec(Enc(x + delta)) against x (training
    # loss); "self" against x + delta itself (the anomaly score of the
    # perturbed input, used to attack a detector at test time)
    target: str = "clean"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown perturbation kind {self.kind!r}")
        if not self.epsilon >= 0:
            raise ConfigurationError(f"epsilon must be non-negative, got {self.epsilon}")
        if self.steps < 1:
            raise ConfigurationError(f"steps must be >= 1, got {self.steps}")
        if self.target not in ("clean", "self"):
            raise ConfigurationError(f"unknown reconstruction target {self.target!r}")
        if self.step_size is not None and self.step_size <= 0:
            raise ConfigurationError("step_size must be positive")
        self.rotation_grid = tuple(self.rotation_grid)
        self.translation_grid = tuple(int(t) for t in self.translation_grid)
        self.children = tuple(
            c if isinstance(c, PerturbationSpec) else PerturbationSpec.from_dict(c)
            for c in self.children
        )
        if self.kind == "union":
            if not self.children:
                raise ConfigurationError("union perturbation needs at least one child")
            if len({c.objective for c in self.children}) > 1:
                raise ConfigurationError("union children must share one objective")
        if self.kind == "rot_trans" and not (self.rotation_grid and self.translation_grid):
            raise ConfigurationError("rotation and translation grids must be non-empty")

    @property
    def step(self) -> float:
        if self.step_size is not None:
            return self.step_size
        return 2.5 * self.epsilon / self.steps

    @property
    def objective(self) -> str:
        if self.kind == "recon_linf":
            return "recon" if self.target == "clean" else "score"
        if self.kind == "union":
            return self.children[0].objective
        return "latent"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rotation_grid"] = list(self.rotation_grid)
        d["translation_grid"] = list(self.translation_grid)
        d["children"] = [c.to_dict() for c in self.children]
        return d

    @classmethod
    def from_dict(cls, d) -> "PerturbationSpec":
        return cls(**d)


@dataclass
class AdversarialBatch:
    originals: SampleSet
    perturbed: np.ndarray
    achieved_loss: np.ndarray


# objective plumbing ---------------------------------------------------------

def _objective(ae: Autoencoder, X, objective):
    """Return ``(layers, target)`` so that loss = ||layers(x') - target||^2.

    ``target`` is None for the self-referencing score objective.
    """
    if objective == "latent":
        return ae.encoder, encode(ae, X)
    if objective == "recon":
        return ae.layers, X
    return ae.layers, None


def _loss_and_grad(layers, X, target):
    tape = nn.GradientTape()
    out = nn.forward(layers, X, tape)
    diff = out - (X if target is None else target)
    _, g = nn.backward(tape, 2.0 * diff)
    if target is None:
        g -= 2.0 * diff
    return np.sum(diff * diff, axis=1), g


def _probe_direction(layers, X):
    """Approximate the dominant input direction of ``J^T J`` by power iteration.

    Seeded with ``J^T 1``. Only used where the true gradient is exactly zero,
    e.g. the latent objective at delta = 0.
    """
    tape = nn.GradientTape()
    y0 = nn.forward(layers, X, tape)
    _, v = nn.backward(tape, np.ones_like(y0))
    for _ in range(_PROBE_ITERS):
        scale = np.max(np.abs(v), axis=1, keepdims=True)
        v = np.where(scale > 0, v / np.where(scale > 0, scale, 1.0), 1.0)
        diff = nn.forward(layers, X + _PROBE_STEP * v, tape) - y0
        _, v = nn.backward(tape, diff)
    return v


def _orient_probe(layers, X, target, eps, norm):
    """Probe direction, signed towards the larger loss at the ball boundary.

    The objective is flat to first order along both signs of the probe, so
    the sign is settled by comparing the two boundary points directly.
    """
    v = _probe_direction(layers, X)
    if norm == "linf":
        u = np.sign(v)
    else:
        u = v / np.maximum(np.linalg.norm(v, axis=1, keepdims=True), 1e-300)
    up, _ = _loss_and_grad(layers, X + _project(X, eps * u, eps, norm), target)
    down, _ = _loss_and_grad(layers, X + _project(X, -eps * u, eps, norm), target)
    return np.where((down > up)[:, None], -v, v)


def _project(X, delta, eps, norm):
    if norm == "linf":
        delta = np.clip(delta, -eps, eps)
    else:
        n = np.linalg.norm(delta, axis=1, keepdims=True)
        delta = delta * np.where(n > eps, eps / np.where(n > 0, n, 1.0), 1.0)
    # box clipping only shrinks components, so the norm bound survives
    return np.clip(X + delta, 0.0, 1.0) - X


def _random_start(X, eps, norm, rng):
    if rng is None:
        raise ConfigurationError("random_start requires an rng")
    if norm == "linf":
        delta = rng.uniform(-eps, eps, size=X.shape)
    else:
        d = rng.normal(size=X.shape)
        d /= np.maximum(np.linalg.norm(d, axis=1, keepdims=True), 1e-12)
        r = rng.uniform(0.0, 1.0, size=(len(X), 1)) ** (1.0 / X.shape[1])
        delta = d * r * eps
    return _project(X, delta, eps, norm)


def _pgd(ae, X, spec, norm, objective, rng=None):
    eps, alpha = spec.epsilon, spec.step
    layers, target = _objective(ae, X, objective)
    if spec.random_start and eps > 0:
        delta = _random_start(X, eps, norm, rng)
    else:
        delta = np.zeros_like(X)
    best_x = X + delta
    best_loss = np.full(len(X), -np.inf)
    for k in range(spec.steps + 1):
        x_cur = X + delta
        loss, g = _loss_and_grad(layers, x_cur, target)
        better = loss > best_loss
        best_loss = np.where(better, loss, best_loss)
        best_x[better] = x_cur[better]
        if k == spec.steps or eps == 0:
            break
        stuck = ~np.any(g != 0, axis=1) & ~np.any(delta != 0, axis=1)
        if stuck.any():
            g[stuck] = _orient_probe(layers, X[stuck], None if target is None else target[stuck],
                                     eps, norm)
        if norm == "linf":
            step = alpha * np.sign(g)
        else:
            gn = np.linalg.norm(g, axis=1, keepdims=True)
            step = alpha * g / np.where(gn > 0, gn, 1.0)
        delta = _project(X, delta + step, eps, norm)
    return best_x, best_loss


# rotation / translation -----------------------------------------------------

def transform_indices(shape, angle_deg, dy, dx) -> np.ndarray:
    """Source pixel index for each output pixel, ``-1`` where it falls outside.

    Nearest-neighbour rotation about the image centre followed by an integer
    shift of ``dy`` rows and ``dx`` columns.
    """
    h, w = shape
    rows, cols = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    # undo the shift, then rotate back by -angle
    y = (rows - dy) - cy
    x = (cols - dx) - cx
    t = np.deg2rad(angle_deg)
    c, s = np.cos(t), np.sin(t)
    src_x = c * x - s * y + cx
    src_y = s * x + c * y + cy
    src_r = np.rint(src_y).astype(np.int64)
    src_c = np.rint(src_x).astype(np.int64)
    inside = (src_r >= 0) & (src_r < h) & (src_c >= 0) & (src_c < w)
    return np.where(inside, src_r * w + src_c, -1).ravel()


def apply_transform(X, idx) -> np.ndarray:
    """Apply :func:`transform_indices` output to a batch with zero fill."""
    X = np.atleast_2d(X)
    padded = np.concatenate([X, np.zeros((len(X), 1))], axis=1)
    return padded[:, idx]  # -1 picks the zero column


def grid_points(spec: PerturbationSpec):
    return [
        (a, dy, dx)
        for a in spec.rotation_grid
        for dy in spec.translation_grid
        for dx in spec.translation_grid
    ]


def _rot_trans(ae, X, spec, shape, objective="latent"):
    layers, target = _objective(ae, X, objective)
    best_x, best_loss = None, None
    for angle, dy, dx in grid_points(spec):
        Xt = apply_transform(X, transform_indices(shape, angle, dy, dx))
        diff = nn.forward(layers, Xt, None) - (Xt if target is None else target)
        loss = np.sum(diff * diff, axis=1)
        if best_x is None:
            best_x, best_loss = Xt.copy(), loss
            continue
        better = loss > best_loss  # strict: ties keep the earliest grid point
        best_loss = np.where(better, loss, best_loss)
        best_x[better] = Xt[better]
    return best_x, best_loss


# dispatch ------------------------------------------------------------------

def _infer_shape(d, shape):
    if shape is not None:
        return tuple(shape)
    side = int(round(np.sqrt(d)))
    if side * side != d:
        raise ConfigurationError(f"cannot infer image shape for {d} pixels; pass shape")
    return side, side


def attack_batch(ae, X, spec: PerturbationSpec, rng=None, shape=None):
    """Run ``spec`` on every row of ``X``. Returns ``(X_adv, losses)``."""
    if isinstance(X, SampleSet):
        shape = shape or X.shape
    X = np.atleast_2d(as_array(X))
    if X.shape[1] != ae.input_dim:
        raise ConfigurationError(
            f"inputs have {X.shape[1]} pixels, model expects {ae.input_dim}"
        )
    kind = spec.kind
    if kind == "linf":
        return _pgd(ae, X, spec, "linf", "latent", rng)
    if kind == "l2":
        return _pgd(ae, X, spec, "l2", "latent", rng)
    if kind == "recon_linf":
        return _pgd(ae, X, spec, "linf", spec.objective, rng)
    if kind == "rot_trans":
        return _rot_trans(ae, X, spec, _infer_shape(X.shape[1], shape))
    best_x, best_loss = None, None
    for child in spec.children:
        xa, loss = attack_batch(ae, X, child, rng, shape)
        if best_x is None:
            best_x, best_loss = xa, loss
            continue
        better = loss > best_loss
        best_loss = np.where(better, loss, best_loss)
        best_x[better] = xa[better]
    return best_x, best_loss


def _single(ae, x, spec, kind, rng=None):
    if spec.kind != kind:
        raise ConfigurationError(f"expected a {kind!r} spec, got {spec.kind!r}")
    shape = (x.height, x.width) if isinstance(x, Sample) else None
    xa, loss = attack_batch(ae, as_array(x)[None, :], spec, rng, shape)
    return xa[0], float(loss[0])


def pgd_linf_latent(ae, x, spec, rng=None):
    """Maximise the latent loss inside the l-inf ball of radius ``spec.epsilon``."""
    return _single(ae, x, spec, "linf", rng)


def pgd_l2_latent(ae, x, spec, rng=None):
    return _single(ae, x, spec, "l2", rng)


def rot_trans_attack(ae, x, spec):
    """Grid argmax of the latent loss over rotations and translations."""
    return _single(ae, x, spec, "rot_trans")


def union_attack(ae, x, spec, rng=None):
    return _single(ae, x, spec, "union", rng)


def pgd_linf_recon(ae, x, spec, rng=None):
    """Maximise the reconstruction loss inside the l-inf ball."""
    return _single(ae, x, spec, "recon_linf", rng)


def craft_epoch_set(ae, dataset, spec, rng=None) -> AdversarialBatch:
    """Attack every sample of ``dataset`` against the current weights."""
    if not isinstance(dataset, SampleSet):
        X = np.atleast_2d(np.asarray(dataset, dtype=np.float64))
        side = _infer_shape(X.shape[1], None)
        dataset = SampleSet(X, np.zeros(len(X), dtype=np.int64), *side)
    if len(dataset) == 0:
        raise ConfigurationError("cannot craft adversarial samples for an empty dataset")
    xs, losses = [], []
    for start in range(0, len(dataset), _CHUNK):
        chunk = dataset.pixels[start:start + _CHUNK]
        xa, loss = attack_batch(ae, chunk, spec, rng, dataset.shape)
        xs.append(xa)
        losses.append(loss)
    return AdversarialBatch(dataset, np.concatenate(xs), np.concatenate(losses))
