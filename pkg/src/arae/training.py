"""Adversarial (saddle-point) autoencoder training and baseline loops.

Each ARAE epoch first attacks the whole training set against the current
weights, then runs one pass of minibatch updates on
``L_rec(x, x*) + gamma * L_latent(x, x*)``. The DAE and plain baselines
share the same loop with noisy or clean inputs and no latent term.
"""
from __future__ import annotations

import csv
import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import attacks, metrics, nn
from .attacks import PerturbationSpec
from .errors import ConfigurationError, NumericError, UsageError
from .model import DEFAULT_HIDDEN, Autoencoder, SampleSet, anomaly_score, dae_corrupt

log = logging.getLogger(__name__)

VARIANTS = ("arae", "arae_a", "arae_r", "dae", "plain")


@dataclass
class TrainConfig:
    gamma: float = 0.1
    epsilon: float = 0.2
    epochs: int = 100
    batch_size: int = 128
    learning_rate: float = 1e-3
    seed: int = 0
    variant: str = "arae"
    attack: PerturbationSpec | None = None  # None: derived from variant/epsilon
    hidden: tuple = DEFAULT_HIDDEN
    optimizer: str = "adam"
    noise_amplitude: float = 0.1
    l2_epsilon: float = 1.5
    recraft_per_batch: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown variant {self.variant!r}")
        if not self.gamma >= 0:
            raise ConfigurationError("gamma must be non-negative")
        if not self.epsilon >= 0:
            raise ConfigurationError("epsilon must be non-negative")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigurationError("epochs and batch_size must be positive")
        if self.learning_rate <= 0:
            raise ConfigurationError("learning_rate must be positive")
        if isinstance(self.attack, dict):
            self.attack = PerturbationSpec.from_dict(self.attack)
        self.hidden = tuple(int(h) for h in self.hidden)

    def resolved_attack(self) -> PerturbationSpec | None:
        if self.attack is not None:
            return self.attack
        eps = self.epsilon
        if self.variant == "arae":
            return PerturbationSpec("linf", eps)
        if self.variant == "arae_r":
            return PerturbationSpec("recon_linf", eps)
        if self.variant == "arae_a":
            return PerturbationSpec("union", eps, children=(
                PerturbationSpec("linf", eps),
                PerturbationSpec("l2", self.l2_epsilon),
                PerturbationSpec("rot_trans", 0.0),
            ))
        return None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        d["attack"] = self.attack.to_dict() if self.attack is not None else None
        return d

    @classmethod
    def from_dict(cls, d) -> "TrainConfig":
        return cls(**d)


@dataclass
class EpochRecord:
    epoch: int
    l_rec: float
    l_latent: float
    l_ae: float
    val_auc: float | None = None
    seconds: float = 0.0


CSV_FIELDS = ("epoch", "l_rec", "l_latent", "l_ae", "val_auc", "seconds")


@dataclass
class TrainLog:
    records: list = field(default_factory=list)
    craft_calls: int = 0

    def __len__(self):
        return len(self.records)

    def val_aucs(self) -> np.ndarray:
        return np.array([r.val_auc for r in self.records if r.val_auc is not None])

    def auc_std(self, last: int) -> float:
        """Population std of the validation AUC over the last ``last`` epochs."""
        return float(np.std(self.val_aucs()[-last:]))

    def write_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(CSV_FIELDS)
            for r in self.records:
                w.writerow([r.epoch, repr(r.l_rec), repr(r.l_latent), repr(r.l_ae),
                            "" if r.val_auc is None else repr(r.val_auc), f"{r.seconds:.3f}"])

    @classmethod
    def read_csv(cls, path) -> "TrainLog":
        out = cls()
        with open(path, newline="") as f:
            for row in csv.DictReader(f):
                out.records.append(EpochRecord(
                    int(row["epoch"]), float(row["l_rec"]), float(row["l_latent"]),
                    float(row["l_ae"]),
                    float(row["val_auc"]) if row["val_auc"] else None,
                    float(row["seconds"]),
                ))
        return out


def validation_auc_hook(ae, val_normals, val_anomalies) -> float:
    """AUC of the anomaly score with anomalies as the positive class."""
    if len(val_normals) == 0 or len(val_anomalies) == 0:
        raise UsageError("validation needs both normal and anomalous samples")
    s_norm = anomaly_score(ae, val_normals)
    s_anom = anomaly_score(ae, val_anomalies)
    scores = np.concatenate([s_norm, s_anom])
    labels = np.concatenate([np.zeros(len(s_norm), bool), np.ones(len(s_anom), bool)])
    return metrics.roc_auc(scores, labels)


def batch_gradients(ae: Autoencoder, X, X_in, gamma=0.0, latent=True):
    """Losses and parameter gradients for one minibatch.

    ``X`` is the clean batch (reconstruction target), ``X_in`` what the
    network sees. With ``latent`` the term ``gamma * ||Enc(X_in) - Enc(X)||^2``
    is added; its gradient flows through both encoder passes.
    Returns ``(l_rec, l_latent, grads)`` with grads ordered like
    ``ae.parameters()``.
    """
    t_in = nn.GradientTape()
    z_in = nn.forward(ae.encoder, X_in, t_in)
    t_dec = nn.GradientTape()
    r = nn.forward(ae.decoder, z_in, t_dec)
    l_rec, g_r = nn.squared_error(r, X)
    dec_grads, g_z = nn.backward(t_dec, g_r)
    if latent:
        t_clean = nn.GradientTape()
        z = nn.forward(ae.encoder, X, t_clean)
        l_lat, g_lat = nn.squared_error(z_in, z)
        enc_grads, _ = nn.backward(t_in, g_z + gamma * g_lat)
        clean_grads, _ = nn.backward(t_clean, -gamma * g_lat)
        enc_grads = [(a + c, b + d) for (a, b), (c, d) in zip(enc_grads, clean_grads)]
    else:
        l_lat = 0.0
        enc_grads, _ = nn.backward(t_in, g_z)
    return l_rec, l_lat, nn.flatten_grads(enc_grads + dec_grads)


def _as_samples(dataset) -> SampleSet:
    if isinstance(dataset, SampleSet):
        return dataset
    X = np.atleast_2d(np.asarray(dataset, dtype=np.float64))
    side = int(round(np.sqrt(X.shape[1])))
    h, w = (side, side) if side * side == X.shape[1] else (1, X.shape[1])
    return SampleSet(X, np.zeros(len(X), dtype=np.int64), h, w)


def _fit(dataset, cfg: TrainConfig, validation, on_epoch):
    data = _as_samples(dataset)
    if len(data) == 0:
        raise UsageError("training set is empty")
    X = data.pixels
    n = len(X)
    init_rng, shuffle_rng, noise_rng, attack_rng = (
        np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(4)
    )
    ae = Autoencoder.create(X.shape[1], cfg.hidden, init_rng)
    params = ae.parameters()
    opt = nn.make_optimizer(cfg.optimizer, cfg.learning_rate)
    spec = cfg.resolved_attack() if cfg.variant.startswith("arae") else None
    adversarial = spec is not None
    out_log = TrainLog()

    def craft(samples):
        out_log.craft_calls += 1
        return attacks.craft_epoch_set(ae, samples, spec, attack_rng).perturbed

    for epoch in range(1, cfg.epochs + 1):
        t0 = time.perf_counter()
        X_adv = craft(data) if adversarial and not cfg.recraft_per_batch else None
        order = shuffle_rng.permutation(n)
        sums = np.zeros(2)
        for b, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            xb = X[idx]
            if not adversarial:
                x_in = dae_corrupt(xb, noise_rng, cfg.noise_amplitude) if cfg.variant == "dae" else xb
            elif X_adv is not None:
                x_in = X_adv[idx]
            else:
                x_in = craft(data.subset(idx))
            l_rec, l_lat, grads = batch_gradients(ae, xb, x_in, cfg.gamma, adversarial)
            if not (np.isfinite(l_rec) and np.isfinite(l_lat)):
                raise NumericError(f"non-finite loss at epoch {epoch}, batch {b}")
            opt.step(params, grads)
            sums += (l_rec * len(idx), l_lat * len(idx))
        l_rec, l_lat = sums / n
        val = validation_auc_hook(ae, *validation) if validation is not None else None
        rec = EpochRecord(epoch, float(l_rec), float(l_lat), float(l_rec + cfg.gamma * l_lat),
                          val, time.perf_counter() - t0)
        out_log.records.append(rec)
        log.info("epoch %d  l_rec=%.5f  l_latent=%.5f  val_auc=%s  %.1fs",
                 epoch, rec.l_rec, rec.l_latent, val, rec.seconds)
        if on_epoch is not None:
            on_epoch(ae, rec)
    return ae, out_log


def train_arae(dataset, cfg: TrainConfig, validation=None, on_epoch=None):
    """Saddle-point training. ``validation`` is ``(normals, anomalies)`` or None."""
    if cfg.variant not in ("arae", "arae_a", "arae_r"):
        raise ConfigurationError(f"train_arae cannot run variant {cfg.variant!r}")
    return _fit(dataset, cfg, validation, on_epoch)


def train_dae(dataset, cfg: TrainConfig, validation=None, on_epoch=None):
    """Denoising baseline: reconstruct clean inputs from Uniform[0, amp]-noised ones."""
    if cfg.variant != "dae":
        raise ConfigurationError(f"train_dae cannot run variant {cfg.variant!r}")
    return _fit(dataset, cfg, validation, on_epoch)


def train_plain(dataset, cfg: TrainConfig, validation=None, on_epoch=None):
    if cfg.variant != "plain":
        raise ConfigurationError(f"train_plain cannot run variant {cfg.variant!r}")
    return _fit(dataset, cfg, validation, on_epoch)


def train(dataset, cfg: TrainConfig, validation=None, on_epoch=None):
    """Dispatch on ``cfg.variant``."""
    return _fit(dataset, cfg, validation, on_epoch)
