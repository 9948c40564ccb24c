"""Fully connected autoencoder, its losses and the anomaly score."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .errors import ConfigurationError

DEFAULT_HIDDEN = (512, 256, 128)


@dataclass(frozen=True)
class Sample:
    """A single image, flattened row-major, with values in [0, 1]."""

    pixels: np.ndarray
    height: int
    width: int
    label: int = -1
    source_split: str = "train"

    def __post_init__(self):
        if self.pixels.shape != (self.height * self.width,):
            raise ConfigurationError(
                f"{self.pixels.shape} pixels for a {self.height}x{self.width} image"
            )


@dataclass
class SampleSet:
    """A stack of equally sized images stored as an ``(n, h*w)`` array.

    ``ids`` identify samples across splits (protocol 1 reshuffles the merged
    train+test pool, so partitions are checked by id).
    """

    pixels: np.ndarray
    labels: np.ndarray
    height: int
    width: int
    split: str = "train"
    ids: np.ndarray | None = None

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.pixels.ndim != 2 or self.pixels.shape[1] != self.height * self.width:
            raise ConfigurationError(
                f"pixel array {self.pixels.shape} does not hold {self.height}x{self.width} images"
            )
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.shape != (len(self.pixels),):
            raise ConfigurationError("one label per sample required")
        if self.ids is None:
            self.ids = np.arange(len(self.pixels))

    def __len__(self):
        return len(self.pixels)

    def __getitem__(self, i) -> Sample:
        return Sample(self.pixels[i], self.height, self.width, int(self.labels[i]), self.split)

    def subset(self, idx) -> "SampleSet":
        idx = np.asarray(idx)
        if idx.dtype != bool:
            idx = idx.astype(np.intp)
        return SampleSet(
            self.pixels[idx], self.labels[idx], self.height, self.width, self.split, self.ids[idx]
        )

    @property
    def shape(self):
        return (self.height, self.width)


@dataclass
class Autoencoder:
    encoder: list
    decoder: list

    def __post_init__(self):
        enc_dims = _dims(self.encoder)
        dec_dims = _dims(self.decoder)
        if dec_dims != enc_dims[::-1]:
            raise ConfigurationError(
                f"decoder dims {dec_dims} do not mirror encoder dims {enc_dims}"
            )

    @classmethod
    def create(cls, input_dim, hidden=DEFAULT_HIDDEN, rng=None, activation="sigmoid"):
        """Glorot-initialised autoencoder; the last hidden size is the latent size."""
        rng = np.random.default_rng(0) if rng is None else rng
        dims = [input_dim, *hidden]
        encoder = [
            nn.DenseLayer.glorot(a, b, rng, activation) for a, b in zip(dims, dims[1:])
        ]
        rdims = dims[::-1]
        decoder = [
            nn.DenseLayer.glorot(a, b, rng, activation) for a, b in zip(rdims, rdims[1:])
        ]
        return cls(encoder, decoder)

    @property
    def input_dim(self) -> int:
        return self.encoder[0].in_dim

    @property
    def latent_dim(self) -> int:
        return self.encoder[-1].out_dim

    @property
    def layers(self) -> list:
        return [*self.encoder, *self.decoder]

    def parameters(self) -> list:
        return nn.parameters(self.layers)

    def copy(self) -> "Autoencoder":
        return Autoencoder([l.copy() for l in self.encoder], [l.copy() for l in self.decoder])


def _dims(layers):
    if not layers:
        raise ConfigurationError("autoencoder half has no layers")
    nn.check_chain(layers, layers[0].in_dim)
    return [layers[0].in_dim] + [l.out_dim for l in layers]


def as_array(x) -> np.ndarray:
    if isinstance(x, (Sample, SampleSet)):
        return x.pixels
    return np.asarray(x, dtype=np.float64)


def encode(ae: Autoencoder, x, tape=None) -> np.ndarray:
    return nn.forward(ae.encoder, as_array(x), tape)


def decode(ae: Autoencoder, z, tape=None) -> np.ndarray:
    return nn.forward(ae.decoder, z, tape)


def reconstruct(ae: Autoencoder, x) -> np.ndarray:
    return decode(ae, encode(ae, x))


def _sq(diff):
    return np.sum(diff * diff, axis=-1)


def latent_loss(ae: Autoencoder, x, x_adv):
    """``||Enc(x_adv) - Enc(x)||^2``; per-row for batches."""
    return _sq(encode(ae, x_adv) - encode(ae, x))


def rec_loss(ae: Autoencoder, x, x_adv):
    """``||x - Dec(Enc(x_adv))||^2`` -- the target is the clean input."""
    return _sq(as_array(x) - reconstruct(ae, x_adv))


def anomaly_score(ae: Autoencoder, x):
    """Squared reconstruction error; higher means more anomalous."""
    x = as_array(x)
    return _sq(x - reconstruct(ae, x))


def dae_corrupt(x, rng, amplitude=0.1) -> np.ndarray:
    """Add Uniform[0, amplitude] noise per pixel and clamp to [0, 1]."""
    x = as_array(x)
    noise = rng.uniform(0.0, 1.0, size=x.shape) * amplitude
    return np.clip(x + noise, 0.0, 1.0)
