"""Binary model persistence.

Layout (all integers little-endian)::

    b"ARAE"                      magic
    u16                          format version (1)
    u16                          layer count (encoder then decoder)
    per layer:
        u32 in_dim, u32 out_dim, u8 activation (0 identity, 1 sigmoid)
        f64[out_dim * in_dim]    weights, row-major
        f64[out_dim]             biases
    u64                          BLAKE2b-64 digest of every preceding byte

The first half of the layers is the encoder.
"""
from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

from .errors import ModelChecksumError, ModelFormatError, ModelMagicError
from .model import Autoencoder
from .nn import DenseLayer

MAGIC = b"ARAE"
VERSION = 1
_ACT_CODES = {"identity": 0, "sigmoid": 1}
_ACT_NAMES = {v: k for k, v in _ACT_CODES.items()}
_LE_F64 = np.dtype("<f8")


def _digest(payload: bytes) -> bytes:
    return hashlib.blake2b(payload, digest_size=8).digest()


def to_bytes(ae: Autoencoder) -> bytes:
    layers = ae.layers
    parts = [MAGIC, struct.pack("<HH", VERSION, len(layers))]
    for layer in layers:
        parts.append(struct.pack("<IIB", layer.in_dim, layer.out_dim, _ACT_CODES[layer.activation]))
        parts.append(np.ascontiguousarray(layer.weights, dtype=_LE_F64).tobytes())
        parts.append(np.ascontiguousarray(layer.biases, dtype=_LE_F64).tobytes())
    payload = b"".join(parts)
    return payload + _digest(payload)


def from_bytes(raw: bytes) -> Autoencoder:
    if raw[:4] != MAGIC:
        raise ModelMagicError("not a model file (bad magic)")
    if len(raw) < 16:
        raise ModelFormatError("model file truncated")
    payload, stored = raw[:-8], raw[-8:]
    if _digest(payload) != stored:
        raise ModelChecksumError("model file checksum mismatch")
    version, count = struct.unpack_from("<HH", payload, 4)
    if version != VERSION:
        raise ModelFormatError(f"unsupported model format version {version}")
    if count == 0 or count % 2:
        raise ModelFormatError(f"layer count {count} cannot split into encoder/decoder")
    pos = 8
    layers = []
    for i in range(count):
        if pos + 9 > len(payload):
            raise ModelFormatError(f"layer {i} header truncated at byte {pos}")
        n_in, n_out, code = struct.unpack_from("<IIB", payload, pos)
        pos += 9
        if code not in _ACT_NAMES:
            raise ModelFormatError(f"layer {i}: unknown activation code {code}")
        nbytes = 8 * (n_in * n_out + n_out)
        if pos + nbytes > len(payload):
            raise ModelFormatError(f"layer {i} data truncated at byte {pos}")
        w = np.frombuffer(payload, _LE_F64, n_in * n_out, pos).reshape(n_out, n_in)
        pos += 8 * n_in * n_out
        b = np.frombuffer(payload, _LE_F64, n_out, pos)
        pos += 8 * n_out
        layers.append(DenseLayer(w.astype(np.float64), b.astype(np.float64), _ACT_NAMES[code]))
    if pos != len(payload):
        raise ModelFormatError(f"{len(payload) - pos} unexpected trailing bytes")
    half = count // 2
    return Autoencoder(layers[:half], layers[half:])


def save_model(ae: Autoencoder, path) -> None:
    Path(path).write_bytes(to_bytes(ae))


def load_model(path) -> Autoencoder:
    return from_bytes(Path(path).read_bytes())
