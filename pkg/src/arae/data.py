"""Dataset ingestion, evaluation protocols and a synthetic bars dataset."""
from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DataError,
    IdxCountMismatchError,
    IdxMagicError,
    IdxTruncatedError,
    UsageError,
)
from .model import SampleSet

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801

MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


# IDX -----------------------------------------------------------------------

def _read_bytes(path) -> bytes:
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def parse_idx_images(raw: bytes) -> np.ndarray:
    """Parse an IDX3 image blob into a uint8 array of shape (n, rows, cols)."""
    if len(raw) < 4:
        raise IdxMagicError("image file too short for a magic number", 0)
    (magic,) = struct.unpack_from(">I", raw, 0)
    if magic != IMAGES_MAGIC:
        raise IdxMagicError(f"bad image magic 0x{magic:08x}", 0)
    if len(raw) < 16:
        raise IdxTruncatedError("image header truncated", len(raw))
    count, rows, cols = struct.unpack_from(">III", raw, 4)
    need = 16 + count * rows * cols
    if len(raw) < need:
        raise IdxTruncatedError(
            f"image data truncated: header promises {count} images of {rows}x{cols}", len(raw)
        )
    if len(raw) > need:
        raise IdxCountMismatchError(f"{len(raw) - need} trailing bytes after {count} images", need)
    return np.frombuffer(raw, dtype=np.uint8, count=count * rows * cols, offset=16).reshape(
        count, rows, cols
    )


def parse_idx_labels(raw: bytes) -> np.ndarray:
    if len(raw) < 4:
        raise IdxMagicError("label file too short for a magic number", 0)
    (magic,) = struct.unpack_from(">I", raw, 0)
    if magic != LABELS_MAGIC:
        raise IdxMagicError(f"bad label magic 0x{magic:08x}", 0)
    if len(raw) < 8:
        raise IdxTruncatedError("label header truncated", len(raw))
    (count,) = struct.unpack_from(">I", raw, 4)
    if len(raw) < 8 + count:
        raise IdxTruncatedError(f"label data truncated: header promises {count} labels", len(raw))
    if len(raw) > 8 + count:
        raise IdxCountMismatchError(f"{len(raw) - 8 - count} trailing bytes after labels", 8 + count)
    return np.frombuffer(raw, dtype=np.uint8, count=count, offset=8)


def idx_images_bytes(images: np.ndarray) -> bytes:
    images = np.asarray(images, dtype=np.uint8)
    n, rows, cols = images.shape
    return struct.pack(">IIII", IMAGES_MAGIC, n, rows, cols) + images.tobytes()


def idx_labels_bytes(labels: np.ndarray) -> bytes:
    labels = np.asarray(labels, dtype=np.uint8)
    return struct.pack(">II", LABELS_MAGIC, len(labels)) + labels.tobytes()


def load_idx(images_path, labels_path, split="train") -> SampleSet:
    """Read an IDX image/label pair (optionally gzipped); pixels become byte/255."""
    images = parse_idx_images(_read_bytes(images_path))
    labels = parse_idx_labels(_read_bytes(labels_path))
    if len(images) != len(labels):
        raise IdxCountMismatchError(
            f"{len(images)} images but {len(labels)} labels", 4
        )
    n, h, w = images.shape
    return SampleSet(images.reshape(n, h * w) / 255.0, labels.astype(np.int64), h, w, split)


def samples_to_idx(samples: SampleSet):
    """Inverse of :func:`load_idx` for data that came from bytes."""
    raw = np.rint(samples.pixels * 255.0).astype(np.uint8)
    images = raw.reshape(len(samples), samples.height, samples.width)
    return idx_images_bytes(images), idx_labels_bytes(samples.labels)


# datasets --------------------------------------------------------------------

@dataclass
class LabeledDataset:
    train: SampleSet
    test: SampleSet
    class_count: int
    name: str = "dataset"

    def __post_init__(self):
        for part in (self.train, self.test):
            if len(part) and (part.labels.min() < 0 or part.labels.max() >= self.class_count):
                raise DataError(f"{self.name}: label outside [0, {self.class_count})")


def _find(data_dir: Path, stem: str) -> Path:
    for name in (stem, stem + ".gz", stem.replace("-idx", ".idx")):
        p = data_dir / name
        if p.exists():
            return p
    raise DataError(f"missing {stem}[.gz] in {data_dir}")


def load_mnist(data_dir, name="mnist") -> LabeledDataset:
    """Load the four standard MNIST/Fashion-MNIST IDX files from ``data_dir``."""
    data_dir = Path(data_dir)
    parts = {}
    for split, (img, lab) in MNIST_FILES.items():
        parts[split] = load_idx(_find(data_dir, img), _find(data_dir, lab), split)
    n_train = len(parts["train"])
    parts["test"].ids = parts["test"].ids + n_train
    return LabeledDataset(parts["train"], parts["test"], 10, name)


def downscale(samples: SampleSet, factor: int) -> SampleSet:
    """Average-pool by ``factor`` in both directions."""
    if factor == 1:
        return samples
    h, w = samples.height // factor, samples.width // factor
    imgs = samples.pixels.reshape(len(samples), samples.height, samples.width)
    imgs = imgs[:, : h * factor, : w * factor]
    pooled = imgs.reshape(len(samples), h, factor, w, factor).mean(axis=(2, 4))
    return SampleSet(pooled.reshape(len(samples), h * w), samples.labels, h, w,
                     samples.split, samples.ids)


def downscale_dataset(ds: LabeledDataset, factor: int) -> LabeledDataset:
    return LabeledDataset(downscale(ds.train, factor), downscale(ds.test, factor),
                          ds.class_count, ds.name)


def _bars(count_per_class, side, rng, split):
    n = 2 * count_per_class
    imgs = np.zeros((n, side, side))
    labels = np.repeat([0, 1], count_per_class)
    pos = rng.integers(0, side, size=n)
    level = rng.uniform(0.9, 1.0, size=n)
    for i in range(n):
        if labels[i] == 0:
            imgs[i, pos[i], :] = level[i]
        else:
            imgs[i, :, pos[i]] = level[i]
    imgs += rng.uniform(0.0, 0.1, size=imgs.shape)
    imgs = np.clip(imgs, 0.0, 1.0)
    return SampleSet(imgs.reshape(n, side * side), labels, side, side, split)


def make_synthetic_bars(count_per_class, side, rng) -> LabeledDataset:
    """Class 0: one bright horizontal bar; class 1: one bright vertical bar.

    Bars have intensity in [0.9, 1], the background is 0, and every pixel gets
    Uniform[0, 0.1] noise before clipping to [0, 1]. Train and test splits
    each hold ``count_per_class`` images per class.
    """
    if side < 4:
        raise UsageError(f"bars need side >= 4, got {side}")
    train = _bars(count_per_class, side, rng, "train")
    test = _bars(count_per_class, side, rng, "test")
    test.ids = test.ids + len(train)
    return LabeledDataset(train, test, 2, "bars")


# protocols -------------------------------------------------------------------

@dataclass
class ProtocolSplit:
    train_normals: SampleSet
    test_samples: SampleSet
    test_anomalous: np.ndarray  # True where the test sample is anomalous
    protocol: str
    normal_classes: frozenset = field(default_factory=frozenset)
    tau: float | None = None

    @property
    def test_normals(self) -> SampleSet:
        return self.test_samples.subset(np.flatnonzero(~self.test_anomalous))

    @property
    def test_anomalies(self) -> SampleSet:
        return self.test_samples.subset(np.flatnonzero(self.test_anomalous))


def _normal_set(ds, normal_classes):
    normal = frozenset(int(c) for c in normal_classes)
    if not normal:
        raise UsageError("at least one normal class is required")
    bad = [c for c in normal if not 0 <= c < ds.class_count]
    if bad:
        raise UsageError(f"normal classes {bad} outside [0, {ds.class_count})")
    return normal


def make_protocol2(ds: LabeledDataset, normal_classes) -> ProtocolSplit:
    """Train on the normal classes of the original train split; test on the whole test split."""
    normal = _normal_set(ds, normal_classes)
    keep = np.isin(ds.train.labels, list(normal))
    if not keep.any():
        raise UsageError(f"no training samples for normal classes {sorted(normal)}")
    anomalous = ~np.isin(ds.test.labels, list(normal))
    return ProtocolSplit(ds.train.subset(np.flatnonzero(keep)), ds.test, anomalous, "p2", normal)


def _merge(a: SampleSet, b: SampleSet) -> SampleSet:
    return SampleSet(
        np.concatenate([a.pixels, b.pixels]),
        np.concatenate([a.labels, b.labels]),
        a.height, a.width, "merged",
        np.concatenate([a.ids, b.ids]),
    )


def make_protocol1(ds: LabeledDataset, normal_classes, tau, rng) -> ProtocolSplit:
    """Merge, shuffle, train on 80% of the normals, test with normal fraction ``tau``.

    The 80% is rounded down; the anomaly count is
    ``round(n_normal_test * (1 - tau) / tau)``, drawn without replacement.
    """
    if not 0 < tau <= 1:
        raise UsageError(f"tau must lie in (0, 1], got {tau}")
    normal = _normal_set(ds, normal_classes)
    pool = _merge(ds.train, ds.test)
    order = rng.permutation(len(pool))
    is_normal = np.isin(pool.labels[order], list(normal))
    normals = order[is_normal]
    anomalies = order[~is_normal]
    n_train = len(normals) * 8 // 10
    if n_train == 0:
        raise UsageError(f"no samples for normal classes {sorted(normal)}")
    train_idx, test_norm_idx = normals[:n_train], normals[n_train:]
    n_anom = int(round(len(test_norm_idx) * (1.0 - tau) / tau))
    if n_anom > len(anomalies):
        raise UsageError(
            f"tau={tau} needs {n_anom} anomalies but only {len(anomalies)} are available"
        )
    test_idx = np.concatenate([test_norm_idx, anomalies[:n_anom]])
    flags = np.concatenate([np.zeros(len(test_norm_idx), bool), np.ones(n_anom, bool)])
    train = pool.subset(train_idx)
    train.split = "train"
    test = pool.subset(test_idx)
    test.split = "test"
    return ProtocolSplit(train, test, flags, "p1", normal, tau)
