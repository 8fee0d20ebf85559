"""Datasets: synthetic Gaussian blobs and the CIFAR-10 binary format."""

from dataclasses import dataclass
import os

import numpy as np

from .errors import DomainError, FormatError

__all__ = [
    "Dataset",
    "SyntheticBlobSpec",
    "MultiLabelBlobSpec",
    "generate_blobs",
    "generate_multilabel_blobs",
    "load_cifar10_binary",
    "CIFAR10_RECORD_BYTES",
    "corner_centers",
]

CIFAR10_RECORD_BYTES = 1 + 3 * 32 * 32
CIFAR10_CLASSES = 10


@dataclass
class Dataset:
    """``x`` is ``(n, d)``; ``y`` is ``(n,)`` class ids or ``(n, m)`` 0/1 targets."""

    x: np.ndarray
    y: np.ndarray
    num_classes: int

    @property
    def multilabel(self):
        return self.y.ndim == 2

    def __len__(self):
        return self.x.shape[0]


@dataclass(frozen=True)
class SyntheticBlobSpec:
    num_classes: int
    dim: int
    centers: tuple
    spreads: tuple
    samples_per_class: int
    seed: int = 0

    def __post_init__(self):
        if len(self.centers) != self.num_classes or len(self.spreads) != self.num_classes:
            raise DomainError("need one center and one spread per class")
        if any(len(c) != self.dim for c in self.centers):
            raise DomainError(f"every center must have dimension {self.dim}")
        if any(s < 0 for s in self.spreads):
            raise DomainError("spreads must be non-negative")
        if self.samples_per_class < 1:
            raise DomainError("samples_per_class must be >= 1")


def corner_centers(num_classes=4):
    """Corners of the unit square, in (0,0), (1,0), (0,1), (1,1) order."""
    corners = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)]
    if not 1 <= num_classes <= 4:
        raise DomainError("the unit square has four corners")
    return tuple(corners[:num_classes])


def generate_blobs(spec):
    """Isotropic Gaussian blobs, class-blocked, deterministic in ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    xs, ys = [], []
    for c, (center, spread) in enumerate(zip(spec.centers, spec.spreads)):
        noise = rng.standard_normal((spec.samples_per_class, spec.dim))
        xs.append(np.asarray(center, dtype=np.float64) + spread * noise)
        ys.append(np.full(spec.samples_per_class, c, dtype=np.int64))
    return Dataset(np.concatenate(xs), np.concatenate(ys), spec.num_classes)


@dataclass(frozen=True)
class MultiLabelBlobSpec:
    """Items carry a random label set; features sum the present classes' centers."""

    num_classes: int
    dim: int
    centers: tuple
    spread: float
    num_samples: int
    label_prob: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if len(self.centers) != self.num_classes:
            raise DomainError("need one center per class")
        if not 0 < self.label_prob < 1:
            raise DomainError("label_prob must lie in (0, 1)")


def generate_multilabel_blobs(spec):
    rng = np.random.default_rng(spec.seed)
    y = (rng.random((spec.num_samples, spec.num_classes)) < spec.label_prob).astype(np.int64)
    empty = y.sum(axis=1) == 0
    y[empty, rng.integers(0, spec.num_classes, size=int(empty.sum()))] = 1
    centers = np.asarray(spec.centers, dtype=np.float64)
    x = y @ centers + spec.spread * rng.standard_normal((spec.num_samples, spec.dim))
    return Dataset(x, y, spec.num_classes)


def load_cifar10_binary(path):
    """Read a CIFAR-10 binary batch.

    Each 3073-byte record is one label byte followed by the R, G and B
    planes (1024 bytes each, row-major 32x32).  Pixels come back as
    float32 in [0, 1] with shape ``(n, 3072)``, in file order.
    """
    if not os.path.isfile(path):
        raise FileNotFoundError(path)
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size % CIFAR10_RECORD_BYTES:
        raise FormatError(
            f"{path}: size {raw.size} is not a multiple of {CIFAR10_RECORD_BYTES}")
    records = raw.reshape(-1, CIFAR10_RECORD_BYTES)
    labels = records[:, 0].astype(np.int64)
    if np.any(labels >= CIFAR10_CLASSES):
        bad = int(np.argmax(labels >= CIFAR10_CLASSES))
        raise FormatError(f"{path}: record {bad} has label {labels[bad]} > 9")
    pixels = records[:, 1:].astype(np.float32) / np.float32(255.0)
    return Dataset(pixels, labels, CIFAR10_CLASSES)
