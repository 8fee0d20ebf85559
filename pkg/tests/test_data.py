import numpy as np
import pytest

from gsoftmax.data import (CIFAR10_RECORD_BYTES, MultiLabelBlobSpec, SyntheticBlobSpec, corner_centers,
                           generate_blobs, generate_multilabel_blobs, load_cifar10_binary)
from gsoftmax.errors import DomainError, FormatError


def write_cifar(path, labels, pixels):
    records = np.concatenate([np.asarray(labels, dtype=np.uint8)[:, None], pixels], axis=1)
    path.write_bytes(records.astype(np.uint8).tobytes())


def test_cifar_roundtrip(tmp_path, rng):
    labels = np.arange(10) % 10
    pixels = rng.integers(0, 256, (10, CIFAR10_RECORD_BYTES - 1), dtype=np.uint8)
    f = tmp_path / "batch.bin"
    write_cifar(f, labels, pixels)
    ds = load_cifar10_binary(str(f))
    assert ds.x.dtype == np.float32 and ds.x.shape == (10, 3072)
    assert np.array_equal(ds.y, labels)
    assert np.array_equal(np.rint(ds.x * 255).astype(np.uint8), pixels)


def test_cifar_plane_layout(tmp_path):
    pixels = np.zeros((1, 3072), dtype=np.uint8)
    pixels[0, 1024] = 255  # first green pixel
    f = tmp_path / "one.bin"
    write_cifar(f, [3], pixels)
    img = load_cifar10_binary(str(f)).x[0].reshape(3, 32, 32)
    assert img[1, 0, 0] == 1.0 and img.sum() == 1.0


def test_cifar_errors(tmp_path):
    f = tmp_path / "short.bin"
    f.write_bytes(b"\x00" * (CIFAR10_RECORD_BYTES + 5))
    with pytest.raises(FormatError):
        load_cifar10_binary(str(f))
    g = tmp_path / "label.bin"
    g.write_bytes(bytes([10]) + b"\x00" * 3072)
    with pytest.raises(FormatError):
        load_cifar10_binary(str(g))
    with pytest.raises(FileNotFoundError):
        load_cifar10_binary(str(tmp_path / "missing.bin"))


def test_blobs_are_deterministic_and_class_blocked():
    spec = SyntheticBlobSpec(4, 2, corner_centers(4), (0.5,) * 4, 30, seed=7)
    a, b = generate_blobs(spec), generate_blobs(spec)
    assert np.array_equal(a.x, b.x)
    assert a.y.tolist() == sorted(a.y.tolist()) and len(a) == 120
    assert np.allclose(a.x[a.y == 3].mean(axis=0), [1, 1], atol=0.3)


def test_zero_spread_hits_centers():
    ds = generate_blobs(SyntheticBlobSpec(2, 1, ((0.0,), (5.0,)), (0.0, 0.0), 3))
    assert ds.x[:, 0].tolist() == [0, 0, 0, 5, 5, 5]


def test_blob_validation():
    with pytest.raises(DomainError):
        SyntheticBlobSpec(2, 2, ((0, 0),), (1, 1), 5)
    with pytest.raises(DomainError):
        SyntheticBlobSpec(2, 2, ((0, 0), (1, 1)), (1, -1), 5)
    with pytest.raises(DomainError):
        corner_centers(5)


def test_multilabel_blobs():
    spec = MultiLabelBlobSpec(3, 3, tuple(map(tuple, np.eye(3) * 4)), 0.1, 200, 0.3, seed=1)
    ds = generate_multilabel_blobs(spec)
    assert ds.multilabel and ds.y.shape == (200, 3)
    assert ds.y.sum(axis=1).min() >= 1
    assert np.allclose(ds.x, ds.y * 4, atol=0.6)
