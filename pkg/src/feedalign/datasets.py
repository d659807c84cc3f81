"""Dataset loading: IDX image archives, CIFAR-10 binary batches, synthetic blobs.

Real datasets are read from local files only; nothing here touches the
network. Pixel values are scaled to [0, 1]. The synthetic generator exists
so the whole pipeline can run, end to end and deterministically, without
any downloads.
"""

from __future__ import annotations

import gzip
import hashlib
import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .rng import substream

__all__ = [
    "DataFormatError",
    "Split",
    "Dataset",
    "load_idx_images",
    "load_idx_labels",
    "load_cifar10_batch",
    "load_mnist",
    "load_cifar10",
    "SyntheticSpec",
    "make_synthetic",
    "sha256_file",
    "verify_checksums",
    "write_idx_images",
    "write_idx_labels",
    "write_cifar10_batch",
]


class DataFormatError(ValueError):
    """A data file does not match its declared binary layout."""


class Split(Enum):
    TRAIN = "train"
    TEST = "test"


@dataclass
class Dataset:
    """Flat feature rows with integer class labels."""

    inputs: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self) -> None:
        self.inputs = np.ascontiguousarray(self.inputs, dtype=np.float64)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if self.inputs.ndim != 2:
            raise ValueError(f"inputs must be 2-d, got shape {self.inputs.shape}")
        if self.labels.ndim != 1:
            raise ValueError(f"labels must be 1-d, got shape {self.labels.shape}")
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise ValueError(
                f"{self.inputs.shape[0]} input rows but {self.labels.shape[0]} labels"
            )
        if self.n_classes < 2:
            raise ValueError(f"n_classes must be at least 2, got {self.n_classes}")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ValueError(
                f"labels must lie in [0, {self.n_classes - 1}], "
                f"got range [{self.labels.min()}, {self.labels.max()}]"
            )

    @property
    def n_samples(self) -> int:
        return self.inputs.shape[0]

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]

    def subset(self, n: int) -> "Dataset":
        """The first n samples, in stored order."""
        if not 1 <= n <= self.n_samples:
            raise ValueError(f"subset size {n} outside [1, {self.n_samples}]")
        return Dataset(self.inputs[:n].copy(), self.labels[:n].copy(), self.n_classes)


def _read_bytes(path: Path) -> bytes:
    raw = path.read_bytes()
    # Transparently accept gzip-compressed archives (magic 1f 8b).
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


_IDX_IMAGES_MAGIC = 0x00000803  # u8 payload, 3 dimensions
_IDX_LABELS_MAGIC = 0x00000801  # u8 payload, 1 dimension


def load_idx_images(path: str | Path) -> np.ndarray:
    """Images from an IDX3 u8 archive, flattened and scaled to [0, 1].

    Layout (all integers big-endian u32): magic 0x00000803, image count,
    row count, column count, then count*rows*cols pixel bytes.
    """
    path = Path(path)
    raw = _read_bytes(path)
    if len(raw) < 16:
        raise DataFormatError(f"{path}: header needs 16 bytes, file has {len(raw)}")
    magic, count, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != _IDX_IMAGES_MAGIC:
        raise DataFormatError(
            f"{path}: bad magic 0x{magic:08x} at offset 0, expected 0x{_IDX_IMAGES_MAGIC:08x}"
        )
    expected = 16 + count * rows * cols
    if len(raw) != expected:
        raise DataFormatError(
            f"{path}: header promises {count} images of {rows}x{cols} "
            f"({expected} bytes total), file has {len(raw)}"
        )
    pixels = np.frombuffer(raw, dtype=np.uint8, offset=16)
    return pixels.reshape(count, rows * cols).astype(np.float64) / 255.0


def load_idx_labels(path: str | Path) -> np.ndarray:
    """Labels from an IDX1 u8 archive: magic 0x00000801, count, then count bytes."""
    path = Path(path)
    raw = _read_bytes(path)
    if len(raw) < 8:
        raise DataFormatError(f"{path}: header needs 8 bytes, file has {len(raw)}")
    magic, count = struct.unpack(">II", raw[:8])
    if magic != _IDX_LABELS_MAGIC:
        raise DataFormatError(
            f"{path}: bad magic 0x{magic:08x} at offset 0, expected 0x{_IDX_LABELS_MAGIC:08x}"
        )
    if len(raw) != 8 + count:
        raise DataFormatError(
            f"{path}: header promises {count} labels ({8 + count} bytes total), "
            f"file has {len(raw)}"
        )
    return np.frombuffer(raw, dtype=np.uint8, offset=8).astype(np.int64)


_CIFAR_RECORD = 1 + 3 * 32 * 32  # label byte followed by 3072 pixel bytes


def load_cifar10_batch(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """One CIFAR-10 binary batch: (inputs scaled to [0, 1], labels).

    Each record is 3073 bytes: one label byte, then 3072 pixel bytes in
    channel-major order. The file must be an exact multiple of the record
    size.
    """
    path = Path(path)
    raw = _read_bytes(path)
    if len(raw) == 0 or len(raw) % _CIFAR_RECORD != 0:
        raise DataFormatError(
            f"{path}: size {len(raw)} is not a positive multiple of "
            f"the {_CIFAR_RECORD}-byte record"
        )
    records = np.frombuffer(raw, dtype=np.uint8).reshape(-1, _CIFAR_RECORD)
    labels = records[:, 0].astype(np.int64)
    inputs = records[:, 1:].astype(np.float64) / 255.0
    return inputs, labels


_MNIST_FILES = {
    Split.TRAIN: ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    Split.TEST: ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def _find_archive(data_dir: Path, stem: str) -> Path:
    for candidate in (data_dir / stem, data_dir / f"{stem}.gz"):
        if candidate.is_file():
            return candidate
    raise FileNotFoundError(f"{data_dir}: found neither {stem} nor {stem}.gz")


def load_mnist(data_dir: str | Path, split: Split) -> Dataset:
    """MNIST from the standard archive names in data_dir (plain or .gz)."""
    data_dir = Path(data_dir)
    image_stem, label_stem = _MNIST_FILES[split]
    inputs = load_idx_images(_find_archive(data_dir, image_stem))
    labels = load_idx_labels(_find_archive(data_dir, label_stem))
    return Dataset(inputs, labels, 10)


def load_cifar10(data_dir: str | Path, split: Split) -> Dataset:
    """CIFAR-10 from the binary batch files in data_dir.

    Train is data_batch_1.bin through data_batch_5.bin concatenated in
    order; test is test_batch.bin.
    """
    data_dir = Path(data_dir)
    if split is Split.TRAIN:
        names = [f"data_batch_{i}.bin" for i in range(1, 6)]
    else:
        names = ["test_batch.bin"]
    parts = [load_cifar10_batch(_find_archive(data_dir, name)) for name in names]
    inputs = np.concatenate([p[0] for p in parts], axis=0)
    labels = np.concatenate([p[1] for p in parts], axis=0)
    return Dataset(inputs, labels, 10)


@dataclass(frozen=True)
class SyntheticSpec:
    """Gaussian class blobs: class means 5*N(0, I), unit noise around them."""

    n_train: int = 512
    n_test: int = 256
    input_dim: int = 16
    n_classes: int = 4
    seed: int = 1234

    def __post_init__(self) -> None:
        if self.n_train < 1 or self.n_test < 1:
            raise ValueError("synthetic splits must be non-empty")
        if self.input_dim < 1:
            raise ValueError(f"input_dim must be positive, got {self.input_dim}")
        if self.n_classes < 2:
            raise ValueError(f"n_classes must be at least 2, got {self.n_classes}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")


def make_synthetic(spec: SyntheticSpec) -> tuple[Dataset, Dataset]:
    """Deterministic (train, test) pair for the given spec.

    Labels cycle 0, 1, ..., n_classes-1 so both splits stay balanced; the
    means and the noise come from separate named substreams of spec.seed,
    with train noise drawn before test noise.
    """
    means_rng = substream(spec.seed, "synthetic-means")
    noise_rng = substream(spec.seed, "synthetic-noise")
    means = 5.0 * means_rng.standard_normal((spec.n_classes, spec.input_dim))

    def draw(n: int) -> Dataset:
        labels = np.arange(n, dtype=np.int64) % spec.n_classes
        noise = noise_rng.standard_normal((n, spec.input_dim))
        return Dataset(means[labels] + noise, labels, spec.n_classes)

    return draw(spec.n_train), draw(spec.n_test)


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def verify_checksums(manifest: dict[str, str], base_dir: str | Path) -> list[str]:
    """Check files against expected sha256 digests; return problem messages.

    Manifest keys are paths relative to base_dir. An empty return means
    every file exists and matches.
    """
    base_dir = Path(base_dir)
    problems = []
    for rel_path, expected in sorted(manifest.items()):
        target = base_dir / rel_path
        if not target.is_file():
            problems.append(f"{rel_path}: missing")
            continue
        actual = sha256_file(target)
        if actual != expected.lower():
            problems.append(f"{rel_path}: sha256 {actual}, expected {expected.lower()}")
    return problems


def write_idx_images(path: str | Path, images: np.ndarray) -> None:
    """Write u8 images of shape (count, rows, cols) in the IDX3 layout."""
    images = np.asarray(images, dtype=np.uint8)
    if images.ndim != 3:
        raise ValueError(f"images must be 3-d (count, rows, cols), got {images.shape}")
    header = struct.pack(">IIII", _IDX_IMAGES_MAGIC, *images.shape)
    Path(path).write_bytes(header + images.tobytes())


def write_idx_labels(path: str | Path, labels: np.ndarray) -> None:
    """Write u8 labels of shape (count,) in the IDX1 layout."""
    labels = np.asarray(labels, dtype=np.uint8)
    if labels.ndim != 1:
        raise ValueError(f"labels must be 1-d, got shape {labels.shape}")
    header = struct.pack(">II", _IDX_LABELS_MAGIC, labels.shape[0])
    Path(path).write_bytes(header + labels.tobytes())


def write_cifar10_batch(path: str | Path, labels: np.ndarray, pixels: np.ndarray) -> None:
    """Write CIFAR-10 records: per row one label byte plus 3072 pixel bytes."""
    labels = np.asarray(labels, dtype=np.uint8)
    pixels = np.asarray(pixels, dtype=np.uint8)
    if labels.ndim != 1 or pixels.shape != (labels.shape[0], _CIFAR_RECORD - 1):
        raise ValueError(
            f"need labels (n,) and pixels (n, {_CIFAR_RECORD - 1}), "
            f"got {labels.shape} and {pixels.shape}"
        )
    records = np.concatenate([labels[:, None], pixels], axis=1)
    Path(path).write_bytes(records.tobytes())
