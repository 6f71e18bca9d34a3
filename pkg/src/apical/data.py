"""Datasets: IDX image/label files, logic-gate truth tables, synthetic fixtures."""

from __future__ import annotations

import csv
import enum
import gzip
import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from .errors import DataError, FormatError, UsageError
from .tensor import Matrix, RngStream

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801

FASHION_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}
FASHION_CLASSES = [
    "T-shirt/top", "Trouser", "Pullover", "Dress", "Coat",
    "Sandal", "Shirt", "Sneaker", "Bag", "Ankle boot",
]


class Gate(str, enum.Enum):
    XOR = "xor"
    OR = "or"
    AND = "and"


GATE_INPUTS = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=np.float64)
GATE_TARGETS = {
    Gate.XOR: np.array([[0], [1], [1], [0]], dtype=np.float64),
    Gate.OR: np.array([[0], [1], [1], [1]], dtype=np.float64),
    Gate.AND: np.array([[0], [0], [0], [1]], dtype=np.float64),
}


@dataclass
class Dataset:
    X: Matrix
    Y: Matrix
    class_names: Optional[list] = None

    def __post_init__(self):
        if self.X.shape[0] != self.Y.shape[0]:
            raise DataError(f"{self.X.shape[0]} samples but {self.Y.shape[0]} targets")

    def __len__(self):
        return self.X.shape[0]

    @property
    def n_classes(self):
        return self.Y.shape[1]

    @property
    def labels(self) -> np.ndarray:
        return np.argmax(self.Y, axis=1)

    def subset(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.Y[idx], self.class_names)


def one_hot(labels, k: int) -> Matrix:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.size, k))
    out[np.arange(labels.size), labels] = 1.0
    return out


# -- IDX ---------------------------------------------------------------------


def _read_bytes(path) -> bytes:
    path = Path(path)
    if path.suffix == ".gz":
        with gzip.open(path, "rb") as f:
            return f.read()
    return path.read_bytes()


def _header(raw: bytes, n_fields: int, magic: int, what: str):
    need = 4 * n_fields
    if len(raw) < need:
        raise FormatError(f"{what} file truncated inside header", len(raw))
    fields = struct.unpack(">" + "I" * n_fields, raw[:need])
    if fields[0] != magic:
        raise FormatError(f"{what} file has magic 0x{fields[0]:08x}, expected 0x{magic:08x}", 0)
    return fields[1:]


def parse_idx_images(raw: bytes) -> np.ndarray:
    count, rows, cols = _header(raw, 4, IMAGES_MAGIC, "images")
    size = count * rows * cols
    if len(raw) - 16 < size:
        raise FormatError(f"images file truncated: need {size} pixel bytes", len(raw))
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=16).reshape(count, rows, cols)


def parse_idx_labels(raw: bytes) -> np.ndarray:
    (count,) = _header(raw, 2, LABELS_MAGIC, "labels")
    if len(raw) - 8 < count:
        raise FormatError(f"labels file truncated: need {count} label bytes", len(raw))
    labels = np.frombuffer(raw, dtype=np.uint8, count=count, offset=8)
    if labels.size and labels.max() > 9:
        bad = int(np.argmax(labels > 9))
        raise FormatError(f"label {labels[bad]} out of range 0-9", 8 + bad)
    return labels


def load_idx(images_path, labels_path, class_names=None) -> Dataset:
    images = parse_idx_images(_read_bytes(images_path))
    labels = parse_idx_labels(_read_bytes(labels_path))
    if images.shape[0] != labels.shape[0]:
        raise FormatError(
            f"{images.shape[0]} images but {labels.shape[0]} labels", 4
        )
    X = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    return Dataset(X, one_hot(labels, 10), class_names)


def write_idx_images(path, images: np.ndarray) -> None:
    images = np.asarray(images, dtype=np.uint8)
    count, rows, cols = images.shape
    blob = struct.pack(">IIII", IMAGES_MAGIC, count, rows, cols) + images.tobytes()
    _write_bytes(path, blob)


def write_idx_labels(path, labels) -> None:
    labels = np.asarray(labels, dtype=np.uint8)
    blob = struct.pack(">II", LABELS_MAGIC, labels.size) + labels.tobytes()
    _write_bytes(path, blob)


def _write_bytes(path, blob):
    path = Path(path)
    if path.suffix == ".gz":
        with gzip.open(path, "wb") as f:
            f.write(blob)
    else:
        path.write_bytes(blob)


def _find(data_dir: Path, stem: str) -> Path:
    for name in (stem, stem + ".gz"):
        if (data_dir / name).exists():
            return data_dir / name
    raise FileNotFoundError(f"{stem}[.gz] not found in {data_dir}")


def load_fashion_mnist(data_dir=None) -> tuple[Dataset, Dataset]:
    """Load the (train, test) pair from ``data_dir`` or ``$ADA_DATA_DIR``."""
    data_dir = data_dir or os.environ.get("ADA_DATA_DIR")
    if not data_dir:
        raise FileNotFoundError("no data directory given and ADA_DATA_DIR is not set")
    data_dir = Path(data_dir)
    out = []
    for part in ("train", "test"):
        img, lab = FASHION_FILES[part]
        out.append(load_idx(_find(data_dir, img), _find(data_dir, lab), FASHION_CLASSES))
    return out[0], out[1]


# -- splitting and batching --------------------------------------------------


def split_indices(n: int, n_holdout: int, rng: RngStream) -> tuple[np.ndarray, np.ndarray]:
    if not 0 < n_holdout < n:
        raise UsageError(f"n_holdout must be in (0, {n}), got {n_holdout}")
    perm = rng.permutation(n)
    return np.sort(perm[n_holdout:]), np.sort(perm[:n_holdout])


def split(ds: Dataset, n_holdout: int, rng: RngStream) -> tuple[Dataset, Dataset]:
    keep, hold = split_indices(len(ds), n_holdout, rng)
    return ds.subset(keep), ds.subset(hold)


def minibatches(ds: Dataset, batch_size: int, rng: RngStream) -> Iterator[tuple[Matrix, Matrix]]:
    if batch_size < 1:
        raise UsageError("batch_size must be >= 1")
    order = rng.permutation(len(ds))
    for start in range(0, len(ds), batch_size):
        idx = order[start : start + batch_size]
        yield ds.X[idx], ds.Y[idx]


# -- synthetic data ----------------------------------------------------------


def gen_gate(gate) -> Dataset:
    t = GATE_TARGETS[Gate(gate)]
    return Dataset(GATE_INPUTS.copy(), one_hot(t[:, 0], 2))


def gen_circles(n: int, radii=(1.0, 2.0), noise: float = 0.1, rng: RngStream = None) -> Dataset:
    """Two concentric rings; class 0 on the inner radius. Noise is Gaussian in radius."""
    if n < 4:
        raise UsageError("need at least 4 points")
    rng = rng or RngStream(0)
    n0 = (n + 1) // 2
    labels = np.repeat([0, 1], [n0, n - n0])
    r = np.asarray(radii, dtype=np.float64)[labels]
    if noise > 0:
        r = r + rng.normal(0.0, noise, n)
    theta = rng.uniform(0.0, 2 * np.pi, n)
    X = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    return Dataset(X, one_hot(labels, 2))


def gen_blobs(n: int, separation: float = 4.0, rng: RngStream = None) -> Dataset:
    """Two unit-variance Gaussian blobs at (+-separation/2, 0), linearly separable in practice."""
    rng = rng or RngStream(0)
    n0 = (n + 1) // 2
    labels = np.repeat([0, 1], [n0, n - n0])
    X = rng.normal(0.0, 0.5, (n, 2))
    X[:, 0] += np.where(labels == 0, -separation / 2, separation / 2)
    return Dataset(X, one_hot(labels, 2))


def to_csv(ds: Dataset, path) -> None:
    if ds.X.shape[1] != 2:
        raise UsageError("CSV export supports 2-feature datasets only")
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["x1", "x2", "label"])
        for (x1, x2), label in zip(ds.X, ds.labels):
            w.writerow([repr(float(x1)), repr(float(x2)), int(label)])
