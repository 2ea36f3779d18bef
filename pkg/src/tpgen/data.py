"""IDX image/label ingestion, dataset splits, and minibatch iteration.

Pixels are kept continuous in [0, 1] (byte value / 255); the visible
conditional of the model is a Gaussian with sigmoid mean, so no
binarization happens anywhere in the pipeline.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


class IdxFormatError(ValueError):
    pass


@dataclass
class Dataset:
    images: np.ndarray                      # (n, d), values in [0, 1]
    labels: np.ndarray | None = None        # (n,) ints, optional
    split: str = ""
    image_shape: tuple[int, int] = (28, 28)

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        if self.images.ndim != 2:
            raise ValueError("images must be a 2-D (n, d) array")
        if self.images.size and (self.images.min() < 0.0 or self.images.max() > 1.0):
            raise ValueError("pixel values must lie in [0, 1]")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.images.shape[0],):
                raise ValueError(
                    f"{self.labels.shape[0]} labels for {self.images.shape[0]} images"
                )

    @property
    def n(self) -> int:
        return self.images.shape[0]

    @property
    def dim(self) -> int:
        return self.images.shape[1]

    def subset(self, indices, split: str = "") -> "Dataset":
        labels = self.labels[indices] if self.labels is not None else None
        return Dataset(self.images[indices], labels,
                       split or self.split, self.image_shape)


def _read_exact(fh, size: int, what: str) -> bytes:
    buf = fh.read(size)
    if len(buf) != size:
        raise IdxFormatError(f"truncated IDX file: expected {size} bytes of {what}, got {len(buf)}")
    return buf


def load_idx_images(path, split: str = "") -> Dataset:
    """Parse an IDX ubyte image file (big-endian header, magic 0x00000803)."""
    with open(path, "rb") as fh:
        magic, = struct.unpack(">I", _read_exact(fh, 4, "magic"))
        if magic != IMAGE_MAGIC:
            raise IdxFormatError(
                f"bad image magic in {path}: expected {IMAGE_MAGIC:#010x}, found {magic:#010x}"
            )
        n, rows, cols = struct.unpack(">III", _read_exact(fh, 12, "dimensions"))
        raw = _read_exact(fh, n * rows * cols, "pixel data")
    pixels = np.frombuffer(raw, dtype=np.uint8).astype(np.float64) / 255.0
    return Dataset(pixels.reshape(n, rows * cols), split=split,
                   image_shape=(rows, cols))


def load_idx_labels(path) -> np.ndarray:
    """Parse an IDX ubyte label file (big-endian header, magic 0x00000801)."""
    with open(path, "rb") as fh:
        magic, = struct.unpack(">I", _read_exact(fh, 4, "magic"))
        if magic != LABEL_MAGIC:
            raise IdxFormatError(
                f"bad label magic in {path}: expected {LABEL_MAGIC:#010x}, found {magic:#010x}"
            )
        n, = struct.unpack(">I", _read_exact(fh, 4, "count"))
        raw = _read_exact(fh, n, "label data")
    return np.frombuffer(raw, dtype=np.uint8).astype(np.int64)


def save_idx_images(dataset: Dataset, path) -> None:
    """Write images back to IDX, quantizing [0,1] floats to bytes (round-half-to-even)."""
    rows, cols = dataset.image_shape
    if rows * cols != dataset.dim:
        raise ValueError(f"image_shape {dataset.image_shape} does not match dim {dataset.dim}")
    bytes_ = np.clip(np.rint(dataset.images * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", IMAGE_MAGIC, dataset.n, rows, cols))
        fh.write(bytes_.tobytes())


def save_idx_labels(labels, path) -> None:
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() > 255:
        raise ValueError("IDX ubyte labels must fit in one byte")
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", LABEL_MAGIC, len(labels)))
        fh.write(labels.astype(np.uint8).tobytes())


def split(dataset: Dataset, train_n: int = 50000, valid_n: int = 10000,
          seed: int = 0) -> tuple[Dataset, Dataset]:
    """Seeded shuffle then disjoint head/tail split."""
    if train_n < 0 or valid_n < 0 or train_n + valid_n > dataset.n:
        raise ValueError(
            f"cannot split {dataset.n} examples into {train_n} + {valid_n}"
        )
    gen = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    order = gen.permutation(dataset.n)
    return (dataset.subset(order[:train_n], "train"),
            dataset.subset(order[train_n:train_n + valid_n], "valid"))


def minibatch_indices(n: int, size: int, seed: int, epoch: int):
    """Yield index arrays for one epoch: seeded per-epoch shuffle, short tail kept."""
    if size < 1:
        raise ValueError("minibatch size must be >= 1")
    gen = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, epoch])))
    order = gen.permutation(n)
    for start in range(0, n, size):
        yield order[start:start + size]


def minibatches(dataset: Dataset, size: int, seed: int, epoch: int):
    """Yield (size, d) image matrices covering the dataset exactly once."""
    for idx in minibatch_indices(dataset.n, size, seed, epoch):
        yield dataset.images[idx]
