"""Datasets: two-moons generator, CSV and IDX loaders."""

import csv
import gzip
import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError, DomainError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    split: str = "train"
    n_classes: int | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise DataFormatError(f"features must be 2-D, got shape {self.features.shape}")
        if self.features.shape[0] != self.labels.shape[0]:
            raise DataFormatError(f"{self.features.shape[0]} feature rows but {self.labels.shape[0]} labels")
        if self.labels.size and self.labels.min() < 0:
            raise DataFormatError("labels must be non-negative")
        if self.n_classes is None:
            self.n_classes = int(self.labels.max()) + 1 if self.labels.size else 0
        elif self.labels.size and self.labels.max() >= self.n_classes:
            raise DataFormatError(f"label {int(self.labels.max())} >= class count {self.n_classes}")

    def __len__(self):
        return self.labels.shape[0]

    @property
    def dims(self):
        return self.features.shape[1]

    def subset(self, idx, split=None):
        return Dataset(self.features[idx], self.labels[idx], split or self.split, self.n_classes)


def gen_two_moons(n, noise, seed, test_fraction=0.2):
    """Two interleaving half circles, ``n/2`` points each.

    The outer moon is the upper unit half circle centred at (0, 0), the inner
    one the lower unit half circle centred at (1, 0.5). Returns ``(train, test)``
    split by a seeded permutation.
    """
    n = int(n)
    if n < 2 or n % 2:
        raise DomainError(f"n must be even and >= 2, got {n}")
    if noise < 0:
        raise DomainError("noise must be >= 0")
    half = n // 2
    t = np.linspace(0.0, math.pi, half)
    outer = np.column_stack([np.cos(t), np.sin(t)])
    inner = np.column_stack([1.0 - np.cos(t), 0.5 - np.sin(t)])
    x = np.vstack([outer, inner])
    y = np.concatenate([np.zeros(half, dtype=np.int64), np.ones(half, dtype=np.int64)])
    rng = np.random.default_rng(seed)
    if noise > 0:
        x = x + rng.normal(scale=noise, size=x.shape)
    perm = rng.permutation(n)
    n_test = int(round(test_fraction * n))
    full = Dataset(x, y, n_classes=2)
    return full.subset(perm[n_test:], "train"), full.subset(perm[:n_test], "test")


def load_csv_dataset(path, label_column=-1, header=False, split="train", n_classes=None):
    """Read numeric rows; one column holds integer class labels.

    Row and column numbers in errors are 1-based and count the header line.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    start = 1 if header else 0
    body = [(i + 1, r) for i, r in enumerate(rows[start:], start=start) if r]
    if not body:
        raise DataFormatError(f"{path}: no data rows")
    width = len(body[0][1])
    col = label_column if label_column >= 0 else width + label_column
    if not 0 <= col < width:
        raise DataFormatError(f"label column {label_column} out of range for {width} columns")
    feats, labels = [], []
    for lineno, r in body:
        if len(r) != width:
            raise DataFormatError(f"expected {width} fields, got {len(r)}", row=lineno)
        vals = []
        for j, cell in enumerate(r):
            try:
                v = float(cell)
            except ValueError:
                raise DataFormatError(f"non-numeric value {cell!r}", row=lineno, column=j + 1) from None
            vals.append(v)
        lab = vals.pop(col)
        if lab != int(lab) or lab < 0:
            raise DataFormatError(f"label {lab!r} is not a class index", row=lineno, column=col + 1)
        feats.append(vals)
        labels.append(int(lab))
    return Dataset(np.array(feats, dtype=np.float64).reshape(len(labels), width - 1), labels, split, n_classes)


def _open(path):
    return gzip.open(path, "rb") if str(path).endswith(".gz") else open(path, "rb")


def load_idx_images(images_path, labels_path, limit=None, split="train"):
    """IDX image/label pair (MNIST layout); pixels scaled to [0, 1]."""
    with _open(images_path) as fh:
        raw = fh.read()
    if len(raw) < 16:
        raise DataFormatError(f"{images_path}: truncated header")
    magic, count, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IDX_IMAGES_MAGIC:
        raise DataFormatError(f"{images_path}: bad magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}")
    with _open(labels_path) as fh:
        lraw = fh.read()
    if len(lraw) < 8:
        raise DataFormatError(f"{labels_path}: truncated header")
    lmagic, lcount = struct.unpack(">II", lraw[:8])
    if lmagic != IDX_LABELS_MAGIC:
        raise DataFormatError(f"{labels_path}: bad magic 0x{lmagic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}")
    if lcount != count:
        raise DataFormatError(f"{count} images but {lcount} labels")
    n = count if limit is None else min(count, int(limit))
    size = rows * cols
    if len(raw) < 16 + n * size or len(lraw) < 8 + n:
        raise DataFormatError("file shorter than its header declares")
    pixels = np.frombuffer(raw, dtype=np.uint8, count=n * size, offset=16).reshape(n, size)
    labels = np.frombuffer(lraw, dtype=np.uint8, count=n, offset=8).astype(np.int64)
    return Dataset(pixels.astype(np.float64) / 255.0, labels, split, n_classes=10)


def write_idx(images, labels, images_path, labels_path):
    """Write uint8 arrays in IDX layout (used for fixtures and tests)."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    n, rows, cols = images.shape
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, n, rows, cols))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, labels.shape[0]))
        fh.write(labels.tobytes())
