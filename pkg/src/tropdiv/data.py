"""Dataset ingestion: MNIST IDX files, labelled CSV, synthetic Gaussians."""
from __future__ import annotations

import csv
import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


class DataFormatError(ValueError):
    """Malformed dataset file."""


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    tag: str = ""

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.features, dtype=float))
        y = np.asarray(self.labels).ravel()
        if len(X) != len(y):
            raise ValueError(f"{len(X)} feature rows but {len(y)} labels")
        if len(y) == 0:
            raise ValueError("dataset is empty")
        if not np.all(np.isfinite(X)):
            raise ValueError("features contain missing or non-finite values")
        if not np.isin(y, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y.astype(np.int64))

    def __len__(self):
        return len(self.labels)

    @property
    def n_features(self):
        return self.features.shape[1]

    def subset(self, idx, tag=None):
        return Dataset(self.features[idx], self.labels[idx], self.tag if tag is None else tag)

    def stats(self):
        return {"tag": self.tag, "n": len(self), "d": self.n_features,
                "positives": int(self.labels.sum()),
                "feature_min": float(self.features.min()),
                "feature_max": float(self.features.max())}


def _read_bytes(path):
    path = Path(path)
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def read_idx_images(path):
    raw = _read_bytes(path)
    if len(raw) < 16:
        raise DataFormatError(f"{path}: truncated header")
    magic, n, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IMAGES_MAGIC:
        raise DataFormatError(f"{path}: bad magic 0x{magic:08x}, expected 0x{IMAGES_MAGIC:08x}")
    body = np.frombuffer(raw, dtype=np.uint8, offset=16)
    if body.size != n * rows * cols:
        raise DataFormatError(f"{path}: expected {n * rows * cols} pixel bytes, found {body.size}")
    return body.reshape(n, rows * cols)


def read_idx_labels(path):
    raw = _read_bytes(path)
    if len(raw) < 8:
        raise DataFormatError(f"{path}: truncated header")
    magic, n = struct.unpack(">II", raw[:8])
    if magic != LABELS_MAGIC:
        raise DataFormatError(f"{path}: bad magic 0x{magic:08x}, expected 0x{LABELS_MAGIC:08x}")
    body = np.frombuffer(raw, dtype=np.uint8, offset=8)
    if body.size != n:
        raise DataFormatError(f"{path}: expected {n} labels, found {body.size}")
    return body


def load_idx(images_path, labels_path, digits=None, even_odd=False):
    """Read an MNIST-style IDX pair (optionally gzipped) as a binary dataset.

    Parameters
    ----------
    digits : pair of int, optional
        Keep only these two classes, relabelled 0 and 1 in the given order.
    even_odd : bool
        Relabel every digit by parity (even -> 0, odd -> 1).

    Pixels are scaled to [0, 1].
    """
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if len(images) != len(labels):
        raise DataFormatError(f"{len(images)} images but {len(labels)} labels")
    if digits is not None and even_odd:
        raise ValueError("choose either a digit pair or even/odd relabelling")
    if digits is not None:
        a, b = (int(v) for v in digits)
        keep = (labels == a) | (labels == b)
        images, labels = images[keep], (labels[keep] == b).astype(np.int64)
        tag = f"mnist-{a}v{b}"
    elif even_odd:
        labels = (labels % 2).astype(np.int64)
        tag = "mnist-evenodd"
    else:
        if labels.max(initial=0) > 1:
            raise ValueError("labels are not binary; pass digits=(a, b) or even_odd=True")
        tag = "idx"
    return Dataset(images.astype(float) / 255.0, labels, tag)


def load_csv(path, tag=None):
    """CSV with a header row; label in the first column, features after."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        rows = [r for r in reader if r]
    if len(header) < 2:
        raise DataFormatError(f"{path}: need a label column and at least one feature")
    try:
        table = np.array(rows, dtype=float)
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from None
    if table.ndim != 2 or table.shape[1] != len(header):
        raise DataFormatError(f"{path}: rows do not match the {len(header)}-column header")
    return Dataset(table[:, 1:], table[:, 0], tag or path.stem)


def save_csv(data: Dataset, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label"] + [f"x{k}" for k in range(data.n_features)])
        for label, row in zip(data.labels, data.features):
            writer.writerow([int(label)] + [repr(float(v)) for v in row])


def synth_gaussians(n, d, separation, seed=0):
    """Two isotropic unit Gaussians centred at +-separation/2 on the first axis."""
    if n % 2:
        raise ValueError("n must be even")
    rng = np.random.default_rng(seed)
    half = n // 2
    X = rng.standard_normal((n, d))
    X[:half, 0] -= separation / 2.0
    X[half:, 0] += separation / 2.0
    y = np.repeat([0, 1], half)
    order = rng.permutation(n)
    return Dataset(X[order], y[order], f"gauss-d{d}-s{separation:g}")


def train_validation_split(data: Dataset, validation_fraction=0.2, seed=0):
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(data))
    n_val = int(round(validation_fraction * len(data)))
    return data.subset(np.sort(order[n_val:])), data.subset(np.sort(order[:n_val]))


def sample_subset(data: Dataset, size, seed=0):
    """Random subset of at most ``size`` rows (the whole set when smaller)."""
    if size >= len(data):
        return data
    rng = np.random.default_rng(seed)
    return data.subset(np.sort(rng.choice(len(data), size=size, replace=False)))
