"""Dataset sources: synthetic Gaussian blobs and IDX-format files.

The blob generator is the desk-scale stand-in for image benchmarks:
10 well-separated classes make the clean baseline near-perfect, so
attack damage reads directly off the F1 curves. The IDX loader accepts
the standard big-endian image/label files (optionally gzipped).
"""

import gzip
import struct

import numpy as np

from fedshadow.errors import ConfigError
from fedshadow.learner import LabeledDataset
from fedshadow.rng import TAG_DATA, TAG_SPLIT, derive_seed, stream

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801

DEFAULT_DATA_SPEC = {
    "kind": "synthetic",
    "n_samples": 5000,
    "n_features": 32,
    "n_classes": 10,
}

_MIN_CENTER_DISTANCE = 6.0


def make_blobs(n_samples: int, n_features: int = 32, n_classes: int = 10,
               seed: int = 0) -> LabeledDataset:
    """Isotropic unit-variance Gaussian blobs, one per class.

    Class centers are redrawn until pairwise distances are >= 6, then
    the whole feature matrix is min-max scaled to [0, 1]. Sample counts
    are balanced (off by at most one) and the output order is shuffled.
    """
    if n_samples < n_classes:
        raise ConfigError("need at least one sample per class")
    rng = stream(seed)

    centers = rng.normal(0.0, 2.0, size=(n_classes, n_features))
    for _ in range(1000):
        diff = centers[:, None, :] - centers[None, :, :]
        dist = np.sqrt((diff ** 2).sum(axis=2))
        np.fill_diagonal(dist, np.inf)
        bad = np.where((dist < _MIN_CENTER_DISTANCE).any(axis=1))[0]
        if bad.size == 0:
            break
        centers[bad[0]] = rng.normal(0.0, 2.0, size=n_features)
    else:
        raise ConfigError("could not place class centers; lower n_classes or raise n_features")

    base = n_samples // n_classes
    counts = np.full(n_classes, base)
    counts[: n_samples - base * n_classes] += 1

    labels = np.repeat(np.arange(n_classes), counts)
    features = centers[labels] + rng.normal(0.0, 1.0, size=(n_samples, n_features))

    lo = features.min(axis=0)
    span = features.max(axis=0) - lo
    span[span == 0.0] = 1.0
    features = (features - lo) / span

    perm = rng.permutation(n_samples)
    return LabeledDataset(features[perm], labels[perm], n_classes)


def train_test_split(ds: LabeledDataset, test_fraction: float, seed: int):
    """Seeded permutation split into (train, test)."""
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError("test_fraction must be in (0, 1)")
    n = len(ds)
    n_test = max(1, int(round(n * test_fraction)))
    if n_test >= n:
        raise ConfigError("split leaves no training data")
    perm = stream(seed).permutation(n)
    return ds.subset(perm[n_test:]), ds.subset(perm[:n_test])


def _read_be32(f) -> int:
    data = f.read(4)
    if len(data) != 4:
        raise ConfigError("truncated IDX header")
    return struct.unpack(">I", data)[0]


def _open_maybe_gzip(path):
    if str(path).endswith(".gz"):
        return gzip.open(path, "rb")
    return open(path, "rb")


def load_idx_images(path) -> np.ndarray:
    """(n, rows*cols) float64 matrix scaled to [0, 1]."""
    with _open_maybe_gzip(path) as f:
        magic = _read_be32(f)
        if magic != IDX_IMAGE_MAGIC:
            raise ConfigError(f"{path}: bad IDX image magic 0x{magic:08x}")
        count = _read_be32(f)
        rows = _read_be32(f)
        cols = _read_be32(f)
        raw = f.read(count * rows * cols)
        if len(raw) != count * rows * cols:
            raise ConfigError(f"{path}: truncated IDX image payload")
        pixels = np.frombuffer(raw, dtype=np.uint8).reshape(count, rows * cols)
    return pixels.astype(np.float64) / 255.0


def load_idx_labels(path) -> np.ndarray:
    with _open_maybe_gzip(path) as f:
        magic = _read_be32(f)
        if magic != IDX_LABEL_MAGIC:
            raise ConfigError(f"{path}: bad IDX label magic 0x{magic:08x}")
        count = _read_be32(f)
        raw = f.read(count)
        if len(raw) != count:
            raise ConfigError(f"{path}: truncated IDX label payload")
        return np.frombuffer(raw, dtype=np.uint8).astype(np.int64)


def load_idx_dataset(images_path, labels_path, n_classes: int = 10) -> LabeledDataset:
    features = load_idx_images(images_path)
    labels = load_idx_labels(labels_path)
    if features.shape[0] != labels.shape[0]:
        raise ConfigError("IDX image and label counts disagree")
    return LabeledDataset(features, labels, n_classes)


def build_datasets(data_spec: dict, master_seed: int):
    """Resolve a data_spec descriptor into (train, test) datasets.

    Synthetic descriptors derive their generation and split seeds from
    the run's master seed; IDX descriptors point at explicit files.
    """
    kind = data_spec.get("kind")
    if kind == "synthetic":
        ds = make_blobs(
            n_samples=int(data_spec.get("n_samples", DEFAULT_DATA_SPEC["n_samples"])),
            n_features=int(data_spec.get("n_features", DEFAULT_DATA_SPEC["n_features"])),
            n_classes=int(data_spec.get("n_classes", DEFAULT_DATA_SPEC["n_classes"])),
            seed=derive_seed(master_seed, TAG_DATA),
        )
        return train_test_split(
            ds, test_fraction=float(data_spec.get("test_fraction", 0.2)),
            seed=derive_seed(master_seed, TAG_SPLIT),
        )
    if kind == "idx":
        n_classes = int(data_spec.get("n_classes", 10))
        train = load_idx_dataset(data_spec["train_images"], data_spec["train_labels"], n_classes)
        test = load_idx_dataset(data_spec["test_images"], data_spec["test_labels"], n_classes)
        return train, test
    raise ConfigError(f"unknown data_spec kind {kind!r}")
