"""Minimal dense classifier: one hidden relu layer, softmax cross-entropy.

This is the model every client trains locally. It is intentionally
small; the point of the lab is the federation dynamics and the update
signatures, not the classifier.
"""

import hashlib
from dataclasses import dataclass, field, replace

import numpy as np

from fedshadow import _kernels
from fedshadow.errors import ConfigError, NumericDivergenceError
from fedshadow.rng import TAG_EPOCH, stream


@dataclass
class LabeledDataset:
    """Feature matrix plus integer class labels."""

    features: np.ndarray  # (n, d) float64
    labels: np.ndarray    # (n,) int64
    n_classes: int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise ConfigError("features must be a 2-d matrix")
        if self.features.shape[0] != self.labels.shape[0]:
            raise ConfigError("features and labels disagree on sample count")
        if self.n_classes < 2:
            raise ConfigError("need at least 2 classes")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ConfigError("labels out of range [0, n_classes)")

    def __len__(self):
        return int(self.features.shape[0])

    @property
    def n_features(self):
        return int(self.features.shape[1])

    def subset(self, indices) -> "LabeledDataset":
        idx = np.asarray(indices)
        return LabeledDataset(self.features[idx], self.labels[idx], self.n_classes)


@dataclass
class ModelParams:
    """Layer-indexed parameters of the classifier: [(W1, b1), (W2, b2)].

    W1 is hidden x n_features, W2 is n_classes x hidden. This is the
    unit FedAvg averages and the source of per-round update deltas.
    """

    layers: list  # [(weight, bias), ...]
    dims: tuple   # (n_features, hidden, n_classes)

    @property
    def w1(self):
        return self.layers[0][0]

    @property
    def b1(self):
        return self.layers[0][1]

    @property
    def w2(self):
        return self.layers[1][0]

    @property
    def b2(self):
        return self.layers[1][1]

    def copy(self) -> "ModelParams":
        return ModelParams([(w.copy(), b.copy()) for w, b in self.layers], tuple(self.dims))

    def flatten(self) -> np.ndarray:
        """Row-major concatenation: W1, b1, W2, b2."""
        parts = []
        for w, b in self.layers:
            parts.append(w.ravel())
            parts.append(b)
        return np.concatenate(parts)

    @classmethod
    def from_flat(cls, vec: np.ndarray, dims) -> "ModelParams":
        d, h, c = dims
        vec = np.asarray(vec, dtype=np.float64)
        expected = h * d + h + c * h + c
        if vec.shape != (expected,):
            raise ConfigError(f"flat vector length {vec.shape} does not match dims {dims}")
        o = 0
        w1 = vec[o:o + h * d].reshape(h, d).copy(); o += h * d
        b1 = vec[o:o + h].copy(); o += h
        w2 = vec[o:o + c * h].reshape(c, h).copy(); o += c * h
        b2 = vec[o:o + c].copy()
        return cls([(w1, b1), (w2, b2)], (d, h, c))

    def digest(self) -> str:
        """SHA-256 over dims and the flat parameter bytes."""
        hasher = hashlib.sha256()
        hasher.update(np.asarray(self.dims, dtype=np.int64).tobytes())
        hasher.update(np.ascontiguousarray(self.flatten()).tobytes())
        return hasher.hexdigest()

    def all_finite(self) -> bool:
        return all(np.isfinite(w).all() and np.isfinite(b).all() for w, b in self.layers)

    def to_json_dict(self) -> dict:
        return {
            "dims": list(self.dims),
            "layers": [{"weight": w.tolist(), "bias": b.tolist()} for w, b in self.layers],
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ModelParams":
        layers = [
            (np.asarray(layer["weight"], dtype=np.float64), np.asarray(layer["bias"], dtype=np.float64))
            for layer in doc["layers"]
        ]
        return cls(layers, tuple(doc["dims"]))


@dataclass(frozen=True)
class TrainSpec:
    """Local-training hyperparameters."""

    learning_rate: float = 0.05
    local_epochs: int = 2
    batch_size: int = 32
    seed: int = 0

    def with_seed(self, seed: int) -> "TrainSpec":
        return replace(self, seed=int(seed))


@dataclass
class EvalMetrics:
    confusion: np.ndarray         # (c, c) counts, rows = true, cols = predicted
    per_class_f1: np.ndarray      # (c,)
    accuracy: float

    def to_json_dict(self) -> dict:
        return {
            "confusion": self.confusion.tolist(),
            "per_class_f1": self.per_class_f1.tolist(),
            "accuracy": self.accuracy,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "EvalMetrics":
        return cls(
            confusion=np.asarray(doc["confusion"], dtype=np.int64),
            per_class_f1=np.asarray(doc["per_class_f1"], dtype=np.float64),
            accuracy=float(doc["accuracy"]),
        )


def init_params(dims, seed: int) -> ModelParams:
    """Fresh parameters: weights uniform in +-1/sqrt(fan_in), biases zero."""
    d, h, c = (int(v) for v in dims)
    if d < 1 or h < 1 or c < 2:
        raise ConfigError(f"invalid model dims {dims}")
    rng = stream(seed)
    lim1 = 1.0 / np.sqrt(d)
    w1 = rng.uniform(-lim1, lim1, size=(h, d))
    lim2 = 1.0 / np.sqrt(h)
    w2 = rng.uniform(-lim2, lim2, size=(c, h))
    return ModelParams([(w1, np.zeros(h)), (w2, np.zeros(c))], (d, h, c))


def train_local(start: ModelParams, data: LabeledDataset, spec: TrainSpec) -> ModelParams:
    """Mini-batch SGD on softmax cross-entropy, deterministic per spec.seed.

    Batch order is a seeded shuffle per epoch keyed (spec.seed, epoch),
    so schedules replay identically under any threading.
    """
    if len(data) == 0:
        raise ConfigError("cannot train on an empty dataset")
    d, _, c = start.dims
    if data.n_features != d:
        raise ConfigError(f"dataset has {data.n_features} features, model expects {d}")
    if data.labels.max() >= c:
        raise ConfigError("dataset labels exceed model classes")

    n = len(data)
    batch_size = min(int(spec.batch_size), n)
    if batch_size < 1:
        raise ConfigError("batch_size must be >= 1")
    epochs = int(spec.local_epochs)

    order = np.empty((epochs, n), dtype=np.int64)
    for epoch in range(epochs):
        order[epoch] = stream(spec.seed, TAG_EPOCH, epoch).permutation(n)

    out = start.copy()
    bad_epoch, bad_batch = _kernels.sgd_train(
        out.w1, out.b1, out.w2, out.b2,
        np.ascontiguousarray(data.features), data.labels,
        order, batch_size, float(spec.learning_rate),
    )
    if bad_epoch >= 0:
        raise NumericDivergenceError(epoch=int(bad_epoch), batch=int(bad_batch))
    return out


def predict(params: ModelParams, features: np.ndarray) -> np.ndarray:
    """Argmax class per row; ties resolve to the lowest class id."""
    logits = _kernels.forward_logits(
        params.w1, params.b1, params.w2, params.b2, np.ascontiguousarray(features)
    )
    return np.argmax(logits, axis=1)


def cross_entropy_loss(params: ModelParams, data: LabeledDataset) -> float:
    """Mean softmax cross-entropy; reference forward pass for tests."""
    logits = _kernels.forward_logits(
        params.w1, params.b1, params.w2, params.b2, np.ascontiguousarray(data.features)
    )
    shifted = logits - logits.max(axis=1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    return float(-logp[np.arange(len(data)), data.labels].mean())


def evaluate(params: ModelParams, test: LabeledDataset) -> EvalMetrics:
    """Confusion matrix, per-class F1 and accuracy on a held-out set."""
    if len(test) == 0:
        raise ConfigError("cannot evaluate on an empty test set")
    c = test.n_classes
    pred = predict(params, test.features)
    confusion = np.zeros((c, c), dtype=np.int64)
    np.add.at(confusion, (test.labels, pred), 1)

    tp = np.diag(confusion).astype(np.float64)
    fp = confusion.sum(axis=0) - tp
    fn = confusion.sum(axis=1) - tp
    denom = 2 * tp + fp + fn
    f1 = np.divide(2 * tp, denom, out=np.zeros(c), where=denom > 0)

    accuracy = float(tp.sum() / confusion.sum())
    return EvalMetrics(confusion=confusion, per_class_f1=f1, accuracy=accuracy)
