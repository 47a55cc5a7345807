"""Federated training orchestration.

Runs the full round loop: biased participant selection, label flipping
at malicious clients inside the attack window, local SGD, weighted
FedAvg, and per-round evaluation. Everything is keyed off the config's
master seed, so a run replays bit-identically, serial or parallel.
"""

import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from fedshadow.datasets import DEFAULT_DATA_SPEC, build_datasets
from fedshadow.errors import AggregationError, ConfigError, NumericDivergenceError
from fedshadow.learner import (
    EvalMetrics,
    LabeledDataset,
    ModelParams,
    TrainSpec,
    evaluate,
    init_params,
    train_local,
)
from fedshadow.rng import TAG_INIT, TAG_SELECT, TAG_SHARD, TAG_TRAIN, derive_seed, stream

DEFAULT_HIDDEN_WIDTH = 32


@dataclass(frozen=True)
class AttackConfig:
    """Label-flip attack plan: who, what, and when."""

    victim_class: int
    target_class: int
    n_malicious: int
    window: tuple  # (start_round, end_round), inclusive, 1-based
    availability_bias: Optional[float] = None
    allow_noop: bool = False  # permit victim == target for no-op testing

    def to_json_dict(self) -> dict:
        doc = {
            "victim_class": self.victim_class,
            "target_class": self.target_class,
            "n_malicious": self.n_malicious,
            "window": [self.window[0], self.window[1]],
        }
        if self.availability_bias is not None:
            doc["availability_bias"] = self.availability_bias
        if self.allow_noop:
            doc["allow_noop"] = True
        return doc

    @classmethod
    def from_json_dict(cls, doc: dict) -> "AttackConfig":
        return cls(
            victim_class=int(doc["victim_class"]),
            target_class=int(doc["target_class"]),
            n_malicious=int(doc["n_malicious"]),
            window=(int(doc["window"][0]), int(doc["window"][1])),
            availability_bias=(
                float(doc["availability_bias"]) if doc.get("availability_bias") is not None else None
            ),
            allow_noop=bool(doc.get("allow_noop", False)),
        )


@dataclass(frozen=True)
class FederationConfig:
    """Full scenario description for one run."""

    n_clients: int = 50
    participants_per_round: int = 5
    n_rounds: int = 60
    attack: Optional[AttackConfig] = None
    data_spec: dict = field(default_factory=lambda: dict(DEFAULT_DATA_SPEC))
    train_spec: TrainSpec = field(default_factory=TrainSpec)
    master_seed: int = 7

    def to_json_dict(self) -> dict:
        return {
            "n_clients": self.n_clients,
            "participants_per_round": self.participants_per_round,
            "n_rounds": self.n_rounds,
            "attack": self.attack.to_json_dict() if self.attack else None,
            "data_spec": dict(self.data_spec),
            "train_spec": {
                "learning_rate": self.train_spec.learning_rate,
                "local_epochs": self.train_spec.local_epochs,
                "batch_size": self.train_spec.batch_size,
            },
            "master_seed": self.master_seed,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "FederationConfig":
        errors = validate_config_dict(doc)
        if errors:
            raise ConfigError(
                "; ".join(f"{f}: {m}" for f, m in errors), errors=errors
            )
        ts = doc.get("train_spec") or {}
        return cls(
            n_clients=int(doc.get("n_clients", 50)),
            participants_per_round=int(doc.get("participants_per_round", 5)),
            n_rounds=int(doc.get("n_rounds", 60)),
            attack=AttackConfig.from_json_dict(doc["attack"]) if doc.get("attack") else None,
            data_spec=dict(doc.get("data_spec") or DEFAULT_DATA_SPEC),
            train_spec=TrainSpec(
                learning_rate=float(ts.get("learning_rate", 0.05)),
                local_epochs=int(ts.get("local_epochs", 2)),
                batch_size=int(ts.get("batch_size", 32)),
            ),
            master_seed=int(doc.get("master_seed", 7)),
        )


def validate_config_dict(doc: dict) -> list:
    """Field-level validation of a config JSON document.

    Returns a list of (field_path, message) pairs; empty means valid.
    The same rules back the CLI (exit 1) and the API (HTTP 400).
    """
    errors = []

    def _int(name, default, minimum=None):
        value = doc.get(name, default)
        try:
            value = int(value)
        except (TypeError, ValueError):
            errors.append((name, "must be an integer"))
            return None
        if minimum is not None and value < minimum:
            errors.append((name, f"must be >= {minimum}"))
            return None
        return value

    n_clients = _int("n_clients", 50, minimum=1)
    k = _int("participants_per_round", 5, minimum=1)
    n_rounds = _int("n_rounds", 60, minimum=1)
    if n_clients is not None and k is not None and k > n_clients:
        errors.append(("participants_per_round", "must be <= n_clients"))

    data_spec = doc.get("data_spec") or DEFAULT_DATA_SPEC
    n_classes = 10
    if not isinstance(data_spec, dict):
        errors.append(("data_spec", "must be an object"))
    else:
        kind = data_spec.get("kind")
        if kind == "synthetic":
            n_classes = int(data_spec.get("n_classes", 10))
            n_samples = int(data_spec.get("n_samples", DEFAULT_DATA_SPEC["n_samples"]))
            if n_classes < 2:
                errors.append(("data_spec.n_classes", "must be >= 2"))
            if int(data_spec.get("n_features", 32)) < 1:
                errors.append(("data_spec.n_features", "must be >= 1"))
            test_fraction = float(data_spec.get("test_fraction", 0.2))
            if not 0.0 < test_fraction < 1.0:
                errors.append(("data_spec.test_fraction", "must be in (0, 1)"))
            elif n_clients is not None and n_samples - int(round(n_samples * test_fraction)) < n_clients:
                errors.append(("data_spec.n_samples", "training split smaller than n_clients"))
        elif kind == "idx":
            n_classes = int(data_spec.get("n_classes", 10))
            for key in ("train_images", "train_labels", "test_images", "test_labels"):
                if not data_spec.get(key):
                    errors.append((f"data_spec.{key}", "required for kind 'idx'"))
        else:
            errors.append(("data_spec.kind", "must be 'synthetic' or 'idx'"))

    attack = doc.get("attack")
    if attack is not None:
        if not isinstance(attack, dict):
            errors.append(("attack", "must be an object or null"))
        else:
            victim = attack.get("victim_class")
            target = attack.get("target_class")
            for name, value in (("victim_class", victim), ("target_class", target)):
                if not isinstance(value, int) or not 0 <= value < n_classes:
                    errors.append((f"attack.{name}", f"must be a class id in [0, {n_classes})"))
            if (
                isinstance(victim, int) and victim == target
                and not attack.get("allow_noop", False)
            ):
                errors.append(("attack.target_class", "must differ from victim_class (set allow_noop to override)"))
            m = attack.get("n_malicious")
            if not isinstance(m, int) or m < 1:
                errors.append(("attack.n_malicious", "must be a positive integer"))
            elif n_clients is not None and m > n_clients:
                errors.append(("attack.n_malicious", "must be <= n_clients"))
            window = attack.get("window")
            if (
                not isinstance(window, (list, tuple)) or len(window) != 2
                or not all(isinstance(v, int) for v in window)
            ):
                errors.append(("attack.window", "must be [start, end] round indices"))
            else:
                start, end = window
                if start < 1:
                    errors.append(("attack.window", "start must be >= 1"))
                if start > end:
                    errors.append(("attack.window", "start must be <= end"))
            bias = attack.get("availability_bias")
            if bias is not None:
                try:
                    bias = float(bias)
                except (TypeError, ValueError):
                    bias = None
                if bias is None or not 0.0 <= bias <= 1.0:
                    errors.append(("attack.availability_bias", "must be in [0, 1]"))

    ts = doc.get("train_spec")
    if ts is not None:
        if not isinstance(ts, dict):
            errors.append(("train_spec", "must be an object"))
        else:
            try:
                if float(ts.get("learning_rate", 0.05)) <= 0:
                    errors.append(("train_spec.learning_rate", "must be > 0"))
            except (TypeError, ValueError):
                errors.append(("train_spec.learning_rate", "must be a number"))
            for name, minimum in (("local_epochs", 1), ("batch_size", 1)):
                value = ts.get(name, minimum)
                if not isinstance(value, int) or value < minimum:
                    errors.append((f"train_spec.{name}", f"must be an integer >= {minimum}"))

    seed = doc.get("master_seed", 7)
    if not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
        errors.append(("master_seed", "must be an unsigned 64-bit integer"))

    return errors


@dataclass
class RoundRecord:
    """Everything observed in one global round."""

    round_index: int
    participant_ids: list
    malicious_flags: list
    update_deltas: np.ndarray  # (k, P) float64, local minus previous global
    global_params_digest: str
    metrics: EvalMetrics

    def to_json_dict(self) -> dict:
        return {
            "round_index": self.round_index,
            "participant_ids": list(self.participant_ids),
            "malicious_flags": list(self.malicious_flags),
            "update_deltas": np.asarray(self.update_deltas).tolist(),
            "global_params_digest": self.global_params_digest,
            "metrics": self.metrics.to_json_dict(),
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "RoundRecord":
        return cls(
            round_index=int(doc["round_index"]),
            participant_ids=[int(v) for v in doc["participant_ids"]],
            malicious_flags=[bool(v) for v in doc["malicious_flags"]],
            update_deltas=np.asarray(doc["update_deltas"], dtype=np.float64),
            global_params_digest=str(doc["global_params_digest"]),
            metrics=EvalMetrics.from_json_dict(doc["metrics"]),
        )


RUN_STATUSES = ("pending", "running", "completed", "failed")


@dataclass
class RunRecord:
    """Ordered rounds plus config and final artifacts; the persisted unit."""

    run_id: str
    config: FederationConfig
    rounds: list
    status: str = "pending"
    final_params: Optional[ModelParams] = None
    error: Optional[str] = None


def new_run_id() -> str:
    return "run-" + uuid.uuid4().hex[:12]


def shard_data(dataset: LabeledDataset, n_clients: int, seed: int) -> list:
    """Disjoint near-equal IID shards whose union is the input.

    Shard sizes differ by at most one; which shards take the remainder
    is itself seed-determined.
    """
    n = len(dataset)
    if n < n_clients:
        raise ConfigError(f"dataset of {n} samples cannot feed {n_clients} clients")
    rng = stream(seed)
    perm = rng.permutation(n)
    base = n // n_clients
    remainder = n - base * n_clients
    sizes = np.full(n_clients, base, dtype=np.int64)
    if remainder:
        extra = rng.choice(n_clients, size=remainder, replace=False)
        sizes[extra] += 1
    shards = []
    offset = 0
    for size in sizes:
        shards.append(dataset.subset(perm[offset:offset + size]))
        offset += size
    return shards


def flip_labels(shard: LabeledDataset, victim: int, target: int) -> LabeledDataset:
    """Relabel every victim-class sample as the target class.

    Features are shared with the input; labels are copied, so the
    original shard is never mutated.
    """
    if not 0 <= victim < shard.n_classes or not 0 <= target < shard.n_classes:
        raise ConfigError("victim/target must be valid class ids")
    labels = shard.labels.copy()
    labels[labels == victim] = target
    return LabeledDataset(shard.features, labels, shard.n_classes)


def is_attack_active(round_index: int, attack: Optional[AttackConfig]) -> bool:
    """True iff an attack is configured and round_index is inside its window."""
    if attack is None:
        return False
    start, end = attack.window
    return start <= round_index <= end


def select_participants(round_index: int, config: FederationConfig,
                        rng: np.random.Generator) -> list:
    """Pick k distinct client ids for a round, honoring availability bias.

    While the attack window is active and a bias p is set, each of the
    k slots draws from the malicious pool with probability p, otherwise
    from the benign pool; an exhausted pool falls back to the other.
    Outside the window (or without bias) selection is uniform. Returned
    ids are sorted ascending, which fixes the aggregation order.
    """
    n = config.n_clients
    k = config.participants_per_round
    attack = config.attack
    bias = attack.availability_bias if attack else None

    if bias is None or not is_attack_active(round_index, attack):
        picked = rng.choice(n, size=k, replace=False)
        return sorted(int(v) for v in picked)

    m = attack.n_malicious
    malicious = list(range(m))
    benign = list(range(m, n))
    picked = []
    for _ in range(k):
        want_malicious = rng.random() < bias
        pool = malicious if want_malicious else benign
        if not pool:
            pool = benign if want_malicious else malicious
        idx = int(rng.integers(len(pool)))
        picked.append(pool.pop(idx))
    return sorted(picked)


def fedavg(params_list: list, weights: list) -> ModelParams:
    """Element-wise weighted mean of parameter sets.

    Weights are normalized to sum 1; summation runs in list order, so
    callers pass clients in ascending id order for determinism.
    """
    if not params_list:
        raise AggregationError("nothing to aggregate")
    if len(weights) != len(params_list):
        raise AggregationError("weights and params length mismatch")
    if any(w <= 0 for w in weights):
        raise AggregationError("weights must be positive")
    dims = params_list[0].dims
    shapes = [(w.shape, b.shape) for w, b in params_list[0].layers]
    for p in params_list[1:]:
        if p.dims != dims or [(w.shape, b.shape) for w, b in p.layers] != shapes:
            raise AggregationError("parameter shapes disagree")

    total = float(sum(weights))
    out = [(np.zeros_like(w), np.zeros_like(b)) for w, b in params_list[0].layers]
    for p, weight in zip(params_list, weights):
        scale = weight / total
        for (ow, ob), (w, b) in zip(out, p.layers):
            ow += scale * w
            ob += scale * b
    return ModelParams(out, dims)


def _client_round_seed(master_seed: int, round_index: int, client_id: int) -> int:
    return derive_seed(master_seed, TAG_TRAIN, round_index, client_id)


def run_federation(config: FederationConfig,
                   progress_sink: Optional[Callable] = None,
                   run_id: Optional[str] = None,
                   workers: int = 1,
                   should_stop: Optional[Callable[[], bool]] = None) -> RunRecord:
    """Execute a full federation run.

    Emits each RoundRecord to progress_sink as it completes. Numeric
    divergence at any client stops the run with status 'failed' and the
    offending round noted; completed rounds are kept.
    """
    errors = validate_config_dict(config.to_json_dict())
    if errors:
        raise ConfigError("; ".join(f"{f}: {m}" for f, m in errors), errors=errors)

    run_id = run_id or new_run_id()
    ms = config.master_seed
    attack = config.attack
    m = attack.n_malicious if attack else 0

    train, test = build_datasets(config.data_spec, ms)
    shards = shard_data(train, config.n_clients, derive_seed(ms, TAG_SHARD))
    flipped = {}
    if attack is not None:
        for cid in range(m):
            flipped[cid] = flip_labels(shards[cid], attack.victim_class, attack.target_class)

    dims = (train.n_features, DEFAULT_HIDDEN_WIDTH, train.n_classes)
    global_params = init_params(dims, derive_seed(ms, TAG_INIT))

    record = RunRecord(run_id=run_id, config=config, rounds=[], status="running")

    for round_index in range(1, config.n_rounds + 1):
        if should_stop is not None and should_stop():
            record.status = "failed"
            record.error = f"stopped at round {round_index}"
            record.final_params = global_params
            return record

        active = is_attack_active(round_index, attack)
        sel_rng = stream(ms, TAG_SELECT, round_index)
        participants = select_participants(round_index, config, sel_rng)

        def train_one(cid, start=global_params, r=round_index, poisoned=active):
            data = flipped[cid] if (poisoned and cid in flipped) else shards[cid]
            spec = config.train_spec.with_seed(_client_round_seed(ms, r, cid))
            return train_local(start, data, spec)

        try:
            if workers > 1:
                with ThreadPoolExecutor(max_workers=workers) as pool:
                    locals_ = list(pool.map(train_one, participants))
            else:
                locals_ = [train_one(cid) for cid in participants]
        except NumericDivergenceError as err:
            err.round_index = round_index
            record.status = "failed"
            record.error = str(err)
            record.final_params = global_params
            return record

        prev_flat = global_params.flatten()
        deltas = np.stack([p.flatten() - prev_flat for p in locals_])
        weights = [len(shards[cid]) for cid in participants]
        global_params = fedavg(locals_, weights)

        metrics = evaluate(global_params, test)
        round_record = RoundRecord(
            round_index=round_index,
            participant_ids=list(participants),
            malicious_flags=[bool(attack is not None and cid < m) for cid in participants],
            update_deltas=deltas,
            global_params_digest=global_params.digest(),
            metrics=metrics,
        )
        record.rounds.append(round_record)
        if progress_sink is not None:
            progress_sink(round_record)

    record.status = "completed"
    record.final_params = global_params
    return record
