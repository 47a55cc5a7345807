"""File-backed persistence of runs as JSON documents.

Layout, one directory per run id under the store root:

    <run_id>/config.json        FederationConfig
    <run_id>/rounds.jsonl       one RoundRecord per line, line i = round i+1
    <run_id>/status.json        {run_id, status, completed_rounds, created_at, error}
    <run_id>/final_params.json  final global ModelParams
    <run_id>/signatures.json    per-round SignatureRounds (after analysis)
    <run_id>/trajectory.json    global-basis Trajectory (after analysis)
    <run_id>/advisory.json      AdvisoryReport (after analysis)

rounds.jsonl is append-only and flushed to disk per round, so readers
always see a valid prefix of a live run; everything else is written
atomically via temp file + rename. Floats go through json's repr
round-trip, so parsed values equal the originals bit-exactly.
"""

import json
import logging
import os
import re
import shutil
import tempfile
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from fedshadow.errors import NotFoundError, RoundsLoadError, SequencingError, StorageError
from fedshadow.federation import FederationConfig, RoundRecord, RunRecord, new_run_id
from fedshadow.learner import ModelParams
from fedshadow.signatures import SignatureRound, Trajectory

logger = logging.getLogger(__name__)

RUN_ID_PATTERN = re.compile(r"^[a-z0-9-]{8,64}$")


def _dump(doc) -> str:
    return json.dumps(doc, allow_nan=False)


def _atomic_write(path: Path, text: str):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    except OSError as err:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise StorageError(f"cannot write {path}: {err}") from err


@dataclass
class RunSummary:
    run_id: str
    status: str
    completed_rounds: int
    created_at: str
    config_summary: dict


@dataclass
class LoadedRun:
    record: RunRecord
    signatures: Optional[list]
    trajectory: Optional[Trajectory]
    advisory: Optional[dict]


class RunStore:
    """One store root holding any number of run directories."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._round_counts = {}

    def run_dir(self, run_id: str) -> Path:
        if not RUN_ID_PATTERN.match(run_id):
            raise StorageError(f"invalid run id {run_id!r}")
        return self.root / run_id

    def _existing_dir(self, run_id: str) -> Path:
        path = self.run_dir(run_id)
        if not path.is_dir():
            raise NotFoundError(f"unknown run {run_id!r}")
        return path

    def create_run(self, config: FederationConfig, run_id: Optional[str] = None) -> str:
        run_id = run_id or new_run_id()
        path = self.run_dir(run_id)
        if path.exists():
            raise StorageError(f"run {run_id!r} already exists")
        path.mkdir(parents=True)
        _atomic_write(path / "config.json", _dump(config.to_json_dict()))
        created = datetime.now(timezone.utc).isoformat()
        self._write_status(path, run_id, "pending", 0, created_at=created)
        self._round_counts[run_id] = 0
        return run_id

    def _write_status(self, path: Path, run_id: str, status: str,
                      completed_rounds: int, created_at=None, error=None):
        existing = {}
        status_path = path / "status.json"
        if created_at is None and status_path.exists():
            try:
                existing = json.loads(status_path.read_text())
            except (OSError, json.JSONDecodeError):
                existing = {}
        doc = {
            "run_id": run_id,
            "status": status,
            "completed_rounds": completed_rounds,
            "created_at": created_at or existing.get("created_at", ""),
        }
        if error is not None:
            doc["error"] = error
        _atomic_write(status_path, _dump(doc))

    def set_status(self, run_id: str, status: str, completed_rounds: Optional[int] = None,
                   error: Optional[str] = None):
        path = self._existing_dir(run_id)
        if completed_rounds is None:
            completed_rounds = self.count_rounds(run_id)
        self._write_status(path, run_id, status, completed_rounds, error=error)

    def read_status(self, run_id: str) -> dict:
        path = self._existing_dir(run_id)
        try:
            return json.loads((path / "status.json").read_text())
        except FileNotFoundError as err:
            raise StorageError(f"run {run_id!r} has no status.json") from err
        except json.JSONDecodeError as err:
            raise StorageError(f"run {run_id!r} status.json is corrupt: {err}") from err

    def count_rounds(self, run_id: str) -> int:
        if run_id in self._round_counts:
            return self._round_counts[run_id]
        rounds_path = self._existing_dir(run_id) / "rounds.jsonl"
        count = 0
        if rounds_path.exists():
            with open(rounds_path, "rb") as f:
                for line in f:
                    if line.strip():
                        count += 1
        self._round_counts[run_id] = count
        return count

    def save_round(self, run_id: str, record: RoundRecord):
        """Append one round; rejects gaps; durable before returning."""
        path = self._existing_dir(run_id)
        expected = self.count_rounds(run_id) + 1
        if record.round_index != expected:
            raise SequencingError(
                f"round {record.round_index} appended but expected {expected}"
            )
        line = _dump(record.to_json_dict()) + "\n"
        try:
            with open(path / "rounds.jsonl", "a") as f:
                f.write(line)
                f.flush()
                os.fsync(f.fileno())
        except OSError as err:
            raise StorageError(f"cannot append round to {run_id}: {err}") from err
        self._round_counts[run_id] = expected
        self._write_status(path, run_id, "running", expected)

    def read_rounds(self, run_id: str, lenient: bool = False) -> list:
        """Parse rounds.jsonl.

        Strict mode raises RoundsLoadError naming the first bad line.
        Lenient mode drops a trailing partial line (live-run readers),
        but still errors on corruption before the end.
        """
        path = self._existing_dir(run_id) / "rounds.jsonl"
        if not path.exists():
            return []
        rounds = []
        with open(path, "r") as f:
            lines = f.read().split("\n")
        for i, line in enumerate(lines):
            if line == "":
                continue
            try:
                rounds.append(RoundRecord.from_json_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, ValueError, TypeError) as err:
                if lenient and i == len(lines) - 1:
                    break  # partially written final line
                raise RoundsLoadError(path, i + 1, str(err)) from err
        return rounds

    def save_final_params(self, run_id: str, params: ModelParams):
        path = self._existing_dir(run_id)
        _atomic_write(path / "final_params.json", _dump(params.to_json_dict()))

    def save_signatures(self, run_id: str, signatures: list):
        path = self._existing_dir(run_id)
        doc = [s.to_json_dict() for s in signatures]
        _atomic_write(path / "signatures.json", _dump(doc))

    def save_trajectory(self, run_id: str, trajectory: Trajectory):
        path = self._existing_dir(run_id)
        _atomic_write(path / "trajectory.json", _dump(trajectory.to_json_dict()))

    def save_advisory(self, run_id: str, report_doc: dict):
        path = self._existing_dir(run_id)
        _atomic_write(path / "advisory.json", _dump(report_doc))

    def _read_optional(self, run_id: str, name: str):
        path = self._existing_dir(run_id) / name
        if not path.exists():
            return None
        try:
            return json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as err:
            raise StorageError(f"{path}: {err}") from err

    def read_config(self, run_id: str) -> FederationConfig:
        doc = self._read_optional(run_id, "config.json")
        if doc is None:
            raise StorageError(f"run {run_id!r} has no config.json")
        return FederationConfig.from_json_dict(doc)

    def load_run(self, run_id: str, lenient: bool = False) -> LoadedRun:
        """Reconstruct the full RunRecord plus whatever analyses exist."""
        config = self.read_config(run_id)
        status = self.read_status(run_id)
        rounds = self.read_rounds(run_id, lenient=lenient)

        final_params = None
        doc = self._read_optional(run_id, "final_params.json")
        if doc is not None:
            final_params = ModelParams.from_json_dict(doc)

        record = RunRecord(
            run_id=run_id,
            config=config,
            rounds=rounds,
            status=status.get("status", "pending"),
            final_params=final_params,
            error=status.get("error"),
        )

        signatures = None
        doc = self._read_optional(run_id, "signatures.json")
        if doc is not None:
            signatures = [SignatureRound.from_json_dict(s) for s in doc]
        trajectory = None
        doc = self._read_optional(run_id, "trajectory.json")
        if doc is not None:
            trajectory = Trajectory.from_json_dict(doc)
        advisory = self._read_optional(run_id, "advisory.json")

        return LoadedRun(record=record, signatures=signatures,
                         trajectory=trajectory, advisory=advisory)

    def list_runs(self) -> list:
        """Valid runs, newest first; unreadable entries skipped with a warning."""
        summaries = []
        for entry in self.root.iterdir():
            if not entry.is_dir() or not RUN_ID_PATTERN.match(entry.name):
                continue
            if not (entry / "config.json").exists():
                continue
            try:
                config = json.loads((entry / "config.json").read_text())
                status = {}
                if (entry / "status.json").exists():
                    status = json.loads((entry / "status.json").read_text())
                attack = config.get("attack")
                summaries.append(RunSummary(
                    run_id=entry.name,
                    status=status.get("status", "pending"),
                    completed_rounds=int(status.get("completed_rounds", 0)),
                    created_at=str(status.get("created_at", "")),
                    config_summary={
                        "n_clients": config.get("n_clients"),
                        "participants_per_round": config.get("participants_per_round"),
                        "n_rounds": config.get("n_rounds"),
                        "attack": bool(attack),
                        "victim_class": attack.get("victim_class") if attack else None,
                        "target_class": attack.get("target_class") if attack else None,
                    },
                ))
            except (OSError, json.JSONDecodeError, ValueError) as err:
                logger.warning("skipping unreadable run %s: %s", entry.name, err)
        summaries.sort(key=lambda s: s.created_at, reverse=True)
        return summaries

    def delete_run(self, run_id: str):
        path = self._existing_dir(run_id)
        shutil.rmtree(path)
        self._round_counts.pop(run_id, None)
