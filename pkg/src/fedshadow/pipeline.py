"""Run execution wired to the store: the path shared by CLI and service.

Each completed round is persisted (and optionally analyzed) as it
lands, so readers can follow a live run; the global-basis trajectory
and the advisory report are produced once the run completes.
"""

import logging
from typing import Callable, Optional

from fedshadow.advisory import Thresholds, advise
from fedshadow.federation import RunRecord, run_federation
from fedshadow.signatures import analyze_run, feature_rows_for_config, signature_for_round
from fedshadow.store import RunStore

logger = logging.getLogger(__name__)


def execute_run(store: RunStore, run_id: str, workers: int = 1,
                should_stop: Optional[Callable[[], bool]] = None,
                live_signatures: bool = True) -> RunRecord:
    """Run the federation for an already-created run directory."""
    config = store.read_config(run_id)
    n_classes = int(config.data_spec.get("n_classes", 10))
    rows = feature_rows_for_config(config)
    signatures = []

    store.set_status(run_id, "running", 0)

    def sink(round_record):
        store.save_round(run_id, round_record)
        if live_signatures:
            signatures.append(signature_for_round(round_record, n_classes, rows))
            store.save_signatures(run_id, signatures)

    record = run_federation(config, progress_sink=sink, run_id=run_id,
                            workers=workers, should_stop=should_stop)

    if record.final_params is not None:
        store.save_final_params(run_id, record.final_params)

    if record.status == "completed":
        analyze_and_persist(store, record)
        store.set_status(run_id, "completed", len(record.rounds))
    else:
        store.set_status(run_id, "failed", len(record.rounds), error=record.error)
        logger.warning("run %s failed: %s", run_id, record.error)
    return record


def analyze_and_persist(store: RunStore, record: RunRecord,
                        thresholds: Thresholds = Thresholds()):
    """Signatures, trajectory and advisory for a run with >= 1 round."""
    signatures, trajectory = analyze_run(record)
    store.save_signatures(record.run_id, signatures)
    store.save_trajectory(record.run_id, trajectory)
    report = advise(record, signatures, thresholds)
    store.save_advisory(record.run_id, report.to_json_dict())
    return signatures, trajectory, report
