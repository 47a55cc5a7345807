"""HTTP service: run lifecycle plus analytics for the dashboard.

POST /api/runs                         launch a federation in the background
GET  /api/runs                         list runs, newest first
GET  /api/runs/{id}                    status handle + config
GET  /api/runs/{id}/metrics            per-round F1/accuracy series for one class
GET  /api/runs/{id}/rounds/{r}/signature   per-round PCA signature
GET  /api/runs/{id}/trajectory         global-basis trajectory (completed runs)
GET  /api/runs/{id}/advisory           advisory report (completed runs)
DELETE /api/runs/{id}                  stop if running, then remove

Reads always serve the persisted prefix, so no request ever waits on an
in-progress training round. Static dashboard assets, when present, are
served at /.
"""

import json
import os
import threading
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Query, Request
from fastapi.responses import HTMLResponse, JSONResponse
from fastapi.staticfiles import StaticFiles

from fedshadow.errors import NotFoundError, StorageError
from fedshadow.federation import FederationConfig, validate_config_dict
from fedshadow.pipeline import execute_run
from fedshadow.store import RunStore

DEFAULT_PORT = 8080
PORT_ENV_VAR = "FEDSHADOW_PORT"


class RunManager:
    """Tracks background run threads and delete-in-progress state."""

    def __init__(self):
        self._lock = threading.Lock()
        self._threads = {}
        self._stop_events = {}
        self._deleting = set()

    def launch(self, store: RunStore, run_id: str, workers: int = 1):
        stop = threading.Event()

        def work():
            try:
                execute_run(store, run_id, workers=workers, should_stop=stop.is_set)
            except Exception as err:  # worker thread: record, never raise
                try:
                    store.set_status(run_id, "failed", error=str(err))
                except StorageError:
                    pass
            finally:
                with self._lock:
                    self._threads.pop(run_id, None)
                    self._stop_events.pop(run_id, None)

        thread = threading.Thread(target=work, name=f"run-{run_id}", daemon=True)
        with self._lock:
            self._threads[run_id] = thread
            self._stop_events[run_id] = stop
        thread.start()

    def begin_delete(self, run_id: str) -> bool:
        """Mark deletion; False if a delete is already in progress."""
        with self._lock:
            if run_id in self._deleting:
                return False
            self._deleting.add(run_id)
            stop = self._stop_events.get(run_id)
            thread = self._threads.get(run_id)
        if stop is not None:
            stop.set()
        if thread is not None:
            thread.join(timeout=60)
        return True

    def end_delete(self, run_id: str):
        with self._lock:
            self._deleting.discard(run_id)


def _error(status: int, detail: str, errors=None) -> JSONResponse:
    body = {"detail": detail}
    if errors:
        body["errors"] = [{"field": f, "message": m} for f, m in errors]
    return JSONResponse(body, status_code=status)


def create_app(store_root, dashboard_dir=None, workers: int = 1) -> FastAPI:
    store = RunStore(store_root)
    manager = RunManager()
    app = FastAPI(title="fedshadow", docs_url=None, redoc_url=None)
    app.state.store = store
    app.state.manager = manager

    @app.post("/api/runs", status_code=202)
    async def create_run(request: Request):
        try:
            body = await request.json()
        except json.JSONDecodeError:
            return _error(400, "request body is not valid JSON")
        if not isinstance(body, dict):
            return _error(400, "config must be a JSON object")
        errors = validate_config_dict(body)
        if errors:
            return _error(400, "invalid config", errors)
        config = FederationConfig.from_json_dict(body)
        run_id = store.create_run(config)
        manager.launch(store, run_id, workers=workers)
        return {"run_id": run_id}

    @app.get("/api/runs")
    def list_runs():
        return {
            "runs": [
                {
                    "run_id": s.run_id,
                    "status": s.status,
                    "completed_rounds": s.completed_rounds,
                    "created_at": s.created_at,
                    "config_summary": s.config_summary,
                }
                for s in store.list_runs()
            ]
        }

    def _status_or_none(run_id: str) -> Optional[dict]:
        try:
            return store.read_status(run_id)
        except (NotFoundError, StorageError):
            return None

    @app.get("/api/runs/{run_id}")
    def run_handle(run_id: str):
        status = _status_or_none(run_id)
        if status is None:
            return _error(404, f"unknown run {run_id}")
        doc = {
            "run_id": run_id,
            "status": status.get("status", "pending"),
            "completed_rounds": int(status.get("completed_rounds", 0)),
            "created_at": status.get("created_at", ""),
        }
        if status.get("error"):
            doc["error"] = status["error"]
        try:
            doc["config"] = store.read_config(run_id).to_json_dict()
        except StorageError:
            pass
        return doc

    @app.get("/api/runs/{run_id}/metrics")
    def metrics(run_id: str, klass: int = Query(alias="class"),
                start: Optional[int] = Query(default=None, alias="from"),
                stop: Optional[int] = Query(default=None, alias="to")):
        status = _status_or_none(run_id)
        if status is None:
            return _error(404, f"unknown run {run_id}")
        try:
            config = store.read_config(run_id)
        except StorageError:
            return _error(404, f"run {run_id} has no config")
        n_classes = int(config.data_spec.get("n_classes", 10))
        if not 0 <= klass < n_classes:
            return _error(400, "invalid class", [("class", f"must be in [0, {n_classes})")])
        lo = 1 if start is None else start
        hi = config.n_rounds if stop is None else stop
        if lo < 1:
            return _error(400, "invalid range", [("from", "must be >= 1")])
        if lo > hi:
            return _error(400, "invalid range", [("from", "must be <= to")])
        rounds = store.read_rounds(run_id, lenient=True)
        series = [
            {
                "round": r.round_index,
                "f1": float(r.metrics.per_class_f1[klass]),
                "accuracy": float(r.metrics.accuracy),
            }
            for r in rounds
            if lo <= r.round_index <= hi
        ]
        return {"class": klass, "series": series}

    @app.get("/api/runs/{run_id}/rounds/{round_index}/signature")
    def signature(run_id: str, round_index: int):
        if _status_or_none(run_id) is None:
            return _error(404, f"unknown run {run_id}")
        path = store.run_dir(run_id) / "signatures.json"
        if not path.exists():
            return _error(404, f"round {round_index} not analyzed yet")
        docs = json.loads(path.read_text())
        for doc in docs:
            if doc.get("round") == round_index:
                return doc
        return _error(404, f"round {round_index} not analyzed yet")

    @app.get("/api/runs/{run_id}/trajectory")
    def trajectory(run_id: str):
        if _status_or_none(run_id) is None:
            return _error(404, f"unknown run {run_id}")
        path = store.run_dir(run_id) / "trajectory.json"
        if not path.exists():
            return _error(404, "trajectory not available until the run completes")
        return json.loads(path.read_text())

    @app.get("/api/runs/{run_id}/advisory")
    def advisory(run_id: str):
        if _status_or_none(run_id) is None:
            return _error(404, f"unknown run {run_id}")
        path = store.run_dir(run_id) / "advisory.json"
        if not path.exists():
            return _error(404, "advisory not available until the run completes")
        return json.loads(path.read_text())

    @app.delete("/api/runs/{run_id}", status_code=204)
    def delete_run(run_id: str):
        if _status_or_none(run_id) is None:
            return _error(404, f"unknown run {run_id}")
        if not manager.begin_delete(run_id):
            return _error(409, f"run {run_id} is already being deleted")
        try:
            store.delete_run(run_id)
        except NotFoundError:
            return _error(404, f"unknown run {run_id}")
        finally:
            manager.end_delete(run_id)
        return None

    dashboard = Path(dashboard_dir) if dashboard_dir else _default_dashboard_dir()
    if dashboard is not None and dashboard.is_dir():
        app.mount("/", StaticFiles(directory=dashboard, html=True), name="dashboard")
    else:
        @app.get("/", response_class=HTMLResponse)
        def index():
            return (
                "<html><body><h1>fedshadow</h1>"
                "<p>No dashboard build found. The JSON API lives under /api/runs.</p>"
                "</body></html>"
            )

    return app


def _default_dashboard_dir() -> Optional[Path]:
    env = os.environ.get("FEDSHADOW_DASHBOARD")
    if env:
        return Path(env)
    candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    return candidate if candidate.is_dir() else None


def resolve_port(cli_port: Optional[int]) -> int:
    if cli_port is not None:
        return cli_port
    env = os.environ.get(PORT_ENV_VAR)
    if env:
        try:
            return int(env)
        except ValueError:
            pass
    return DEFAULT_PORT


def run_server(store_root, port: Optional[int] = None, host: str = "127.0.0.1",
               dashboard_dir=None, workers: int = 1):
    import uvicorn

    app = create_app(store_root, dashboard_dir=dashboard_dir, workers=workers)
    uvicorn.run(app, host=host, port=resolve_port(port))
