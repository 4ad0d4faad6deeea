"""Session-oriented JSON service over the recommendation engine.

Endpoints live under /api/v1 (see docs/formats.md for payload schemas):

    POST /api/v1/datasets                 text/csv body -> dataset description
    GET  /api/v1/datasets/{id}
    POST /api/v1/sessions                 {dataset_id, seed?, ...} -> round 1
    GET  /api/v1/sessions/{id}
    GET  /api/v1/sessions/{id}/rounds/{n}
    POST /api/v1/sessions/{id}/hints/{hid}  apply hint -> next round
    POST /api/v1/sessions/{id}/kept        {round, queries}
    GET  /api/v1/sessions/{id}/graph      debug dump
    GET  /api/v1/rules

Sessions are mutated under one lock per session id; dataset and session
stores are append-only. With a data directory configured, uploads and session
event logs persist and are replayed on startup.
"""

from __future__ import annotations

import json
import re
import threading
import uuid
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional
from urllib.parse import unquote

from .errors import (
    FreezeError,
    IngestError,
    NoValidQueryError,
    SessionError,
    VizScoutError,
)
from .hints import HintConfig
from .ingest import IngestOptions, Table, load_table_text
from .reward import RewardModels
from .rules import DEFAULT_RULES
from .search import SearchConfig
from .session import Session, load_events, replay_session, start_session

MAX_UPLOAD_BYTES = 64 * 1024 * 1024


@dataclass
class ApiError(Exception):
    code: str      # bad_request | not_found | conflict | internal
    message: str
    detail: str = ""

    STATUS = {"bad_request": 400, "not_found": 404, "conflict": 409, "internal": 500}

    def to_dict(self) -> dict:
        return {"code": self.code, "message": self.message, "detail": self.detail}

    @property
    def status(self) -> int:
        return self.STATUS[self.code]


def _map_error(exc: Exception) -> ApiError:
    if isinstance(exc, ApiError):
        return exc
    if isinstance(exc, (SessionError,)):
        return ApiError("not_found", str(exc))
    if isinstance(exc, FreezeError):
        return ApiError("conflict", str(exc))
    if isinstance(exc, (IngestError, NoValidQueryError, ValueError)):
        return ApiError("bad_request", str(exc))
    if isinstance(exc, VizScoutError):
        return ApiError("bad_request", str(exc))
    return ApiError("internal", "internal error", str(exc))


class EngineState:
    """Shared stores behind the handler; all access is lock-guarded."""

    def __init__(self, data_dir=None, ui_dir=None,
                 models: Optional[RewardModels] = None):
        self.datasets: dict[str, Table] = {}
        self.sessions: dict[str, Session] = {}
        self.session_locks: dict[str, threading.Lock] = {}
        self.store_lock = threading.Lock()
        self.data_dir = Path(data_dir) if data_dir else None
        self.ui_dir = Path(ui_dir) if ui_dir else None
        self.models = models or RewardModels.default()
        if self.data_dir:
            self._restore()

    # --- persistence -------------------------------------------------------

    def _dataset_path(self, dataset_id: str) -> Path:
        return self.data_dir / "datasets" / f"{dataset_id}.csv"

    def _session_log_path(self, session_id: str) -> Path:
        return self.data_dir / "sessions" / f"{session_id}.jsonl"

    def _restore(self) -> None:
        ds_dir = self.data_dir / "datasets"
        if ds_dir.is_dir():
            for path in sorted(ds_dir.glob("*.csv")):
                text = path.read_text(encoding="utf-8")
                name_line, _, rest = text.partition("\n")
                table = load_table_text(rest, name=name_line.strip() or path.stem)
                self.datasets[path.stem] = table
        s_dir = self.data_dir / "sessions"
        if s_dir.is_dir():
            for path in sorted(s_dir.glob("*.jsonl")):
                try:
                    events = load_events(path)
                    dataset_id = events[0]["payload"].get("dataset_id")
                    table = self.datasets.get(dataset_id)
                    if table is None:
                        continue
                    session, _ = replay_session(events, table, models=self.models)
                    session.id = path.stem
                    self.sessions[path.stem] = session
                    self.session_locks[path.stem] = threading.Lock()
                except (VizScoutError, KeyError, IndexError, json.JSONDecodeError):
                    continue  # a torn log must not block startup

    # --- stores ----------------------------------------------------------------

    def add_dataset(self, text: str, name: str, delimiter: str = ",") -> tuple[str, Table]:
        table = load_table_text(text, name=name, options=IngestOptions(delimiter=delimiter))
        dataset_id = uuid.uuid4().hex[:12]
        with self.store_lock:
            self.datasets[dataset_id] = table
        if self.data_dir:
            path = self._dataset_path(dataset_id)
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(table.name + "\n" + text, encoding="utf-8")
        return dataset_id, table

    def get_dataset(self, dataset_id: str) -> Table:
        table = self.datasets.get(dataset_id)
        if table is None:
            raise ApiError("not_found", f"no dataset {dataset_id!r}")
        return table

    def create_session(self, body: dict) -> Session:
        dataset_id = body.get("dataset_id")
        if not dataset_id:
            raise ApiError("bad_request", "dataset_id is required")
        table = self.get_dataset(dataset_id)
        config = SearchConfig(
            iterations=int(body.get("iterations", 100)),
            ucb_c=float(body.get("c", 1.5)),
            explore_p0=float(body.get("p0", 0.9)),
            explore_alpha=float(body.get("alpha", 0.5)),
            top_k=int(body.get("top_k", 10)),
            seed=int(body.get("seed", 0)),
            beta=float(body.get("beta", 0.6)),
        )
        hint_config = HintConfig(
            k=int(body.get("hint_k", 9)),
            budget=int(body.get("hint_budget", 40)),
            per_hint_cap=int(body.get("per_hint_cap", 8)),
        )
        session_id = uuid.uuid4().hex[:12]
        log_path = None
        if self.data_dir:
            log_path = self._session_log_path(session_id)
            log_path.parent.mkdir(parents=True, exist_ok=True)
        session = start_session(table, config, hint_config, DEFAULT_RULES,
                                self.models, session_id=session_id, log_path=log_path)
        if log_path:  # stamp the dataset id into the start event for replay
            events = load_events(log_path)
            events[0]["payload"]["dataset_id"] = dataset_id
            with open(log_path, "w", encoding="utf-8") as fh:
                for e in events:
                    fh.write(json.dumps(e, sort_keys=True) + "\n")
        session.dataset_id = dataset_id
        with self.store_lock:
            self.sessions[session.id] = session
            self.session_locks[session.id] = threading.Lock()
        return session

    def get_session(self, session_id: str) -> tuple[Session, threading.Lock]:
        session = self.sessions.get(session_id)
        if session is None:
            raise ApiError("not_found", f"no session {session_id!r}")
        return session, self.session_locks[session_id]


def _round_payload(session: Session, record) -> dict:
    payload = record.to_payload(include_specs=True)
    payload["session_id"] = session.id
    payload["constraints"] = session.constraints_payload()
    payload["mark_rules"] = session.rule_set.mark_requirements()
    return payload


_ROUTES = [
    ("POST", re.compile(r"^/api/v1/datasets$"), "create_dataset"),
    ("GET", re.compile(r"^/api/v1/datasets/(?P<dataset_id>[\w-]+)$"), "get_dataset"),
    ("POST", re.compile(r"^/api/v1/sessions$"), "create_session"),
    ("GET", re.compile(r"^/api/v1/sessions/(?P<session_id>[\w-]+)$"), "get_session"),
    ("GET", re.compile(r"^/api/v1/sessions/(?P<session_id>[\w-]+)/rounds/(?P<n>\d+)$"),
     "get_round"),
    ("POST", re.compile(r"^/api/v1/sessions/(?P<session_id>[\w-]+)/hints/(?P<hint_id>[^/]+)$"),
     "apply_hint"),
    ("POST", re.compile(r"^/api/v1/sessions/(?P<session_id>[\w-]+)/kept$"), "record_kept"),
    ("POST", re.compile(r"^/api/v1/sessions/(?P<session_id>[\w-]+)/reset-constraints$"),
     "reset_constraints"),
    ("GET", re.compile(r"^/api/v1/sessions/(?P<session_id>[\w-]+)/graph$"), "get_graph"),
    ("GET", re.compile(r"^/api/v1/rules$"), "get_rules"),
]

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".mjs": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json",
    ".svg": "image/svg+xml",
    ".png": "image/png",
    ".ico": "image/x-icon",
}


class EngineHandler(BaseHTTPRequestHandler):
    state: EngineState  # assigned by make_server
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # quiet by default; tests parse stdout
        pass

    # --- plumbing ----------------------------------------------------------

    def _send_json(self, status: int, doc: dict) -> None:
        body = json.dumps(doc).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _send_error(self, err: ApiError) -> None:
        self._send_json(err.status, err.to_dict())

    def _read_body(self) -> bytes:
        length = int(self.headers.get("Content-Length", 0))
        if length > MAX_UPLOAD_BYTES:
            raise ApiError("bad_request", "request body too large")
        return self.rfile.read(length) if length else b""

    def _read_json(self) -> dict:
        raw = self._read_body()
        if not raw:
            return {}
        try:
            doc = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ApiError("bad_request", "body is not valid JSON", str(exc)) from exc
        if not isinstance(doc, dict):
            raise ApiError("bad_request", "body must be a JSON object")
        return doc

    def _dispatch(self, method: str) -> None:
        path = self.path.split("?", 1)[0]
        for verb, pattern, name in _ROUTES:
            if verb != method:
                continue
            m = pattern.match(path)
            if m:
                params = {k: unquote(v) for k, v in m.groupdict().items()}
                try:
                    getattr(self, f"_h_{name}")(**params)
                except Exception as exc:  # noqa: BLE001 - boundary translation
                    self._send_error(_map_error(exc))
                return
        if method == "GET" and self.state.ui_dir and not path.startswith("/api/"):
            self._serve_static(path)
            return
        self._send_error(ApiError("not_found", f"no route for {method} {path}"))

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    # --- handlers -------------------------------------------------------------

    def _h_create_dataset(self):
        raw = self._read_body()
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ApiError("bad_request", "dataset must be UTF-8 text") from exc
        name = self.headers.get("X-Dataset-Name", "upload")
        delimiter = "\t" if "tab" in (self.headers.get("X-Delimiter") or "") else ","
        dataset_id, table = self.state.add_dataset(text, name, delimiter)
        doc = table.to_description()
        doc["dataset_id"] = dataset_id
        self._send_json(201, doc)

    def _h_get_dataset(self, dataset_id: str):
        table = self.state.get_dataset(dataset_id)
        doc = table.to_description()
        doc["dataset_id"] = dataset_id
        self._send_json(200, doc)

    def _h_create_session(self):
        body = self._read_json()
        session = self.state.create_session(body)
        self._send_json(201, _round_payload(session, session.history[-1]))

    def _h_get_session(self, session_id: str):
        session, _ = self.state.get_session(session_id)
        current = session.history[-1]
        self._send_json(200, {
            "session_id": session.id,
            "dataset_id": getattr(session, "dataset_id", None),
            "round": current.number,
            "rounds": [r.number for r in session.history],
            "current": _round_payload(session, current),
            "kept_union": session.kept_union(),
        })

    def _h_get_round(self, session_id: str, n: str):
        session, _ = self.state.get_session(session_id)
        record = next((r for r in session.history if r.number == int(n)), None)
        if record is None:
            raise ApiError("not_found", f"session has no round {n}")
        self._send_json(200, _round_payload(session, record))

    def _h_apply_hint(self, session_id: str, hint_id: str):
        session, lock = self.state.get_session(session_id)
        with lock:
            record = session.apply_hint(hint_id)
            self._send_json(200, _round_payload(session, record))

    def _h_record_kept(self, session_id: str):
        body = self._read_json()
        session, lock = self.state.get_session(session_id)
        with lock:
            session.record_kept(int(body.get("round", 0)), list(body.get("queries", [])))
        self._send_json(200, {"ok": True, "kept_union": session.kept_union()})

    def _h_reset_constraints(self, session_id: str):
        session, lock = self.state.get_session(session_id)
        with lock:
            record = session.reset_constraints()
            self._send_json(200, _round_payload(session, record))

    def _h_get_rules(self):
        self._send_json(200, {
            "rules": DEFAULT_RULES.describe(),
            "mark_rules": DEFAULT_RULES.mark_requirements(),
        })

    def _h_get_graph(self, session_id: str):
        session, _ = self.state.get_session(session_id)
        self._send_json(200, session.graph.dump())

    # --- static UI ---------------------------------------------------------------

    def _serve_static(self, path: str) -> None:
        rel = path.lstrip("/") or "index.html"
        target = (self.state.ui_dir / rel).resolve()
        root = self.state.ui_dir.resolve()
        if root not in target.parents and target != root:
            self._send_error(ApiError("not_found", "outside ui root"))
            return
        if target.is_dir():
            target = target / "index.html"
        if not target.is_file():
            target = root / "index.html"  # single-page fallback
            if not target.is_file():
                self._send_error(ApiError("not_found", f"no file for {path}"))
                return
        body = target.read_bytes()
        self.send_response(200)
        ctype = _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


def make_server(host: str = "127.0.0.1", port: int = 0,
                state: Optional[EngineState] = None) -> ThreadingHTTPServer:
    """Bind a threading HTTP server; port 0 picks an ephemeral port."""
    state = state or EngineState()
    handler = type("BoundEngineHandler", (EngineHandler,), {"state": state})
    return ThreadingHTTPServer((host, port), handler)


def serve(host: str, port: int, state: Optional[EngineState] = None) -> None:
    """Run until interrupted."""
    httpd = make_server(host, port, state)
    try:
        httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        httpd.shutdown()
        httpd.server_close()
