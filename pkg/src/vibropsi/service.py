"""HTTP/JSON session service: lifecycle, live state, records.

The console (or any client) drives sessions exclusively through this API.
The pending trial's correct answer is never serialized before the response
arrives.  Finished records are persisted under the TSID; in-flight sessions
found after a restart are marked ABORTED, never resumed.
"""

from __future__ import annotations

import asyncio
import json
import os
import threading
import time
import uuid
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse, Response, StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, ConfigDict, Field

from . import bape
from .apparatus import (
    AlignmentFailedError,
    ApparatusError,
    FaultProfile,
    SimulatedApparatus,
    Task,
)
from .protocol import (
    SCHEMA_VERSION,
    Phase,
    Session,
    SessionConfig,
    dump_record,
    load_record,
    record_path,
)

ENV_DATA_DIR = "VIBROPSI_DATA_DIR"
ENV_BIND = "VIBROPSI_BIND"
ENV_APPARATUS = "VIBROPSI_APPARATUS"


class ServiceSettings:
    """Config-file values with environment-variable overrides."""

    def __init__(self, data_dir="./vibropsi-data", bind="127.0.0.1:8750",
                 apparatus="simulator"):
        self.data_dir = Path(os.environ.get(ENV_DATA_DIR, data_dir))
        self.bind = os.environ.get(ENV_BIND, bind)
        self.apparatus = os.environ.get(ENV_APPARATUS, apparatus)

    @classmethod
    def from_file(cls, path) -> "ServiceSettings":
        cfg = json.loads(Path(path).read_text()).get("service", {})
        return cls(**{k: v for k, v in cfg.items()
                      if k in ("data_dir", "bind", "apparatus")})


class CreateSessionRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    tsid: str
    task: str
    trials_per_block: int = 50
    seed: int = 0
    first_orientation: str = "RANDOM"
    reveal_feedback: bool = False
    mean_duty: float = 80.0
    session_id: str | None = None
    apparatus: str | None = None  # override backend: simulator|<fault kind>


class SubmitResponseRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    response: str
    client_timestamp_ms: float | None = None


class SessionRuntime:
    def __init__(self, session: Session):
        self.session = session
        self.lock = threading.Lock()
        self.created_at = time.time()
        self.stimulus_wall_time = time.monotonic()
        self.subscribers: list[asyncio.Queue] = []


def _build_apparatus(backend: str, seed: int):
    if backend in (None, "", "simulator"):
        return SimulatedApparatus(seed=seed + 1)
    if backend in ("no_contact", "force_drift", "separation_stick"):
        return SimulatedApparatus(seed=seed + 1, fault=FaultProfile(kind=backend))
    raise ValueError(f"unknown apparatus backend {backend!r}")


def _handle_doc(sid: str, rt: SessionRuntime) -> dict:
    s = rt.session
    return {
        "schema_version": SCHEMA_VERSION,
        "session_id": sid,
        "tsid": s.config.tsid,
        "created_at": rt.created_at,
        "phase": s.phase.value,
        "trial_counter": len(s.history),
    }


def _live_doc(sid: str, rt: SessionRuntime) -> dict:
    s = rt.session
    curve = bape.postmean_curve(s.posterior, s.candidates.separations)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "session_id": sid,
        "tsid": s.config.tsid,
        "phase": s.phase.value,
        "task": s.config.task.value,
        "block": s.block,
        "orientation": s.orientation.value,
        "options": list(s.options),
        "trial_counter": len(s.history),
        "total_trials": s.config.total_trials,
        "entropy": s.entropy_trace[-1],
        "entropy_trace": list(s.entropy_trace),
        "trials": [
            {
                "index": t.index,
                "block": t.block,
                "orientation": t.orientation.value,
                "separation_mm": t.separation,
                "correct": t.correct,
                "response_time_ms": t.response_time,
            }
            for t in s.history
        ],
        "postmean": {
            "params_expectation": bape.expected_params(s.posterior),
            "curve_samples": {
                "x_mm": curve.x_values.tolist(),
                "y": curve.y_values.tolist(),
            },
        },
        "marginals": bape.marginals(s.posterior),
        "bias": _running_bias(s),
    }
    if s.phase is Phase.AWAITING_RESPONSE and s._pending is not None:
        # deliberately no target field here
        doc["pending"] = {
            "separation_mm": s._pending.separation,
            "orientation": s._pending.orientation.value,
            "options": list(s.options),
        }
    return doc


def _running_bias(session: Session) -> dict:
    from .stats import run_bias_guard

    report = run_bias_guard(session.history)
    return report.to_dict()


def _mark_stale_inflight(data_dir: Path):
    """Turn leftover in-flight markers into ABORTED records on startup."""
    for marker in data_dir.glob("*/*.inflight.json"):
        stub = json.loads(marker.read_text())
        stub["phase"] = Phase.ABORTED.value
        stub["abort_reason"] = "service restart"
        final = marker.with_name(marker.name.replace(".inflight.json", ".json"))
        if not final.exists():
            final.write_text(dump_record(stub))
        marker.unlink()


def create_app(settings: ServiceSettings | None = None) -> FastAPI:
    settings = settings or ServiceSettings()
    settings.data_dir.mkdir(parents=True, exist_ok=True)
    _mark_stale_inflight(settings.data_dir)

    app = FastAPI(title="vibropsi service")
    sessions: dict[str, SessionRuntime] = {}
    app.state.settings = settings
    app.state.sessions = sessions

    def _get(sid: str) -> SessionRuntime:
        rt = sessions.get(sid)
        if rt is None:
            raise HTTPException(404, detail={"error": "UNKNOWN_SESSION",
                                             "session_id": sid})
        return rt

    def _inflight_marker(session: Session) -> Path:
        p = record_path(settings.data_dir, session.config.tsid, session.session_id)
        return p.with_name(p.stem + ".inflight.json")

    def _notify(rt: SessionRuntime, event: dict):
        for q in list(rt.subscribers):
            try:
                q.put_nowait(event)
            except asyncio.QueueFull:
                pass

    @app.get("/health")
    def health():
        return {"status": "ok", "schema_version": SCHEMA_VERSION}

    @app.post("/sessions", status_code=201)
    def create_session(req: CreateSessionRequest):
        try:
            config = SessionConfig(
                task=Task(req.task),
                tsid=req.tsid,
                trials_per_block=req.trials_per_block,
                seed=req.seed,
                first_orientation=req.first_orientation,
                reveal_feedback=req.reveal_feedback,
                mean_duty=req.mean_duty,
                session_id=req.session_id or f"{req.tsid}-{uuid.uuid4().hex[:8]}",
            )
            apparatus = _build_apparatus(req.apparatus or settings.apparatus,
                                         req.seed)
        except ValueError as exc:
            raise HTTPException(422, detail={"error": "VALIDATION", "message": str(exc)})
        try:
            session = Session(config, apparatus)
        except AlignmentFailedError as exc:
            raise HTTPException(409, detail={"error": "ALIGNMENT_FAILED",
                                             "report": exc.report.to_dict()})
        except ApparatusError as exc:
            raise HTTPException(502, detail={"error": "APPARATUS_UNREACHABLE",
                                             "message": str(exc)})
        sid = session.session_id
        if sid in sessions:
            raise HTTPException(409, detail={"error": "DUPLICATE_SESSION_ID"})
        rt = SessionRuntime(session)
        sessions[sid] = rt
        marker = _inflight_marker(session)
        marker.parent.mkdir(parents=True, exist_ok=True)
        marker.write_text(dump_record(session.to_record()))
        session.begin_trial()
        rt.stimulus_wall_time = time.monotonic()
        return _handle_doc(sid, rt)

    @app.post("/sessions/{sid}/response")
    def submit_response(sid: str, req: SubmitResponseRequest):
        rt = _get(sid)
        with rt.lock:
            s = rt.session
            if s.phase is not Phase.AWAITING_RESPONSE:
                raise HTTPException(409, detail={"error": "WRONG_PHASE",
                                                 "phase": s.phase.value})
            # response time measured server-side, stimulus-complete to now;
            # the transport delay caveat is documented in the README
            rt_ms = (time.monotonic() - rt.stimulus_wall_time) * 1000.0
            try:
                record = s.submit_response(req.response, rt_ms)
            except ValueError as exc:
                raise HTTPException(422, detail={"error": "VALIDATION",
                                                 "message": str(exc)})
            result = {
                "schema_version": SCHEMA_VERSION,
                "trial_index": record.index,
                "phase": s.phase.value,
                "trial_counter": len(s.history),
                "total_trials": s.config.total_trials,
            }
            if s.config.reveal_feedback:
                result["correct"] = record.correct
            if s.phase is Phase.REORIENTING:
                s.advance_block()
                result["phase"] = s.phase.value
                result["orientation"] = s.orientation.value
            if s.phase is Phase.COMPLETE:
                s.finalize(settings.data_dir)
                result["phase"] = s.phase.value
                _inflight_marker(s).unlink(missing_ok=True)
            elif s.phase is Phase.BETWEEN_TRIALS:
                s.begin_trial()
                rt.stimulus_wall_time = time.monotonic()
            _notify(rt, {"event": "trial_completed", "trial_index": record.index,
                         "phase": s.phase.value})
            return result

    @app.get("/sessions/{sid}/live")
    def live(sid: str):
        rt = _get(sid)
        with rt.lock:
            return _live_doc(sid, rt)

    @app.get("/sessions/{sid}/events")
    async def events(sid: str):
        rt = _get(sid)
        queue: asyncio.Queue = asyncio.Queue(maxsize=256)
        rt.subscribers.append(queue)

        async def stream():
            try:
                while True:
                    try:
                        event = await asyncio.wait_for(queue.get(), timeout=15.0)
                        yield f"data: {json.dumps(event)}\n\n"
                    except asyncio.TimeoutError:
                        yield ": keep-alive\n\n"
            finally:
                rt.subscribers.remove(queue)

        return StreamingResponse(stream(), media_type="text/event-stream")

    @app.get("/sessions/{sid}")
    def get_session(sid: str):
        rt = _get(sid)
        return _handle_doc(sid, rt)

    @app.post("/sessions/{sid}/abort")
    def abort(sid: str):
        rt = _get(sid)
        with rt.lock:
            s = rt.session
            if s.phase in (Phase.COMPLETE, Phase.EXCLUDED, Phase.ABORTED):
                raise HTTPException(409, detail={"error": "WRONG_PHASE",
                                                 "phase": s.phase.value})
            s.abort(settings.data_dir, reason="operator abort")
            _inflight_marker(s).unlink(missing_ok=True)
            _notify(rt, {"event": "aborted"})
            return _handle_doc(sid, rt)

    @app.get("/sessions/{sid}/record")
    def record(sid: str):
        rt = _get(sid)
        path = record_path(settings.data_dir, rt.session.config.tsid,
                           rt.session.session_id)
        if not path.exists():
            raise HTTPException(404, detail={"error": "NO_RECORD",
                                             "phase": rt.session.phase.value})
        return Response(content=path.read_text(), media_type="application/json")

    @app.get("/sessions")
    def list_sessions(tsid: str | None = None, phase: str | None = None,
                      offset: int = 0, limit: int = 100):
        summaries = []
        for path in sorted(settings.data_dir.glob("*/*.json")):
            if path.name.endswith(".inflight.json"):
                continue
            rec = load_record(path)
            if tsid and rec.get("tsid") != tsid:
                continue
            if phase and rec.get("phase") != phase:
                continue
            summaries.append({
                "session_id": rec["session_id"],
                "tsid": rec["tsid"],
                "phase": rec["phase"],
                "trial_count": len(rec.get("trials", [])),
            })
        return {
            "schema_version": SCHEMA_VERSION,
            "total": len(summaries),
            "sessions": summaries[offset:offset + limit],
        }

    console_dir = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if console_dir.is_dir():
        app.mount("/console", StaticFiles(directory=console_dir, html=True),
                  name="console")

    return app


def run(settings: ServiceSettings | None = None):
    import uvicorn

    settings = settings or ServiceSettings()
    host, _, port = settings.bind.partition(":")
    uvicorn.run(create_app(settings), host=host or "127.0.0.1",
                port=int(port or 8750))
