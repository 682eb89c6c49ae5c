"""HTTP face of the loop runner: one live loop per process, intent intake,
state/trajectory reads, a server-sent event stream, gate approvals, and
convergence diagnostics.

The loop advances on a single worker thread (the one writer); request
handlers only read snapshots or enqueue inputs that the engine drains at
boundary points, so no request can corrupt the run.
"""

from __future__ import annotations

import json
import logging
import queue
import threading
import time
from contextlib import asynccontextmanager
from pathlib import Path
from typing import Any, Literal

from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse, PlainTextResponse, StreamingResponse
from pydantic import BaseModel

from .env import ScenarioConfig
from .intents import Intent, IntentError, parse_intent, permitted, weights_for
from .loop import (
    GateConflict,
    LoopConfig,
    LoopEngine,
    PolicyFaultBudgetExceeded,
    closed_loop_map,
    estimate_lipschitz,
)
from .policies import Policy
from .telemetry import QuantizationSpec

logger = logging.getLogger(__name__)

EVENT_QUEUE_SIZE = 4096


class KpiModel(BaseModel):
    throughput: float
    latency: float
    energy: float


class StateResponse(BaseModel):
    tick: int
    tokens: list[str]
    digest: str
    kpis: KpiModel
    utility: float | None
    active_intent: str | None


class IntentAck(BaseModel):
    accepted: bool
    objective: str
    weights: list[float]
    effective: str = "next-boundary"


class GateRequest(BaseModel):
    decision: Literal["approve", "reject"]


class GateAck(BaseModel):
    decision_id: str
    outcome: str


class PendingGateModel(BaseModel):
    decision_id: str
    commands: str
    created_tick: int


class FixedPointModel(BaseModel):
    tick: int
    state_digest: str


class DiagnosticsResponse(BaseModel):
    tick: int
    running: bool
    converged: bool
    fixed_point: FixedPointModel | None
    residuals: list[float]
    residual_tolerance: float
    lipschitz_estimate: float | None
    faults: int
    active_intent: str | None
    gate_mode: str


class LoopSession:
    """Owns the engine and the worker thread advancing it."""

    def __init__(self, engine: LoopEngine, pace_ticks_per_sec: float = 0.0):
        self.engine = engine
        self.pace = pace_ticks_per_sec
        self.lock = threading.RLock()
        self._subscribers: list[queue.Queue] = []
        self._thread: threading.Thread | None = None
        self._stop = threading.Event()
        self._lipschitz_cache: dict[str, float | None] = {}

    # ── lifecycle ─────────────────────────────────────────────────────────

    @property
    def started(self) -> bool:
        return self._thread is not None

    def start(self) -> None:
        if self._thread is not None:
            return
        self._thread = threading.Thread(target=self._worker, daemon=True, name="ranloop-worker")
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5.0)
        self._broadcast(None)

    def advance_once(self) -> bool:
        """Advance one tick and fan events out; False when the loop is done.
        The worker thread calls this; tests may drive it directly."""
        with self.lock:
            if self.engine.done:
                return False
            record = self.engine.tick_once()
            pending = self.engine.pending_gate
        self._broadcast(("record", record.to_dict()))
        if pending is not None:
            self._broadcast(
                (
                    "gate",
                    {
                        "decision_id": pending.decision_id,
                        "commands": pending.commands_text,
                        "created_tick": pending.created_tick,
                    },
                )
            )
        return True

    def _worker(self) -> None:
        try:
            while not self._stop.is_set():
                if not self.advance_once():
                    break
                if self.pace > 0:
                    time.sleep(1.0 / self.pace)
        except PolicyFaultBudgetExceeded as exc:
            logger.error("loop aborted: %s", exc)
        self._broadcast(None)

    # ── event fan-out ─────────────────────────────────────────────────────

    def subscribe(self) -> queue.Queue:
        q: queue.Queue = queue.Queue(maxsize=EVENT_QUEUE_SIZE)
        with self.lock:
            self._subscribers.append(q)
        return q

    def unsubscribe(self, q: queue.Queue) -> None:
        with self.lock:
            if q in self._subscribers:
                self._subscribers.remove(q)

    def _broadcast(self, event: tuple[str, dict] | None) -> None:
        with self.lock:
            subscribers = list(self._subscribers)
        for q in subscribers:
            try:
                q.put_nowait(event)
            except queue.Full:
                pass  # slow consumer: it resyncs via /trajectory

    # ── reads and inputs ──────────────────────────────────────────────────

    def post_intent(self, document: Any) -> Intent:
        intent = parse_intent(document)
        if not permitted(intent):
            raise IntentError("objective", "intent is not a permissible goal")
        with self.lock:
            self.engine.queue_intent(intent)
        return intent

    def lipschitz_estimate(self, pairs: int = 64) -> float | None:
        """Empirical contraction estimate of the current closed-loop map.
        Only meaningful with deterministic config-response dynamics."""
        if self.engine.scenario.mode != "config-response":
            return None
        with self.lock:
            intent = self.engine.intent
        key = repr(intent)
        if key not in self._lipschitz_cache:
            f = closed_loop_map(self.engine.policy, intent, self.engine.scenario)
            try:
                self._lipschitz_cache[key] = estimate_lipschitz(
                    f, self.engine.scenario, norm=self.engine.loop.norm, pairs=pairs
                )
            except ValueError:
                self._lipschitz_cache[key] = None
        return self._lipschitz_cache[key]


def _error(status: int, reason: str, path: str | None = None) -> JSONResponse:
    body: dict[str, Any] = {"error": {"reason": reason}}
    if path is not None:
        body["error"]["path"] = path
    return JSONResponse(status_code=status, content=body)


def create_app(
    scenario: ScenarioConfig,
    policy: Policy,
    loop_config: LoopConfig,
    intent: Intent | None = None,
    quantization: QuantizationSpec | None = None,
    pace_ticks_per_sec: float | None = None,
    autostart: bool = True,
    console_dir: str | Path | None = None,
) -> FastAPI:
    """Build the service around one live loop.

    Unlike batch runs, the served loop keeps ticking after a fixed point is
    confirmed (diagnostics reports it) so intents posted later still take
    effect; only max_ticks ends it."""
    from dataclasses import replace as _replace

    loop_config = _replace(loop_config, stop_on_convergence=False)
    engine = LoopEngine(scenario, policy, loop_config, intent, quantization)
    pace = loop_config.pace_ticks_per_sec if pace_ticks_per_sec is None else pace_ticks_per_sec
    session = LoopSession(engine, pace)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        if autostart:
            session.start()
        yield
        session.stop()

    app = FastAPI(title="ranloop", lifespan=lifespan)
    app.state.session = session

    @app.post("/intent", response_model=IntentAck, responses={400: {"description": "invalid intent"}})
    async def post_intent(request: Request):
        try:
            document = await request.json()
        except Exception:
            return _error(400, "request body is not valid JSON", "$")
        try:
            accepted = session.post_intent(document)
        except IntentError as exc:
            return _error(400, exc.reason, exc.path)
        return IntentAck(
            accepted=True,
            objective=accepted.objective,
            weights=list(weights_for(accepted).w),
        )

    @app.get("/state", response_model=StateResponse)
    def get_state():
        with session.lock:
            record = session.engine.records[-1]
            context = session.engine.context
            active = session.engine.intent
        return StateResponse(
            tick=record.tick,
            tokens=list(context.tokens),
            digest=context.digest,
            kpis=KpiModel(
                throughput=record.kpis.throughput,
                latency=record.kpis.latency,
                energy=record.kpis.energy,
            ),
            utility=record.utility,
            active_intent=active.objective if active is not None else None,
        )

    @app.get("/trajectory")
    def get_trajectory(
        from_tick: int = Query(0, alias="from", ge=0),
        limit: int = Query(10_000, ge=1, le=100_000),
    ):
        with session.lock:
            page = [
                r.to_dict()
                for r in session.engine.records
                if r.tick >= from_tick
            ][:limit]
        body = "".join(json.dumps(r) + "\n" for r in page)
        return PlainTextResponse(body, media_type="application/x-ndjson")

    @app.get("/events")
    def get_events():
        q = session.subscribe()

        def stream():
            try:
                while True:
                    try:
                        event = q.get(timeout=5.0)
                    except queue.Empty:
                        yield ": keep-alive\n\n"
                        continue
                    if event is None:
                        break
                    kind, payload = event
                    prefix = f"event: {kind}\n" if kind != "record" else ""
                    yield f"{prefix}data: {json.dumps(payload)}\n\n"
            finally:
                session.unsubscribe(q)

        return StreamingResponse(stream(), media_type="text/event-stream")

    @app.post("/gate/{decision_id}", response_model=GateAck, responses={404: {}, 409: {}})
    async def post_gate(decision_id: str, request: Request):
        try:
            body = await request.json()
            gate = GateRequest.model_validate(body)
        except Exception:
            return _error(400, "body must be {\"decision\": \"approve\"|\"reject\"}")
        if session.engine.loop.gate_mode != "manual":
            return _error(409, "manual gating is not active")
        with session.lock:
            try:
                outcome = session.engine.resolve_gate(decision_id, gate.decision == "approve")
            except GateConflict as exc:
                return _error(409, str(exc))
            except KeyError:
                return _error(404, f"no pending decision {decision_id}")
        return GateAck(decision_id=decision_id, outcome=outcome)

    @app.get("/gate", response_model=list[PendingGateModel])
    def get_gate():
        with session.lock:
            pending = session.engine.pending_gate
        if pending is None:
            return []
        return [
            PendingGateModel(
                decision_id=pending.decision_id,
                commands=pending.commands_text,
                created_tick=pending.created_tick,
            )
        ]

    @app.get("/diagnostics", response_model=DiagnosticsResponse)
    def get_diagnostics(residual_window: int = Query(50, ge=1, le=10_000)):
        with session.lock:
            engine = session.engine
            residuals = [r.residual for r in engine.records[-residual_window:]]
            fp = engine.converged_at
            tick = engine.state.tick
            faults = engine.faults
            active = engine.intent
            running = session.started and not engine.done
        return DiagnosticsResponse(
            tick=tick,
            running=running,
            converged=fp is not None,
            fixed_point=FixedPointModel(tick=fp[0], state_digest=fp[1]) if fp else None,
            residuals=residuals,
            residual_tolerance=engine.loop.residual_tolerance,
            lipschitz_estimate=session.lipschitz_estimate(),
            faults=faults,
            active_intent=active.objective if active is not None else None,
            gate_mode=engine.loop.gate_mode,
        )

    if console_dir is not None and Path(console_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/console", StaticFiles(directory=str(console_dir), html=True), name="console")

    return app
