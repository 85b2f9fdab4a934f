"""Live state/instruction gateway for the web console.

One asyncio loop owns everything: a driver task advances the world at the
configured rate (each tick is 0.1 s of simulated time) and fans frames out
to every websocket client; HTTP handlers run between ticks on the same
loop, so instruction submission needs no extra locking and flows through
the exact same executor path the CLI harness uses.
"""

from __future__ import annotations

import asyncio
from contextlib import asynccontextmanager

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect

from .clock import ScriptedClock
from .executor import ConflictPendingError, ParamStore, ReconfigExecutor
from .harness import STAGE_INDEX, _trace_from_executor_event, _trace_event, make_provider
from .assets import shipped_kb_index, shipped_rule_base
from .autoir import serialize_autoir, validate_program
from .registry import shipped_registry
from .sim.scenarios import load_scenario, scenario_names
from .sim.simulator import DT
from .translation.pipeline import TranslationFailedError, TranslationPipeline


class GatewayHub:
    """World, executor, pipeline, per-request traces, and frame fan-out."""

    def __init__(self, scenario: str, provider: str = "mock", tick_hz: float = 10.0):
        self.tick_period = 1.0 / tick_hz
        self.provider_name = provider
        self.clients: set[asyncio.Queue] = set()
        self._request_counter = 0
        self.reset(scenario)

    def reset(self, scenario: str) -> None:
        self.scenario_name = scenario
        self.sim = load_scenario(scenario)
        self.clock = ScriptedClock()
        self.registry = shipped_registry()
        self.rule_base = shipped_rule_base()
        self.store = ParamStore(self.registry, self.clock, backend=self.sim.param_backend())
        self.executor = ReconfigExecutor(self.store, self.rule_base,
                                         self.sim.vehicle_status, self.clock)
        self.pipeline = TranslationPipeline(shipped_kb_index(),
                                            make_provider(self.provider_name),
                                            self.registry)
        self.traces: dict[str, list[dict]] = {}
        self._request_by_executor_id: dict[str, str] = {}
        self.tick = 0

    # -- driver ---------------------------------------------------------------

    def tick_once(self) -> dict:
        self.clock.advance(DT)
        self.sim.step(DT)
        self.executor.tick()
        fresh = []
        for ev in self.executor.drain_events():
            request_id = self._request_by_executor_id.get(ev.instruction_id)
            for event in _trace_from_executor_event(ev):
                if request_id is not None:
                    event["data"]["request_id"] = request_id
                    self.traces[request_id].append(event)
                fresh.append(event)
        frame = self._frame(fresh)
        self.tick += 1
        dead = []
        for queue in self.clients:
            try:
                queue.put_nowait(frame)
            except asyncio.QueueFull:
                dead.append(queue)
        for queue in dead:
            self.clients.discard(queue)
        return frame

    def _frame(self, events: list[dict]) -> dict:
        status = self.sim.vehicle_status()
        world = self.sim.world_state()
        return {
            "type": "frame",
            "seq": self.tick,
            "time": world.time,
            "scenario": self.scenario_name,
            "vehicle": {"lane_id": world.lane_id, "offset": world.offset,
                        "speed": world.speed, "target_speed": world.target_speed},
            "lights": dict(world.lights),
            "motion_state": status.motion_state,
            "stop_reason": status.stop_reason,
            "perceptions": sorted(status.perceptions),
            "overrides": self.executor.active_overrides(),
            "events": events,
        }

    # -- instruction path -----------------------------------------------------

    def submit_instruction(self, text: str) -> str:
        self._request_counter += 1
        request_id = f"req-{self._request_counter:04d}"
        trace: list[dict] = []
        self.traces[request_id] = trace
        now = self.clock.now()
        trace.append(_trace_event("injected", now, {"text": text}))
        verdict = self.pipeline.classify(text)
        trace.append(_trace_event("relevance", now, {
            "relevant": verdict.relevant, "rationale": verdict.rationale,
        }))
        if not verdict.relevant:
            return request_id
        retrieved = self.pipeline.retrieve(text)
        trace.append(_trace_event("retrieval", now, {
            "results": [{"entry_id": e.entry_id, "score": s} for e, s in retrieved],
        }))
        try:
            program = self.pipeline.generate(text, retrieved=retrieved)
        except TranslationFailedError as exc:
            trace.append(_trace_event("generation", now, {"error": str(exc),
                                                          "attempts": exc.attempts}))
            return request_id
        autoir_text = serialize_autoir(program)
        trace.append(_trace_event("generation", now, {"autoir": autoir_text}))
        report = validate_program(program, self.registry)
        trace.append(_trace_event("program_validation", now, {
            "ok": report.ok,
            "issues": [{"code": i.code, "message": i.message} for i in report.issues],
        }))
        if not report.ok:
            return request_id
        try:
            executor_id = self.executor.submit(program)
        except ConflictPendingError as exc:
            trace.append(_trace_event("decision", now,
                                      {"activated": False, "conflict": str(exc)}))
            return request_id
        self._request_by_executor_id[executor_id] = request_id
        for ev in self.executor.drain_events():
            for event in _trace_from_executor_event(ev):
                event["data"]["request_id"] = request_id
                trace.append(event)
        return request_id


def create_app(scenario: str = "malfunctioning_traffic_light", provider: str = "mock",
               tick_hz: float = 10.0, static_dir: str | None = None) -> FastAPI:
    hub = GatewayHub(scenario, provider=provider, tick_hz=tick_hz)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        task = asyncio.create_task(_drive(hub))
        try:
            yield
        finally:
            task.cancel()

    app = FastAPI(title="flexlane gateway", lifespan=lifespan)
    app.state.hub = hub

    @app.get("/api/scenarios")
    async def list_scenarios():
        return {"scenarios": scenario_names(), "active": hub.scenario_name}

    @app.post("/api/scenario")
    async def select_scenario(body: dict):
        name = body.get("name") if isinstance(body, dict) else None
        if not isinstance(name, str) or name not in scenario_names():
            raise HTTPException(status_code=400, detail=[{
                "path": "name", "issue": f"expected one of {scenario_names()}",
            }])
        hub.reset(name)
        return {"active": hub.scenario_name}

    @app.get("/api/world")
    async def world():
        return {
            "scenario": hub.scenario_name,
            "map": hub.sim.lane_map.to_dict(),
            "route_lane": hub.sim.route_lane,
            "stage_index": STAGE_INDEX,
        }

    @app.post("/api/instruction")
    async def instruction(body: dict):
        text = body.get("text") if isinstance(body, dict) else None
        if not isinstance(text, str) or not text.strip():
            raise HTTPException(status_code=400, detail=[{
                "path": "text", "issue": "non-empty instruction text required",
            }])
        request_id = hub.submit_instruction(text.strip())
        return {"id": request_id, "events": hub.traces[request_id]}

    @app.get("/api/trace/{request_id}")
    async def trace(request_id: str):
        events = hub.traces.get(request_id)
        if events is None:
            raise HTTPException(status_code=404, detail=f"unknown instruction {request_id!r}")
        return {"id": request_id, "events": events}

    @app.websocket("/ws/state")
    async def ws_state(websocket: WebSocket):
        await websocket.accept()
        queue: asyncio.Queue = asyncio.Queue(maxsize=4096)
        hub.clients.add(queue)
        try:
            while True:
                frame = await queue.get()
                await websocket.send_json(frame)
        except WebSocketDisconnect:
            pass
        finally:
            hub.clients.discard(queue)

    if static_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="console")

    return app


async def _drive(hub: GatewayHub) -> None:
    while True:
        hub.tick_once()
        await asyncio.sleep(hub.tick_period)
