"""Scenario runs, dataset evaluation, benchmarking, and rule recording.

run_scenario wires the whole stack over the bus: the simulator publishes
status, the injected utterance flows through translation onto the
instruction topics, and the executor applies validated overrides. Every run
produces a self-contained transcript (trace + per-tick states + outcome)
whose success flags can be recomputed offline from the recorded data alone.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

from .assets import shipped_kb_index, shipped_manual_entries, shipped_rule_base
from .autoir import (
    AutoIRError,
    AutoIRProgram,
    parse_autoir,
    serialize_autoir,
    validate_program,
)
from .bus import MessageBus
from .clock import ScriptedClock
from .executor import ConflictPendingError, ParamStore, ReconfigExecutor
from .registry import shipped_registry
from .rules import (
    LatencyStats,
    Rule,
    RuleBase,
    VehicleStatus,
    bench_rule_matching,
)
from .sim.scenarios import ScenarioSpec, load_scenario
from .sim.simulator import DT, Simulator
from .topics import (
    TOPIC_AUTOIR,
    TOPIC_USER_INSTRUCTION,
    declare_instruction_topics,
    declare_status_topics,
    register_schemas,
)
from .translation.knowledge import build_index, load_knowledge_dir, load_manual_chunks
from .translation.pipeline import TranslationFailedError, TranslationPipeline
from .translation.providers import HttpProvider, MockProvider, Provider

STAGE_INDEX = {
    "injected": 0,
    "relevance": 1,
    "retrieval": 2,
    "generation": 3,
    "program_validation": 4,
    "rule_match": 5,
    "decision": 6,
    "override": 7,
    "expiry": 8,
}


class InputError(Exception):
    """Bad operator input (maps to CLI exit code 3)."""


class BadDatasetError(InputError):
    pass


class InjectionNeverReachedError(Exception):
    pass


def make_provider(name: str) -> Provider:
    if name == "mock":
        return MockProvider()
    if name == "http":
        return HttpProvider()
    raise InputError(f"unknown provider {name!r} (expected mock or http)")


# ---------------------------------------------------------------------------
# scenario runs


@dataclass
class RunTranscript:
    scenario: str
    instruction: str | None
    provider: str
    horizon: float
    dt: float
    trace: list[dict] = field(default_factory=list)
    states: list[dict] = field(default_factory=list)
    outcome: dict = field(default_factory=dict)
    success_spec: list[dict] = field(default_factory=list)
    change_log: list[dict] = field(default_factory=list)
    program_text: str | None = None
    wall_seconds: float = 0.0

    @property
    def success(self) -> bool:
        return bool(self.outcome.get("success"))

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "instruction": self.instruction,
            "provider": self.provider,
            "horizon": self.horizon,
            "dt": self.dt,
            "trace": self.trace,
            "states": self.states,
            "outcome": self.outcome,
            "success_spec": self.success_spec,
            "change_log": self.change_log,
            "program_text": self.program_text,
            "wall_seconds": self.wall_seconds,
        }

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True),
                              encoding="utf-8")


class _InjectionTracker:
    """Decides when the scripted utterance goes onto the instruction topic."""

    def __init__(self, injection: dict | None):
        self.injection = injection or {"type": "time", "t": 1.0}
        self._stopped_since: float | None = None

    def due(self, now: float, sim: Simulator, status: VehicleStatus) -> bool:
        kind = self.injection.get("type")
        if status.motion_state == "Stopped":
            if self._stopped_since is None:
                self._stopped_since = now
        else:
            self._stopped_since = None
        if kind == "time":
            return now >= float(self.injection["t"]) - 1e-9
        if kind == "stopped_for":
            return (self._stopped_since is not None
                    and now - self._stopped_since >= float(self.injection["seconds"]) - 1e-9)
        if kind == "obstacle_within":
            limit = float(self.injection["meters"])
            for obs in sim.lane_map.obstacles_in(sim.lane_id):
                if 0.0 < obs.offset - sim.offset <= limit:
                    return True
            return False
        if kind == "perception":
            return self.injection["tag"] in status.perceptions
        raise InputError(f"unknown injection condition {kind!r}")


def _status_dict(status: VehicleStatus) -> dict:
    return {
        "motion_state": status.motion_state,
        "speed": status.speed,
        "perceptions": sorted(status.perceptions),
        "stop_reason": status.stop_reason,
    }


def _trace_event(stage: str, t: float, data: dict) -> dict:
    return {"stage": stage, "stage_index": STAGE_INDEX[stage], "t": t, "data": data}


def _trace_from_executor_event(ev) -> list[dict]:
    kind, data = ev.kind, dict(ev.data)
    data["instruction_id"] = ev.instruction_id
    if kind == "rule_found":
        return [_trace_event("rule_match", ev.t, {"found": True, **data})]
    if kind == "rejected":
        events = []
        if data.get("reason") == "NoRule":
            events.append(_trace_event("rule_match", ev.t,
                                       {"found": False, "instruction_id": ev.instruction_id}))
        events.append(_trace_event("decision", ev.t, {"activated": False, **data}))
        return events
    if kind == "activated":
        return [
            _trace_event("decision", ev.t,
                         {"activated": True, "instruction_id": ev.instruction_id,
                          "effective_timer": data.get("effective_timer")}),
            _trace_event("override", ev.t, data),
        ]
    if kind == "restored":
        return [_trace_event("expiry", ev.t, {"restored": True, **data})]
    if kind == "expired":
        return [_trace_event("expiry", ev.t, {"expired": True, **data})]
    if kind == "failed":
        return [_trace_event("decision", ev.t, {"activated": False, "failed": True, **data})]
    if kind == "cancelled":
        return [_trace_event("expiry", ev.t, {"cancelled": True, **data})]
    return []  # submitted and other bookkeeping


def run_scenario(scenario: str | Path, instruction: str | None = None,
                 provider: str = "mock", horizon: float | None = None,
                 kb: str = "curated") -> RunTranscript:
    """Run one scenario to its horizon, optionally injecting an utterance."""
    wall_start = time.perf_counter()
    sim = load_scenario(scenario)
    spec: ScenarioSpec = sim.scenario
    run_horizon = float(horizon) if horizon is not None else spec.horizon

    clock = ScriptedClock()
    bus = MessageBus(timestamper=clock.now)
    register_schemas(bus)
    declare_instruction_topics(bus)
    declare_status_topics(bus)
    registry = shipped_registry()
    rule_base = shipped_rule_base()
    store = ParamStore(registry, clock, backend=sim.param_backend())
    executor = ReconfigExecutor(store, rule_base, sim.vehicle_status, clock)
    pipeline = TranslationPipeline(_kb_index_for(kb), make_provider(provider), registry)
    sub_instruction = bus.subscribe(TOPIC_USER_INSTRUCTION)
    sub_autoir = bus.subscribe(TOPIC_AUTOIR)

    transcript = RunTranscript(
        scenario=spec.name, instruction=instruction, provider=provider,
        horizon=run_horizon, dt=DT,
        success_spec=list(spec.success_with if instruction else spec.success_without),
    )
    tracker = _InjectionTracker(spec.injection)
    injected = False
    ticks = round(run_horizon / DT)

    for _ in range(ticks):
        clock.advance(DT)
        sim.step(DT)
        sim.publish_status(bus)
        status = sim.vehicle_status()
        now = clock.now()

        if instruction and not injected and tracker.due(now, sim, status):
            bus.publish(TOPIC_USER_INSTRUCTION, {"text": instruction}, publisher="operator")
            injected = True
            transcript.trace.append(_trace_event("injected", now, {"text": instruction}))

        for envelope in sub_instruction.drain():
            _translate(envelope.payload["text"], pipeline, bus, transcript, now)

        for envelope in sub_autoir.drain():
            _execute(envelope.payload["text"], registry, executor, transcript, now)

        executor.tick()
        for ev in executor.drain_events():
            transcript.trace.extend(_trace_from_executor_event(ev))

        transcript.states.append({
            "t": now,
            "world": sim.world_state().to_dict(),
            "status": _status_dict(sim.vehicle_status()),
            "overrides": executor.active_overrides(),
        })

    transcript.outcome = evaluate_outcome(transcript.success_spec,
                                          transcript.states, transcript.trace)
    transcript.change_log = [entry.to_dict() for entry in store.change_log()]
    transcript.wall_seconds = time.perf_counter() - wall_start
    return transcript


def _translate(text: str, pipeline: TranslationPipeline, bus: MessageBus,
               transcript: RunTranscript, now: float) -> None:
    verdict = pipeline.classify(text)
    transcript.trace.append(_trace_event("relevance", now, {
        "relevant": verdict.relevant, "rationale": verdict.rationale,
    }))
    if not verdict.relevant:
        return
    retrieved = pipeline.retrieve(text)
    transcript.trace.append(_trace_event("retrieval", now, {
        "results": [{"entry_id": entry.entry_id, "score": score}
                    for entry, score in retrieved],
    }))
    try:
        program = pipeline.generate(text, retrieved=retrieved)
    except TranslationFailedError as exc:
        transcript.trace.append(_trace_event("generation", now, {
            "error": str(exc), "attempts": exc.attempts,
        }))
        return
    autoir_text = serialize_autoir(program)
    transcript.trace.append(_trace_event("generation", now, {"autoir": autoir_text}))
    bus.publish(TOPIC_AUTOIR, {"text": autoir_text}, publisher="translator")


def _execute(autoir_text: str, registry, executor: ReconfigExecutor,
             transcript: RunTranscript, now: float) -> None:
    try:
        program = parse_autoir(autoir_text)
    except AutoIRError as exc:
        transcript.trace.append(_trace_event("program_validation", now,
                                             {"ok": False, "error": str(exc)}))
        return
    report = validate_program(program, registry)
    transcript.trace.append(_trace_event("program_validation", now, {
        "ok": report.ok,
        "issues": [{"code": i.code, "message": i.message} for i in report.issues],
    }))
    if not report.ok:
        return
    transcript.program_text = serialize_autoir(program)
    try:
        executor.submit(program)
    except ConflictPendingError as exc:
        transcript.trace.append(_trace_event("decision", now,
                                             {"activated": False, "conflict": str(exc)}))


def _kb_index_for(kb: str | Path):
    if kb == "curated":
        return shipped_kb_index()
    if kb == "manual":
        return build_index(shipped_manual_entries())
    path = Path(kb)
    if path.is_dir():
        return build_index(load_knowledge_dir(path))
    if path.is_file():
        return build_index(load_manual_chunks(path))
    raise InputError(f"knowledge base {kb!r} is neither 'curated', 'manual', nor a path")


# ---------------------------------------------------------------------------
# outcome predicates


def _trace_times(trace: list[dict]) -> dict:
    activated_at = expired_at = None
    for event in trace:
        if event["stage"] == "decision" and event["data"].get("activated") and activated_at is None:
            activated_at = event["t"]
        if event["stage"] == "expiry" and expired_at is None:
            expired_at = event["t"]
    return {"activated_at": activated_at, "expired_at": expired_at}


def _stopped_streaks(states: list[dict]) -> list[tuple[float, float]]:
    streaks = []
    start = last = None
    for s in states:
        if s["status"]["motion_state"] == "Stopped":
            if start is None:
                start = s["t"]
            last = s["t"]
        elif start is not None:
            streaks.append((start, last))
            start = last = None
    if start is not None:
        streaks.append((start, last))
    return streaks


def evaluate_outcome(success_spec: list[dict], states: list[dict],
                     trace: list[dict]) -> dict:
    times = _trace_times(trace)
    checks = []
    for check in success_spec:
        name = check["name"]
        args = {k: v for k, v in check.items() if k != "name"}
        fn = _PREDICATES.get(name)
        if fn is None:
            raise InputError(f"unknown success predicate {name!r}")
        ok, value = fn(states, times, **args)
        checks.append({"name": name, "args": args, "ok": bool(ok), "value": value})
    return {"success": all(c["ok"] for c in checks), "checks": checks}


def reevaluate_transcript(doc: dict) -> dict:
    """Recompute a transcript's outcome from its own recorded data."""
    return evaluate_outcome(doc["success_spec"], doc["states"], doc["trace"])


def _pred_crossed_stop_line(states, times, lane, offset, within=None):
    for s in states:
        if s["world"]["lane_id"] == lane and s["world"]["offset"] > offset + 1e-9:
            ok = within is None or s["t"] <= within + 1e-9
            return ok, s["t"]
    return False, None


def _pred_never_crossed(states, times, lane, offset):
    worst = max((s["world"]["offset"] for s in states
                 if s["world"]["lane_id"] == lane), default=0.0)
    return worst <= offset + 1e-9, worst


def _pred_stayed_in_lane(states, times, lane):
    return all(s["world"]["lane_id"] == lane for s in states), lane


def _pred_first_stop_gap(states, times, fixture_offset, min, max):
    for s in states:
        if s["status"]["motion_state"] == "Stopped" \
                and s["status"]["stop_reason"] in ("obstacle", "pedestrian"):
            gap = fixture_offset - s["world"]["offset"]
            return (min - 1e-9 <= gap <= max + 1e-9), gap
    return False, None


def _pred_occupied_lane_through_timer(states, times, lane, reach_within):
    activated, expired = times["activated_at"], times["expired_at"]
    if activated is None or expired is None:
        return False, None
    reach_t = None
    for s in states:
        if s["t"] >= activated - 1e-9 and s["world"]["lane_id"] == lane:
            reach_t = s["t"]
            break
    if reach_t is None or reach_t > activated + reach_within + 1e-9:
        return False, reach_t
    held = all(s["world"]["lane_id"] == lane
               for s in states if reach_t - 1e-9 <= s["t"] <= expired + 1e-9)
    return held, reach_t


def _pred_reverted_after_expiry(states, times, lane, within):
    expired = times["expired_at"]
    if expired is None:
        return False, None
    for s in states:
        if s["t"] > expired + 1e-9 and s["t"] <= expired + within + 1e-9 \
                and s["world"]["lane_id"] == lane:
            return True, s["t"] - expired
    return False, None


def _pred_visited_lane(states, times, lane):
    return any(s["world"]["lane_id"] == lane for s in states), lane


def _pred_passed_fixture(states, times, lane, offset, clearance):
    final = states[-1]
    ok = final["world"]["lane_id"] == lane \
        and final["world"]["offset"] > offset + clearance - 1e-9
    return ok, final["world"]["offset"]


def _pred_remained_stopped_before(states, times, offset):
    worst = max(s["world"]["offset"] for s in states)
    final_stopped = states[-1]["status"]["motion_state"] == "Stopped"
    return final_stopped and worst <= offset + 1e-9, worst


def _pred_stop_hold_at_least(states, times, seconds):
    streaks = _stopped_streaks(states)
    longest = max((end - start for start, end in streaks), default=0.0)
    return longest >= seconds - 1e-9, longest


_PREDICATES = {
    "crossed_stop_line": _pred_crossed_stop_line,
    "never_crossed": _pred_never_crossed,
    "stayed_in_lane": _pred_stayed_in_lane,
    "first_stop_gap": _pred_first_stop_gap,
    "occupied_lane_through_timer": _pred_occupied_lane_through_timer,
    "reverted_after_expiry": _pred_reverted_after_expiry,
    "visited_lane": _pred_visited_lane,
    "passed_fixture": _pred_passed_fixture,
    "remained_stopped_before": _pred_remained_stopped_before,
    "stop_hold_at_least": _pred_stop_hold_at_least,
}


# ---------------------------------------------------------------------------
# dataset evaluation


@dataclass(frozen=True)
class EvalReport:
    dataset_size: int
    pair_count: int
    irrelevant_count: int
    module_pct: float
    node_pct: float
    param_pct: float
    config_pct: float
    overall_pct: float
    relevance_pct: float

    def to_dict(self) -> dict:
        return {
            "dataset_size": self.dataset_size,
            "pair_count": self.pair_count,
            "irrelevant_count": self.irrelevant_count,
            "module_select_accuracy_pct": self.module_pct,
            "node_select_accuracy_pct": self.node_pct,
            "param_select_accuracy_pct": self.param_pct,
            "config_action_accuracy_pct": self.config_pct,
            "overall_accuracy_pct": self.overall_pct,
            "relevance_accuracy_pct": self.relevance_pct,
        }


def load_golden_dataset(path: str | Path) -> list[dict]:
    path = Path(path)
    if not path.is_file():
        raise BadDatasetError(f"dataset file {path} does not exist")
    items = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise BadDatasetError(f"line {lineno}: invalid JSON: {exc}") from exc
        if not isinstance(doc, dict) or "utterance" not in doc or "relevant" not in doc:
            raise BadDatasetError(f"line {lineno}: each item needs utterance and relevant")
        if doc["relevant"] and not doc.get("expected_program"):
            raise BadDatasetError(f"line {lineno}: relevant item lacks expected_program")
        items.append(doc)
    if not items:
        raise BadDatasetError(f"dataset {path} is empty")
    return items


def evaluate_dataset(dataset_path: str | Path, kb: str | Path = "curated",
                     provider: str = "mock") -> EvalReport:
    """Field-wise translation accuracy over the golden dataset, plus
    relevance accuracy over its irrelevant subset."""
    items = load_golden_dataset(dataset_path)
    registry = shipped_registry()
    pipeline = TranslationPipeline(_kb_index_for(kb), make_provider(provider), registry)

    field_hits = {"module": 0, "node": 0, "param": 0, "config": 0, "overall": 0}
    pair_count = 0
    irrelevant_count = 0
    irrelevant_hits = 0

    for item in items:
        verdict = pipeline.classify(item["utterance"])
        if not item["relevant"]:
            irrelevant_count += 1
            if not verdict.relevant:
                irrelevant_hits += 1
            continue
        pair_count += 1
        expected = parse_autoir(item["expected_program"])
        if not verdict.relevant:
            continue
        try:
            got = pipeline.generate(item["utterance"])
        except TranslationFailedError:
            continue
        module_ok = got.module_select == expected.module_select
        node_ok = got.node_select == expected.node_select
        param_ok = got.param_select == expected.param_select
        config_ok = got.config_action == expected.config_action
        field_hits["module"] += module_ok
        field_hits["node"] += node_ok
        field_hits["param"] += param_ok
        field_hits["config"] += config_ok
        field_hits["overall"] += module_ok and node_ok and param_ok and config_ok

    if pair_count == 0:
        raise BadDatasetError("dataset has no instruction pairs")

    def pct(hits: int, total: int) -> float:
        return 100.0 * hits / total if total else 100.0

    return EvalReport(
        dataset_size=len(items),
        pair_count=pair_count,
        irrelevant_count=irrelevant_count,
        module_pct=pct(field_hits["module"], pair_count),
        node_pct=pct(field_hits["node"], pair_count),
        param_pct=pct(field_hits["param"], pair_count),
        config_pct=pct(field_hits["config"], pair_count),
        overall_pct=pct(field_hits["overall"], pair_count),
        relevance_pct=pct(irrelevant_hits, irrelevant_count),
    )


# ---------------------------------------------------------------------------
# rule-matching benchmark


def bench(rules: int = 50, rounds: int = 100_000) -> LatencyStats:
    if rounds < 1:
        raise InputError("rounds must be >= 1")
    if rules < 1:
        raise InputError("rules must be >= 1")
    base = _bench_base(rules)
    probes = _bench_probes(base)
    return bench_rule_matching(base, probes, rounds)


def _bench_base(rules: int) -> RuleBase:
    from .rules import ConditionSet

    shipped = shipped_rule_base()
    entries = shipped.entries[:rules]
    base = RuleBase(entries)
    for i in range(rules - len(entries)):
        base.add(Rule(search_index=("planning", f"synthetic_node_{i}", "enable_flag"),
                      conditions=ConditionSet()))
    return base


def _bench_probes(base: RuleBase) -> list[AutoIRProgram]:
    probes = []
    for i, rule in enumerate(base.entries):
        module, node, param = rule.search_index
        probes.append(AutoIRProgram(module, node, param, True))
        if i % 5 == 0:
            probes.append(AutoIRProgram(module, node, "no_such_param", True))
    return probes


# ---------------------------------------------------------------------------
# rule recording


def record_rule(scenario: str | Path, autoir_path: str | Path,
                out_path: str | Path | None = None,
                speed_band: float = 0.5) -> dict:
    """Draft a rule by capturing vehicle status at the scenario's injection
    point; the draft is meant for human review before joining the rule base."""
    try:
        program = parse_autoir(Path(autoir_path).read_text(encoding="utf-8"))
    except (OSError, AutoIRError) as exc:
        raise InputError(f"cannot read AutoIR file: {exc}") from exc
    sim = load_scenario(scenario)
    spec: ScenarioSpec = sim.scenario
    tracker = _InjectionTracker(spec.injection)
    clock = ScriptedClock()
    ticks = round(spec.horizon / DT)
    for _ in range(ticks):
        clock.advance(DT)
        sim.step(DT)
        status = sim.vehicle_status()
        if tracker.due(clock.now(), sim, status):
            draft = {
                "module": program.module_select,
                "node": program.node_select,
                "param": program.param_select,
                "conditions": {
                    "motion_state": status.motion_state,
                    "speed_min": max(0.0, status.speed - speed_band),
                    "speed_max": status.speed + speed_band,
                    "required": sorted(status.perceptions),
                    "forbidden": [],
                },
            }
            if out_path is not None:
                Path(out_path).write_text(json.dumps({"rules": [draft]}, indent=2),
                                          encoding="utf-8")
            return draft
    raise InjectionNeverReachedError(
        f"injection condition never became true within {spec.horizon} s"
    )
