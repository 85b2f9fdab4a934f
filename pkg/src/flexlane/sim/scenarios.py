"""Built-in evaluation scenarios and script-file loading.

Each scenario fixes the world geometry, the vehicle's start, scripted
events, when the harness injects the user utterance, and the success
predicates for runs with and without an instruction. Lane layout follows
left-hand traffic, so the outermost lane is the leftmost one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .lanemap import LaneMap
from .simulator import Simulator


class UnknownScenarioError(Exception):
    pass


class BadScriptError(Exception):
    pass


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    description: str
    map_doc: dict
    vehicle: dict
    lights: dict[str, str] = field(default_factory=dict)
    events: tuple[dict, ...] = ()
    injection: dict | None = None
    horizon: float = 30.0
    success_with: tuple[dict, ...] = ()
    success_without: tuple[dict, ...] = ()

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "map": self.map_doc,
            "vehicle": self.vehicle,
            "lights": dict(self.lights),
            "events": list(self.events),
            "injection": self.injection,
            "horizon": self.horizon,
            "success": {
                "with_instruction": list(self.success_with),
                "without_instruction": list(self.success_without),
            },
        }


def _lane(id: str, length: float = 200.0, **kw) -> dict:
    return {"id": id, "length": length, **kw}


_BUILTINS: dict[str, ScenarioSpec] = {}


def _register(spec: ScenarioSpec) -> ScenarioSpec:
    _BUILTINS[spec.name] = spec
    return spec


_register(ScenarioSpec(
    name="malfunctioning_traffic_light",
    description="Intersection light stuck on red; only a rider instruction "
                "to ignore the classifier lets the vehicle proceed.",
    map_doc={
        "lanes": [_lane("main")],
        "stop_lines": [{"lane": "main", "offset": 100.0, "light": "TL1"}],
        "obstacles": [],
    },
    vehicle={"lane": "main", "offset": 20.0, "speed": 10.0, "cruise_speed": 10.0},
    lights={"TL1": "Red"},
    injection={"type": "stopped_for", "seconds": 2.0},
    horizon=20.0,
    success_with=(
        {"name": "crossed_stop_line", "lane": "main", "offset": 100.0, "within": 15.0},
    ),
    success_without=(
        {"name": "never_crossed", "lane": "main", "offset": 100.0},
    ),
))

_register(ScenarioSpec(
    name="restricted_lane_cruising",
    description="Three-lane road, slow cruise on the middle (route) lane; "
                "the rider asks to hold the outermost (left) lane.",
    map_doc={
        "lanes": [
            _lane("lane_left", right="lane_mid"),
            _lane("lane_mid", left="lane_left", right="lane_right"),
            _lane("lane_right", left="lane_mid"),
        ],
        "stop_lines": [],
        "obstacles": [],
    },
    vehicle={"lane": "lane_mid", "offset": 10.0, "speed": 4.0,
             "cruise_speed": 4.0, "route_lane": "lane_mid"},
    injection={"type": "time", "t": 2.0},
    horizon=16.0,
    success_with=(
        {"name": "occupied_lane_through_timer", "lane": "lane_left", "reach_within": 1.0},
        {"name": "reverted_after_expiry", "lane": "lane_mid", "within": 0.3},
    ),
    success_without=(
        {"name": "stayed_in_lane", "lane": "lane_mid"},
    ),
))

_register(ScenarioSpec(
    name="pedestrian_margin",
    description="Pedestrian ahead in a single lane; the stop margin decides "
                "how far away the vehicle halts.",
    map_doc={
        "lanes": [_lane("main")],
        "stop_lines": [],
        "obstacles": [{"lane": "main", "offset": 60.0, "kind": "pedestrian"}],
    },
    vehicle={"lane": "main", "offset": 10.0, "speed": 4.0, "cruise_speed": 4.0},
    injection={"type": "obstacle_within", "meters": 30.0},
    horizon=20.0,
    success_with=(
        {"name": "first_stop_gap", "fixture_offset": 60.0, "min": 3.0, "max": 3.3},
    ),
    success_without=(
        {"name": "first_stop_gap", "fixture_offset": 60.0, "min": 1.0, "max": 1.3},
    ),
))

_register(ScenarioSpec(
    name="cone_opposite_lane",
    description="A cone blocks the only lane in this direction; with the "
                "opposite lane enabled the vehicle bypasses and returns.",
    map_doc={
        "lanes": [
            _lane("own", opposite="opp"),
            _lane("opp", opposite="own"),
        ],
        "stop_lines": [],
        "obstacles": [{"lane": "own", "offset": 45.0, "kind": "cone"}],
    },
    vehicle={"lane": "own", "offset": 5.0, "speed": 4.0, "cruise_speed": 4.0},
    injection={"type": "obstacle_within", "meters": 12.0},
    horizon=30.0,
    success_with=(
        {"name": "visited_lane", "lane": "opp"},
        {"name": "passed_fixture", "lane": "own", "offset": 45.0, "clearance": 2.0},
    ),
    success_without=(
        {"name": "remained_stopped_before", "offset": 45.0},
    ),
))

_register(ScenarioSpec(
    name="extended_stop",
    description="A cone blocks the route lane with a free right neighbor; "
                "the stop duration decides how long the vehicle waits "
                "before detouring.",
    map_doc={
        "lanes": [
            _lane("mid", right="side"),
            _lane("side", left="mid"),
        ],
        "stop_lines": [],
        "obstacles": [{"lane": "mid", "offset": 60.0, "kind": "cone"}],
    },
    vehicle={"lane": "mid", "offset": 10.0, "speed": 4.0,
             "cruise_speed": 4.0, "route_lane": "mid"},
    injection={"type": "stopped_for", "seconds": 0.2},
    horizon=25.0,
    success_with=(
        {"name": "stop_hold_at_least", "seconds": 5.0},
        {"name": "passed_fixture", "lane": "mid", "offset": 60.0, "clearance": 2.0},
    ),
    success_without=(
        {"name": "stop_hold_at_least", "seconds": 2.0},
        {"name": "passed_fixture", "lane": "mid", "offset": 60.0, "clearance": 2.0},
    ),
))


def scenario_names() -> list[str]:
    return sorted(_BUILTINS)


def get_scenario(name: str) -> ScenarioSpec:
    spec = _BUILTINS.get(name)
    if spec is None:
        raise UnknownScenarioError(
            f"unknown scenario {name!r}; available: {', '.join(scenario_names())}"
        )
    return spec


def scenario_from_file(path: str | Path) -> ScenarioSpec:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise BadScriptError(f"cannot read scenario script: {exc}") from exc
    return scenario_from_dict(doc)


def scenario_from_dict(doc: dict) -> ScenarioSpec:
    if not isinstance(doc, dict):
        raise BadScriptError("scenario script must be a JSON object")
    for key in ("name", "map", "vehicle"):
        if key not in doc:
            raise BadScriptError(f"scenario script missing {key!r}")
    events = doc.get("events", [])
    times = [e.get("t", 0.0) for e in events]
    if times != sorted(times):
        raise BadScriptError("event times must be non-decreasing")
    success = doc.get("success", {})
    try:
        spec = ScenarioSpec(
            name=doc["name"],
            description=doc.get("description", ""),
            map_doc=doc["map"],
            vehicle=doc["vehicle"],
            lights=dict(doc.get("lights", {})),
            events=tuple(events),
            injection=doc.get("injection"),
            horizon=float(doc.get("horizon", 30.0)),
            success_with=tuple(success.get("with_instruction", ())),
            success_without=tuple(success.get("without_instruction", ())),
        )
        build_simulator(spec)  # validates the map and vehicle placement
    except BadScriptError:
        raise
    except Exception as exc:
        raise BadScriptError(f"invalid scenario script: {exc}") from exc
    return spec


def build_simulator(spec: ScenarioSpec) -> Simulator:
    lane_map = LaneMap.from_dict(spec.map_doc)
    vehicle = spec.vehicle
    sim = Simulator(
        lane_map,
        start_lane=vehicle["lane"],
        start_offset=float(vehicle.get("offset", 0.0)),
        start_speed=float(vehicle.get("speed", 0.0)),
        cruise_speed=float(vehicle.get("cruise_speed", 8.0)),
        route_lane=vehicle.get("route_lane"),
        lights=dict(spec.lights),
        events=[dict(e) for e in spec.events],
    )
    sim.scenario = spec
    return sim


def load_scenario(name_or_path: str | Path) -> Simulator:
    """Build a fresh simulator for a built-in name or a script file path."""
    if isinstance(name_or_path, Path) or str(name_or_path).endswith(".json"):
        spec = scenario_from_file(name_or_path)
    else:
        spec = get_scenario(str(name_or_path))
    return build_simulator(spec)
