"""Deterministic fixed-tick driving stack over a lane graph.

Each step runs three passes: perception (what is within sensing range in
the current lane), planning (stop targets, hold-then-escape at obstacles,
lane preference, opposite-lane bypass), and control (accel-bounded
kinematics toward the allowed speed). Everything is a pure function of the
previous state and the live parameters, so identical scenarios and
parameter schedules replay identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..bus import MessageBus
from ..registry import ConfigValue, ParamPath, ParamRegistry, shipped_registry
from ..rules import (
    MOTION_DRIVING,
    MOTION_STOPPED,
    TAG_OBSTACLE,
    TAG_PEDESTRIAN,
    TAG_TRAFFIC_LIGHT,
    VehicleStatus,
)
from ..topics import (
    TOPIC_MOTION_STATE,
    TOPIC_OBJECTS,
    TOPIC_TRAFFIC_ROIS,
    TOPIC_VELOCITY,
)
from .lanemap import LaneMap

DT = 0.1
SENSING_RANGE_M = 30.0
SPEED_CAP_MPS = 16.7
ACCEL_LIMIT_MPS2 = 3.0
SPEED_SNAP_EPS = 0.01
ARRIVE_EPS_M = 0.05
LANE_CHANGE_COOLDOWN_S = 1.0
BYPASS_CLEARANCE_M = 5.0
FREE_BEHIND_M = 2.0
FREE_AHEAD_M = 30.0

LIGHT_RED = "Red"
LIGHT_GREEN = "Green"

PATH_USE_FLAG: ParamPath = ("perception", "traffic_light_classifier_node", "use_flag")
PATH_LANE_PREFER: ParamPath = ("planning", "mission_planner", "lane_prefer")
PATH_STOP_MARGIN: ParamPath = ("planning", "behavior_velocity_planner_node", "stop_margin")
PATH_STOP_DURATION: ParamPath = ("planning", "behavior_velocity_planner_node", "stop_duration")
PATH_USE_OPPOSITE: ParamPath = ("planning", "behavior_path_planner", "use_opposite_lane")

STOP_RED_LIGHT = "red_light"
STOP_OBSTACLE = "obstacle"
STOP_PEDESTRIAN = "pedestrian"


class SimError(Exception):
    pass


class UnknownParamPathError(SimError):
    pass


class ParamTypeError(SimError):
    pass


@dataclass(frozen=True)
class WorldState:
    time: float
    lane_id: str
    offset: float
    speed: float
    target_speed: float
    lights: tuple[tuple[str, str], ...]
    events_applied: int

    def to_dict(self) -> dict:
        return {
            "time": self.time,
            "lane_id": self.lane_id,
            "offset": self.offset,
            "speed": self.speed,
            "target_speed": self.target_speed,
            "lights": dict(self.lights),
            "events_applied": self.events_applied,
        }


class _ParamBackend:
    """Adapter exposing the simulator's live parameters to a ParamStore."""

    def __init__(self, sim: "Simulator"):
        self._sim = sim

    def get(self, path: ParamPath) -> ConfigValue:
        return self._sim._params[path]

    def set(self, path: ParamPath, value: ConfigValue) -> None:
        self._sim._params[path] = value


class Simulator:
    def __init__(self, lane_map: LaneMap, *, start_lane: str, start_offset: float = 0.0,
                 start_speed: float = 0.0, cruise_speed: float = 8.0,
                 route_lane: str | None = None,
                 lights: dict[str, str] | None = None,
                 events: list[dict] | None = None,
                 registry: ParamRegistry | None = None):
        lane_map.validate()
        if start_lane not in lane_map.lanes:
            raise SimError(f"start lane {start_lane!r} not in map")
        self.lane_map = lane_map
        self.registry = registry if registry is not None else shipped_registry()
        self.time = 0.0
        self.lane_id = start_lane
        self.offset = float(start_offset)
        self.speed = float(start_speed)
        self.target_speed = float(start_speed)
        self.cruise_speed = float(cruise_speed)
        self.route_lane = route_lane
        self.lights: dict[str, str] = dict(lights or {})
        self._events = sorted((dict(e) for e in (events or [])), key=lambda e: e.get("t", 0.0))
        self._events_applied = 0
        self._params: dict[ParamPath, ConfigValue] = self.registry.defaults()
        # planner bookkeeping
        self._stop_target: tuple[float, str] | None = None
        self._stopped_since: float | None = None
        self._last_lane_change = -math.inf
        self._bypass: dict | None = None
        self.scenario = None  # attached by load_scenario

    # -- parameters -----------------------------------------------------------

    def get_node_param(self, path: ParamPath) -> ConfigValue:
        if path not in self._params:
            raise UnknownParamPathError("/".join(path))
        return self._params[path]

    def set_node_param(self, path: ParamPath, value: ConfigValue) -> ConfigValue:
        """Set a live parameter; takes effect at the next planning pass."""
        descriptor = self.registry.lookup(*path)
        if descriptor is None or path not in self._params:
            raise UnknownParamPathError("/".join(path))
        problem = descriptor.check(value)
        if problem is not None:
            raise ParamTypeError(problem)
        self._params[path] = value
        return value

    def param_backend(self) -> _ParamBackend:
        return _ParamBackend(self)

    # -- stepping -------------------------------------------------------------

    def step(self, dt: float = DT) -> WorldState:
        if dt <= 0:
            raise SimError("dt must be positive")
        self.time += dt
        self._apply_due_events()
        target = self._plan()
        self._control(target, dt)
        self._stop_target = target if target[0] is not None else None
        return self.world_state()

    def _apply_due_events(self) -> None:
        while self._events_applied < len(self._events):
            event = self._events[self._events_applied]
            if event.get("t", 0.0) > self.time + 1e-9:
                break
            kind = event.get("kind")
            if kind == "set_light":
                self.lights[event["light"]] = event["state"]
            elif kind == "spawn_obstacle":
                from .lanemap import Obstacle
                self.lane_map.obstacles.append(Obstacle(
                    lane=event["lane"], offset=float(event["offset"]),
                    kind=event.get("obstacle_kind", "cone"),
                ))
            elif kind == "remove_obstacle":
                self.lane_map.obstacles = [
                    obs for obs in self.lane_map.obstacles
                    if not (obs.lane == event["lane"] and abs(obs.offset - float(event["offset"])) < 1e-9)
                ]
            else:
                raise SimError(f"unknown scripted event kind {kind!r}")
            self._events_applied += 1

    # -- perception -----------------------------------------------------------

    def _perceive(self) -> frozenset[str]:
        tags: set[str] = set()
        for sl in self.lane_map.stop_lines_in(self.lane_id):
            if self.offset < sl.offset <= self.offset + SENSING_RANGE_M:
                tags.add(TAG_TRAFFIC_LIGHT)
        for obs in self.lane_map.obstacles_in(self.lane_id):
            if self.offset < obs.offset <= self.offset + SENSING_RANGE_M:
                tags.add(TAG_OBSTACLE)
                if obs.kind == "pedestrian":
                    tags.add(TAG_PEDESTRIAN)
        return frozenset(tags)

    # -- planning -------------------------------------------------------------

    def _stop_candidates(self) -> list[tuple[float, str, float]]:
        """(stop position, reason, fixture offset) for the current lane."""
        use_flag = self._params[PATH_USE_FLAG]
        margin = float(self._params[PATH_STOP_MARGIN])
        out: list[tuple[float, str, float]] = []
        if use_flag:
            for sl in self.lane_map.stop_lines_in(self.lane_id):
                if self.offset < sl.offset <= self.offset + SENSING_RANGE_M \
                        and self.lights.get(sl.light_id) == LIGHT_RED:
                    out.append((sl.offset - margin, STOP_RED_LIGHT, sl.offset))
        for obs in self.lane_map.obstacles_in(self.lane_id):
            if self.offset < obs.offset <= self.offset + SENSING_RANGE_M:
                reason = STOP_PEDESTRIAN if obs.kind == "pedestrian" else STOP_OBSTACLE
                out.append((obs.offset - margin, reason, obs.offset))
        out.sort(key=lambda c: c[0])
        return out

    def _plan(self) -> tuple[float | None, str | None]:
        self._progress_bypass()
        target = self._nearest_stop()

        if target[0] is not None and target[1] != STOP_RED_LIGHT \
                and self.speed == 0.0 and target[0] - self.offset <= ARRIVE_EPS_M:
            if self._stopped_since is None:
                self._stopped_since = self.time
            hold = float(self._params[PATH_STOP_DURATION])
            if self.time - self._stopped_since + 1e-9 >= hold:
                if self._try_escape(target[2]):
                    target = self._nearest_stop()
        elif self.speed > 0.0:
            self._stopped_since = None

        if target[0] is None and self._bypass is None:
            if self._apply_lane_preference():
                target = self._nearest_stop()
        return target[0], target[1]

    def _nearest_stop(self) -> tuple[float | None, str | None, float | None]:
        candidates = self._stop_candidates()
        if not candidates:
            return (None, None, None)
        pos, reason, fixture = candidates[0]
        return (pos, reason, fixture)

    def _progress_bypass(self) -> None:
        if self._bypass is None:
            return
        if self.offset >= self._bypass["exit_offset"] - 1e-9:
            self._hop(self._bypass["home_lane"])
            self._bypass = None

    def _try_escape(self, blocking_offset: float) -> bool:
        """After the stop hold: neighbor lane first (right, then left), else
        the opposite twin when enabled. Returns True when a hop happened."""
        lane = self.lane_map.lane(self.lane_id)
        for neighbor in (lane.right, lane.left):
            if neighbor is not None and self._lane_free(neighbor):
                self._hop(neighbor)
                return True
        if self._params[PATH_USE_OPPOSITE] and lane.opposite is not None:
            exit_offset = blocking_offset + BYPASS_CLEARANCE_M
            if self._lane_free(lane.opposite, until=exit_offset):
                self._bypass = {"home_lane": self.lane_id, "exit_offset": exit_offset}
                self._hop(lane.opposite)
                return True
        return False

    def _apply_lane_preference(self) -> bool:
        if self.time - self._last_lane_change < LANE_CHANGE_COOLDOWN_S:
            return False
        lane = self.lane_map.lane(self.lane_id)
        prefer = self._params[PATH_LANE_PREFER]
        desired: str | None = None
        if prefer == "LEFT":
            desired = lane.left
        elif prefer == "RIGHT":
            desired = lane.right
        elif self.route_lane is not None and self.lane_id != self.route_lane:
            desired = self._step_toward(self.route_lane)
        if desired is not None and self._lane_free(desired):
            self._hop(desired)
            return True
        return False

    def _step_toward(self, goal: str) -> str | None:
        lane = self.lane_map.lane(self.lane_id)
        probe = lane.left
        while probe is not None:
            if probe == goal:
                return lane.left
            probe = self.lane_map.lane(probe).left
        probe = lane.right
        while probe is not None:
            if probe == goal:
                return lane.right
            probe = self.lane_map.lane(probe).right
        return None

    def _lane_free(self, lane_id: str, until: float | None = None) -> bool:
        hi = until if until is not None else self.offset + FREE_AHEAD_M
        for obs in self.lane_map.obstacles_in(lane_id):
            if self.offset - FREE_BEHIND_M <= obs.offset <= hi + FREE_BEHIND_M:
                return False
        return True

    def _hop(self, lane_id: str) -> None:
        self.lane_id = lane_id
        self._last_lane_change = self.time
        self._stopped_since = None

    # -- control --------------------------------------------------------------

    def _control(self, target: tuple[float | None, str | None], dt: float) -> None:
        stop_pos = target[0]
        v = self.speed
        if stop_pos is None:
            d = None
            v_allow = min(SPEED_CAP_MPS, self.cruise_speed)
        else:
            d = max(0.0, stop_pos - self.offset)
            if d <= ARRIVE_EPS_M:
                v_allow = 0.0
            else:
                # one-tick lookahead keeps the discrete update on the
                # feasible side of the braking curve v <= sqrt(2 a d)
                v_allow = min(SPEED_CAP_MPS, self.cruise_speed,
                              math.sqrt(2.0 * ACCEL_LIMIT_MPS2 * max(0.0, d - v * dt)))
        v_next = min(v_allow, v + ACCEL_LIMIT_MPS2 * dt)
        v_next = max(v_next, v - ACCEL_LIMIT_MPS2 * dt, 0.0)
        if v_next < SPEED_SNAP_EPS:
            v_next = 0.0
        self.target_speed = v_allow
        dx = v_next * dt
        if d is not None and dx >= d - 1e-12:
            self.offset = stop_pos  # exact arrival, never past the barrier
        else:
            self.offset += dx
        self.speed = v_next
        lane = self.lane_map.lane(self.lane_id)
        if self.offset >= lane.length:
            if lane.successors:
                self.offset -= lane.length
                self.lane_id = lane.successors[0]
            else:
                self.offset = lane.length
                self.speed = 0.0

    # -- observation ----------------------------------------------------------

    def vehicle_status(self) -> VehicleStatus:
        stopped = self.speed < SPEED_SNAP_EPS
        reason = None
        if stopped and self._stop_target is not None:
            reason = self._stop_target[1]
        return VehicleStatus(
            motion_state=MOTION_STOPPED if stopped else MOTION_DRIVING,
            speed=self.speed,
            perceptions=self._perceive(),
            stop_reason=reason,
        )

    def world_state(self) -> WorldState:
        return WorldState(
            time=self.time, lane_id=self.lane_id, offset=self.offset,
            speed=self.speed, target_speed=self.target_speed,
            lights=tuple(sorted(self.lights.items())),
            events_applied=self._events_applied,
        )

    def publish_status(self, bus: MessageBus, publisher: str = "sim") -> None:
        """One envelope on each of the four status topics for this tick."""
        status = self.vehicle_status()
        objects = sorted(tag for tag in status.perceptions if tag != TAG_TRAFFIC_LIGHT)
        rois = sorted(tag for tag in status.perceptions if tag == TAG_TRAFFIC_LIGHT)
        bus.publish(TOPIC_MOTION_STATE,
                    {"state": status.motion_state, "stop_reason": status.stop_reason},
                    publisher=publisher)
        bus.publish(TOPIC_VELOCITY, {"speed": status.speed}, publisher=publisher)
        bus.publish(TOPIC_OBJECTS, {"objects": objects}, publisher=publisher)
        bus.publish(TOPIC_TRAFFIC_ROIS, {"rois": rois}, publisher=publisher)
