"""Lane-graph world geometry: lanes, stop lines, obstacles, pedestrians."""

from __future__ import annotations

from dataclasses import dataclass, field


class LaneMapError(Exception):
    pass


@dataclass(frozen=True)
class Lane:
    id: str
    length: float
    left: str | None = None
    right: str | None = None
    successors: tuple[str, ...] = ()
    opposite: str | None = None


@dataclass(frozen=True)
class StopLine:
    lane: str
    offset: float
    light_id: str


@dataclass(frozen=True)
class Obstacle:
    lane: str
    offset: float
    kind: str = "cone"  # "cone" | "pedestrian"


@dataclass
class LaneMap:
    lanes: dict[str, Lane] = field(default_factory=dict)
    stop_lines: list[StopLine] = field(default_factory=list)
    obstacles: list[Obstacle] = field(default_factory=list)

    def validate(self) -> None:
        for lane in self.lanes.values():
            for ref in (lane.left, lane.right, lane.opposite, *lane.successors):
                if ref is not None and ref not in self.lanes:
                    raise LaneMapError(f"lane {lane.id}: reference to unknown lane {ref!r}")
        for fixture in (*self.stop_lines, *self.obstacles):
            lane = self.lanes.get(fixture.lane)
            if lane is None:
                raise LaneMapError(f"fixture on unknown lane {fixture.lane!r}")
            if not 0 <= fixture.offset <= lane.length:
                raise LaneMapError(
                    f"fixture offset {fixture.offset} outside lane {fixture.lane} [0, {lane.length}]"
                )

    def lane(self, lane_id: str) -> Lane:
        return self.lanes[lane_id]

    def obstacles_in(self, lane_id: str) -> list[Obstacle]:
        return [obs for obs in self.obstacles if obs.lane == lane_id]

    def stop_lines_in(self, lane_id: str) -> list[StopLine]:
        return [sl for sl in self.stop_lines if sl.lane == lane_id]

    @classmethod
    def from_dict(cls, doc: dict) -> "LaneMap":
        lanes = {}
        for raw in doc.get("lanes", []):
            lane = Lane(
                id=raw["id"], length=float(raw["length"]),
                left=raw.get("left"), right=raw.get("right"),
                successors=tuple(raw.get("successors", ())),
                opposite=raw.get("opposite"),
            )
            if lane.id in lanes:
                raise LaneMapError(f"duplicate lane id {lane.id!r}")
            lanes[lane.id] = lane
        lane_map = cls(
            lanes=lanes,
            stop_lines=[StopLine(lane=raw["lane"], offset=float(raw["offset"]),
                                 light_id=raw["light"])
                        for raw in doc.get("stop_lines", [])],
            obstacles=[Obstacle(lane=raw["lane"], offset=float(raw["offset"]),
                                kind=raw.get("kind", "cone"))
                       for raw in doc.get("obstacles", [])],
        )
        lane_map.validate()
        return lane_map

    def to_dict(self) -> dict:
        return {
            "lanes": [
                {"id": lane.id, "length": lane.length, "left": lane.left,
                 "right": lane.right, "successors": list(lane.successors),
                 "opposite": lane.opposite}
                for lane in self.lanes.values()
            ],
            "stop_lines": [
                {"lane": sl.lane, "offset": sl.offset, "light": sl.light_id}
                for sl in self.stop_lines
            ],
            "obstacles": [
                {"lane": obs.lane, "offset": obs.offset, "kind": obs.kind}
                for obs in self.obstacles
            ],
        }
