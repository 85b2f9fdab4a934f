// Wire types mirrored from the gateway's JSON contracts.

export interface VehiclePose {
  lane_id: string;
  offset: number;
  speed: number;
  target_speed: number;
}

export interface OverrideEntry {
  instruction_id: string;
  path: string;
  value: boolean | number | string;
  remaining: number;
}

export interface TraceEvent {
  stage: string;
  stage_index: number;
  t: number;
  data: Record<string, unknown>;
}

export interface StateFrame {
  type: "frame";
  seq: number;
  time: number;
  scenario: string;
  vehicle: VehiclePose;
  lights: Record<string, string>;
  motion_state: "Driving" | "Stopped";
  stop_reason: string | null;
  perceptions: string[];
  overrides: OverrideEntry[];
  events: TraceEvent[];
}

export interface LaneDoc {
  id: string;
  length: number;
  left: string | null;
  right: string | null;
  successors: string[];
  opposite: string | null;
}

export interface WorldDoc {
  scenario: string;
  map: {
    lanes: LaneDoc[];
    stop_lines: { lane: string; offset: number; light: string }[];
    obstacles: { lane: string; offset: number; kind: string }[];
  };
  route_lane: string | null;
  stage_index: Record<string, number>;
}

/** Everything the map needs for one picture: static world plus the
 * dynamic fields of the latest frame. Pure data in, pure SVG out. */
export interface RenderModel {
  world: WorldDoc;
  vehicle: VehiclePose;
  lights: Record<string, string>;
  overrides: OverrideEntry[];
}
