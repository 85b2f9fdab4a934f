// Top-down scene renderer. Pure: the SVG string is a function of the
// RenderModel alone, so identical models yield identical markup (snapshot
// tests rely on this). No DOM access here.

import type { LaneDoc, RenderModel } from "./types";

const LANE_HEIGHT = 34;
const MARGIN_X = 20;
const MARGIN_Y = 16;
const VIEW_WIDTH = 840;

function fmt(value: number): string {
  return (Math.round(value * 10) / 10).toFixed(1);
}

export interface LaneLayout {
  /** Row order top to bottom: oncoming (opposite) lanes, then the
   * left-to-right chain of same-direction lanes. */
  rows: string[];
  oppositeCount: number;
}

export function laneLayout(lanes: LaneDoc[]): LaneLayout {
  if (lanes.length === 0) return { rows: [], oppositeCount: 0 };
  const byId = new Map(lanes.map((lane) => [lane.id, lane]));
  let leftmost = lanes[0];
  const walked = new Set<string>([leftmost.id]);
  while (leftmost.left !== null && byId.has(leftmost.left) && !walked.has(leftmost.left)) {
    leftmost = byId.get(leftmost.left)!;
    walked.add(leftmost.id);
  }
  const chain: string[] = [];
  const inChain = new Set<string>();
  let cursor: LaneDoc | undefined = leftmost;
  while (cursor !== undefined && !inChain.has(cursor.id)) {
    chain.push(cursor.id);
    inChain.add(cursor.id);
    cursor = cursor.right !== null ? byId.get(cursor.right) : undefined;
  }
  const opposite = lanes
    .map((lane) => lane.id)
    .filter((id) => !inChain.has(id))
    .sort();
  return { rows: [...opposite, ...chain], oppositeCount: opposite.length };
}

export function renderMap(model: RenderModel): string {
  const lanes = model.world.map.lanes;
  const { rows, oppositeCount } = laneLayout(lanes);
  const rowOf = new Map(rows.map((id, index) => [id, index]));
  const maxLength = Math.max(1, ...lanes.map((lane) => lane.length));
  const scale = (VIEW_WIDTH - 2 * MARGIN_X) / maxLength;
  const height = 2 * MARGIN_Y + rows.length * LANE_HEIGHT;
  const x = (offset: number) => MARGIN_X + offset * scale;
  const yTop = (id: string) => MARGIN_Y + (rowOf.get(id) ?? 0) * LANE_HEIGHT;
  const yMid = (id: string) => yTop(id) + LANE_HEIGHT / 2;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${VIEW_WIDTH} ${height}" ` +
      `class="scene" data-scenario="${model.world.scenario}">`,
  );

  for (const lane of lanes) {
    const top = yTop(lane.id);
    const isOpposite = (rowOf.get(lane.id) ?? 0) < oppositeCount;
    parts.push(
      `<rect class="lane${isOpposite ? " lane-opposite" : ""}" data-lane="${lane.id}" ` +
        `x="${fmt(x(0))}" y="${fmt(top)}" width="${fmt(lane.length * scale)}" ` +
        `height="${LANE_HEIGHT - 2}" />`,
    );
    parts.push(
      `<text class="lane-label" x="${fmt(x(0) + 4)}" y="${fmt(top + 12)}">${lane.id}</text>`,
    );
  }

  for (const stopLine of model.world.map.stop_lines) {
    const lx = x(stopLine.offset);
    const top = yTop(stopLine.lane);
    const color = model.lights[stopLine.light] === "Red" ? "#e03131"
      : model.lights[stopLine.light] === "Green" ? "#2f9e44" : "#868e96";
    parts.push(
      `<line class="stop-line" x1="${fmt(lx)}" y1="${fmt(top)}" x2="${fmt(lx)}" ` +
        `y2="${fmt(top + LANE_HEIGHT - 2)}" stroke="${color}" />`,
    );
    parts.push(
      `<circle class="light" data-light="${stopLine.light}" cx="${fmt(lx)}" ` +
        `cy="${fmt(top - 5)}" r="4" fill="${color}" />`,
    );
  }

  for (const obstacle of model.world.map.obstacles) {
    const ox = x(obstacle.offset);
    const my = yMid(obstacle.lane);
    if (obstacle.kind === "pedestrian") {
      parts.push(
        `<circle class="pedestrian" cx="${fmt(ox)}" cy="${fmt(my)}" r="6" />`,
      );
    } else {
      parts.push(
        `<path class="cone" d="M ${fmt(ox - 6)} ${fmt(my + 7)} L ${fmt(ox)} ` +
          `${fmt(my - 7)} L ${fmt(ox + 6)} ${fmt(my + 7)} Z" />`,
      );
    }
  }

  const vx = x(model.vehicle.offset);
  const vy = yMid(model.vehicle.lane_id);
  parts.push(
    `<g class="vehicle" data-lane="${model.vehicle.lane_id}" ` +
      `data-offset="${fmt(model.vehicle.offset)}">` +
      `<rect x="${fmt(vx - 18)}" y="${fmt(vy - 8)}" width="18" height="16" rx="3" />` +
      `<path d="M ${fmt(vx)} ${fmt(vy - 8)} L ${fmt(vx + 8)} ${fmt(vy)} ` +
      `L ${fmt(vx)} ${fmt(vy + 8)} Z" />` +
      `</g>`,
  );
  parts.push(`<text class="speed" x="${fmt(vx - 18)}" y="${fmt(vy - 12)}">` +
    `${fmt(model.vehicle.speed)} m/s</text>`);

  parts.push("</svg>");
  return parts.join("\n");
}
