// Round trip against a real gateway: spawn the Python server, watch the
// state feed, submit the traffic-light instruction once the vehicle has
// stopped at the red light, and verify the staged trace, the countdown,
// and the crossing on the rendered map.

import { spawn, type ChildProcess } from "node:child_process";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import WebSocket from "ws";

import { GatewayClient } from "../src/api";
import { renderMap } from "../src/map";
import { StateFeed } from "../src/socket";
import { TraceStore } from "../src/trace";
import type { StateFrame, WorldDoc } from "../src/types";

const PORT = 18731;
const BASE = `http://127.0.0.1:${PORT}`;
const TICK_HZ = 30; // 3x real time keeps the test quick but honest

let server: ChildProcess;
const client = new GatewayClient(BASE);

async function waitForGateway(timeoutMs = 20_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  let lastError: unknown = null;
  while (Date.now() < deadline) {
    try {
      await client.listScenarios();
      return;
    } catch (err) {
      lastError = err;
      await sleep(200);
    }
  }
  throw new Error(`gateway never came up: ${String(lastError)}`);
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

class FrameCollector {
  frames: StateFrame[] = [];
  private feed: StateFeed;

  constructor() {
    this.feed = new StateFeed({
      url: `ws://127.0.0.1:${PORT}/ws/state`,
      onFrame: (frame) => this.frames.push(frame),
      onStatus: () => undefined,
      webSocketFactory: (url) => new WebSocket(url) as unknown as globalThis.WebSocket,
    });
    this.feed.start();
  }

  async waitFor(predicate: (frame: StateFrame) => boolean,
                timeoutMs: number): Promise<StateFrame> {
    const deadline = Date.now() + timeoutMs;
    let checked = 0;
    while (Date.now() < deadline) {
      while (checked < this.frames.length) {
        const frame = this.frames[checked++];
        if (predicate(frame)) return frame;
      }
      await sleep(50);
    }
    throw new Error("condition not observed in time");
  }

  stop(): void {
    this.feed.stop();
  }
}

beforeAll(async () => {
  server = spawn("python3", [
    "-m", "flexlane.cli", "serve",
    "--port", String(PORT),
    "--scenario", "malfunctioning_traffic_light",
    "--tick-hz", String(TICK_HZ),
  ], { stdio: "ignore" });
  await waitForGateway();
}, 30_000);

afterAll(() => {
  server?.kill();
});

describe("console round trip against a live gateway", () => {
  it("streams frames at 5 Hz or better", async () => {
    const collector = new FrameCollector();
    try {
      await collector.waitFor(() => collector.frames.length >= 1, 5_000);
      const started = Date.now();
      const baseline = collector.frames.length;
      await sleep(1_000);
      const rate = (collector.frames.length - baseline) / ((Date.now() - started) / 1000);
      expect(rate).toBeGreaterThanOrEqual(5);
      const seqs = collector.frames.map((f) => f.seq);
      for (let i = 1; i < seqs.length; i++) expect(seqs[i]).toBe(seqs[i - 1] + 1);
    } finally {
      collector.stop();
    }
  }, 20_000);

  it("traffic-light instruction: full trace, countdown, and map crossing", async () => {
    const world: WorldDoc = await client.fetchWorld();
    expect(world.scenario).toBe("malfunctioning_traffic_light");
    const stopLine = world.map.stop_lines[0];

    const collector = new FrameCollector();
    try {
      // let the vehicle reach the red light first; the safety rule demands
      // Stopped + TrafficLightDetected before the override may activate
      const stopped = await collector.waitFor(
        (f) => f.motion_state === "Stopped" && f.stop_reason === "red_light",
        30_000,
      );
      expect(stopped.vehicle.offset).toBeLessThanOrEqual(stopLine.offset);

      const reply = await client.submitInstruction("Do not follow the traffic light.");
      const store = new TraceStore();
      store.addAll(reply.events);

      const deadline = Date.now() + 20_000;
      while (!store.stages().includes("override") && Date.now() < deadline) {
        store.addAll((await client.fetchTrace(reply.id)).events);
        await sleep(100);
      }
      const stages = store.stages();
      expect(stages).toEqual([
        "injected", "relevance", "retrieval", "generation",
        "program_validation", "rule_match", "decision", "override",
      ]);
      expect(store.summary()).toBe("activated");

      // countdown comes from the gateway frames, never extrapolated
      const withOverride = await collector.waitFor(
        (f) => f.overrides.length > 0, 10_000,
      );
      expect(withOverride.overrides[0].path)
        .toBe("perception/traffic_light_classifier_node/use_flag");
      expect(withOverride.overrides[0].remaining).toBeGreaterThan(0);
      expect(withOverride.overrides[0].remaining).toBeLessThanOrEqual(10);

      // the map shows the crossing once the vehicle is clearly past the line
      const crossed = await collector.waitFor(
        (f) => f.vehicle.offset > stopLine.offset + 1.0, 20_000,
      );
      const svg = renderMap({
        world,
        vehicle: crossed.vehicle,
        lights: crossed.lights,
        overrides: crossed.overrides,
      });
      const offsetAttr = svg.match(/data-offset="([0-9.]+)"/);
      expect(offsetAttr).not.toBeNull();
      expect(Number(offsetAttr![1])).toBeGreaterThan(stopLine.offset);
    } finally {
      collector.stop();
    }
  }, 90_000);

  it("irrelevant chatter ends at the relevance verdict", async () => {
    const reply = await client.submitInstruction("Tell me a joke.");
    const store = new TraceStore();
    store.addAll(reply.events);
    expect(store.stages()).toEqual(["injected", "relevance"]);
    expect(store.isTerminal()).toBe(true);
    expect(store.summary()).toBe("not a driving instruction");
  }, 15_000);

  it("rejects empty instructions with a 400", async () => {
    await expect(client.submitInstruction("   ")).rejects.toMatchObject({ status: 400 });
  }, 15_000);
});
