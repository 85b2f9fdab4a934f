import { describe, expect, it, vi } from "vitest";

import { StateFeed, type FeedStatus } from "../src/socket";

class FakeSocket {
  onopen: (() => void) | null = null;
  onmessage: ((event: { data: string }) => void) | null = null;
  onclose: (() => void) | null = null;
  onerror: (() => void) | null = null;
  closed = false;

  close(): void {
    this.closed = true;
    this.onclose?.();
  }

  emitFrame(doc: unknown): void {
    this.onmessage?.({ data: JSON.stringify(doc) });
  }
}

function feedWith(sockets: FakeSocket[]) {
  const frames: unknown[] = [];
  const statuses: FeedStatus[] = [];
  let index = 0;
  const feed = new StateFeed({
    url: "ws://test/ws/state",
    onFrame: (frame) => frames.push(frame),
    onStatus: (status) => statuses.push(status),
    webSocketFactory: () => sockets[Math.min(index++, sockets.length - 1)] as unknown as WebSocket,
    backoffMs: [1, 1],
  });
  return { feed, frames, statuses };
}

describe("StateFeed", () => {
  it("reports open and delivers parsed frames in order", () => {
    const socket = new FakeSocket();
    const { feed, frames, statuses } = feedWith([socket]);
    feed.start();
    socket.onopen?.();
    socket.emitFrame({ type: "frame", seq: 1 });
    socket.emitFrame({ type: "frame", seq: 2 });
    expect(statuses).toEqual(["connecting", "open"]);
    expect(frames.map((f) => (f as { seq: number }).seq)).toEqual([1, 2]);
    feed.stop();
  });

  it("ignores malformed payloads and non-frames", () => {
    const socket = new FakeSocket();
    const { feed, frames } = feedWith([socket]);
    feed.start();
    socket.onopen?.();
    socket.onmessage?.({ data: "{not json" });
    socket.emitFrame({ type: "hello" });
    socket.emitFrame({ type: "frame", seq: 7 });
    expect(frames).toHaveLength(1);
    feed.stop();
  });

  it("reconnects with backoff after a close and surfaces every status", async () => {
    vi.useFakeTimers();
    const first = new FakeSocket();
    const second = new FakeSocket();
    const { feed, frames, statuses } = feedWith([first, second]);
    feed.start();
    first.onopen?.();
    first.close(); // gateway went away
    expect(statuses).toEqual(["connecting", "open", "closed"]);
    await vi.advanceTimersByTimeAsync(5);
    second.onopen?.();
    second.emitFrame({ type: "frame", seq: 3 });
    expect(statuses).toEqual(["connecting", "open", "closed", "connecting", "open"]);
    expect(frames).toHaveLength(1); // session resumed without losing the feed
    feed.stop();
    vi.useRealTimers();
  });

  it("stop() silences further reconnects", async () => {
    vi.useFakeTimers();
    const socket = new FakeSocket();
    const { feed, statuses } = feedWith([socket, socket]);
    feed.start();
    socket.onopen?.();
    feed.stop();
    const before = statuses.length;
    await vi.advanceTimersByTimeAsync(50);
    expect(statuses.length).toBeLessThanOrEqual(before + 1); // at most the close event
    vi.useRealTimers();
  });
});
