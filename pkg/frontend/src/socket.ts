// Reconnecting state feed. The caller learns about every connection state
// change (so the UI can keep a status banner visible at all times) and
// receives each frame exactly once, in arrival order.

import type { StateFrame } from "./types";

export type FeedStatus = "connecting" | "open" | "closed";

export interface StateFeedOptions {
  url: string;
  onFrame: (frame: StateFrame) => void;
  onStatus: (status: FeedStatus, detail?: string) => void;
  /** Injectable for tests (Node's `ws`); defaults to the browser WebSocket. */
  webSocketFactory?: (url: string) => WebSocket;
  /** Backoff schedule in ms; the last entry repeats. */
  backoffMs?: number[];
}

const DEFAULT_BACKOFF_MS = [250, 500, 1000, 2000, 5000];

export class StateFeed {
  private readonly opts: Required<Pick<StateFeedOptions, "url" | "onFrame" | "onStatus">> &
    StateFeedOptions;
  private socket: WebSocket | null = null;
  private attempts = 0;
  private stopped = false;
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(opts: StateFeedOptions) {
    this.opts = opts;
  }

  start(): void {
    this.stopped = false;
    this.connect();
  }

  stop(): void {
    this.stopped = true;
    if (this.timer !== null) clearTimeout(this.timer);
    this.socket?.close();
    this.socket = null;
  }

  private connect(): void {
    if (this.stopped) return;
    this.opts.onStatus("connecting");
    const factory =
      this.opts.webSocketFactory ?? ((url: string) => new WebSocket(url));
    let socket: WebSocket;
    try {
      socket = factory(this.opts.url);
    } catch (err) {
      this.opts.onStatus("closed", String(err));
      this.scheduleReconnect();
      return;
    }
    this.socket = socket;

    socket.onopen = () => {
      this.attempts = 0;
      this.opts.onStatus("open");
    };
    socket.onmessage = (event: MessageEvent) => {
      try {
        const frame = JSON.parse(String(event.data)) as StateFrame;
        if (frame && frame.type === "frame") this.opts.onFrame(frame);
      } catch {
        // a malformed frame is dropped, never fatal
      }
    };
    socket.onclose = () => {
      if (this.socket === socket) this.socket = null;
      this.opts.onStatus("closed");
      this.scheduleReconnect();
    };
    socket.onerror = () => {
      // onclose follows; nothing else to do here
    };
  }

  private scheduleReconnect(): void {
    if (this.stopped) return;
    const schedule = this.opts.backoffMs ?? DEFAULT_BACKOFF_MS;
    const delay = schedule[Math.min(this.attempts, schedule.length - 1)];
    this.attempts += 1;
    this.timer = setTimeout(() => this.connect(), delay);
  }
}
