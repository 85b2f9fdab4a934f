// DOM wiring for the console. All gateway mutation goes through
// GatewayClient.submitInstruction / selectScenario; everything shown is
// taken from the latest frame (no client-side extrapolation).

import { GatewayClient, GatewayError } from "./api";
import { renderMap } from "./map";
import { StateFeed } from "./socket";
import { STAGE_LABELS, TraceStore } from "./trace";
import type { StateFrame, TraceEvent, WorldDoc } from "./types";

interface TracePanel {
  requestId: string;
  text: string;
  store: TraceStore;
  element: HTMLElement;
}

export class ConsoleApp {
  private readonly client: GatewayClient;
  private world: WorldDoc | null = null;
  private lastFrame: StateFrame | null = null;
  private panels = new Map<string, TracePanel>();
  private history: string[] = [];

  private banner!: HTMLElement;
  private mapHost!: HTMLElement;
  private statusLine!: HTMLElement;
  private overridesHost!: HTMLElement;
  private traceHost!: HTMLElement;
  private historyHost!: HTMLElement;
  private input!: HTMLInputElement;
  private inputError!: HTMLElement;
  private scenarioSelect!: HTMLSelectElement;

  constructor(private readonly root: HTMLElement, baseUrl: string) {
    this.client = new GatewayClient(baseUrl);
    this.buildDom();
    const wsUrl = baseUrl.replace(/^http/, "ws") + "/ws/state";
    new StateFeed({
      url: wsUrl,
      onFrame: (frame) => this.onFrame(frame),
      onStatus: (status, detail) => {
        this.banner.dataset.status = status;
        this.banner.textContent =
          status === "open" ? "connected"
            : status === "connecting" ? "connecting…"
              : `disconnected — retrying${detail ? ` (${detail})` : ""}`;
      },
    }).start();
    void this.refreshScenarios();
    void this.refreshWorld();
  }

  private buildDom(): void {
    this.root.innerHTML = "";
    this.banner = el("div", "banner");
    this.banner.textContent = "connecting…";

    const controls = el("div", "controls");
    this.scenarioSelect = document.createElement("select");
    this.scenarioSelect.onchange = () => void this.onScenarioChange();
    controls.append(this.scenarioSelect);

    this.input = document.createElement("input");
    this.input.placeholder = "tell the vehicle something…";
    this.input.onkeydown = (event) => {
      if (event.key === "Enter") void this.submit(this.input.value);
    };
    const send = document.createElement("button");
    send.textContent = "send";
    send.onclick = () => void this.submit(this.input.value);
    this.inputError = el("span", "input-error");
    controls.append(this.input, send, this.inputError);

    this.mapHost = el("div", "map");
    this.statusLine = el("div", "status-line");
    this.overridesHost = el("div", "overrides");
    this.traceHost = el("div", "traces");
    this.historyHost = el("div", "history");

    this.root.append(this.banner, controls, this.mapHost, this.statusLine,
                     this.overridesHost, this.traceHost, this.historyHost);
  }

  private async refreshScenarios(): Promise<void> {
    try {
      const doc = await this.client.listScenarios();
      this.scenarioSelect.innerHTML = "";
      for (const name of doc.scenarios) {
        const option = document.createElement("option");
        option.value = name;
        option.textContent = name;
        option.selected = name === doc.active;
        this.scenarioSelect.append(option);
      }
    } catch {
      // banner already reflects connectivity trouble
    }
  }

  private async refreshWorld(): Promise<void> {
    try {
      this.world = await this.client.fetchWorld();
      this.redrawMap();
    } catch {
      // retried on the next scenario change / frame
    }
  }

  private async onScenarioChange(): Promise<void> {
    try {
      await this.client.selectScenario(this.scenarioSelect.value);
      this.panels.clear();
      this.traceHost.innerHTML = "";
      await this.refreshWorld();
    } catch (err) {
      this.inputError.textContent = String(err);
    }
  }

  async submit(text: string): Promise<void> {
    this.inputError.textContent = "";
    const trimmed = text.trim();
    if (!trimmed) return;
    try {
      const reply = await this.client.submitInstruction(trimmed);
      this.recordHistory(trimmed);
      const store = new TraceStore();
      store.addAll(reply.events);
      const element = el("div", "trace-panel");
      element.dataset.requestId = reply.id;
      const panel: TracePanel = { requestId: reply.id, text: trimmed, store, element };
      this.panels.set(reply.id, panel);
      this.traceHost.prepend(element);
      this.renderPanel(panel);
      this.input.value = "";
    } catch (err) {
      this.inputError.textContent =
        err instanceof GatewayError ? `rejected (${err.status}): ${err.message}`
          : String(err);
    }
  }

  private recordHistory(text: string): void {
    this.history = [text, ...this.history.filter((t) => t !== text)].slice(0, 12);
    this.historyHost.innerHTML = "";
    const title = el("div", "history-title");
    title.textContent = "history";
    this.historyHost.append(title);
    for (const item of this.history) {
      const button = document.createElement("button");
      button.className = "history-item";
      button.textContent = item;
      button.onclick = () => void this.submit(item);
      this.historyHost.append(button);
    }
  }

  private onFrame(frame: StateFrame): void {
    this.lastFrame = frame;
    for (const event of frame.events) {
      const requestId = event.data["request_id"];
      if (typeof requestId === "string") {
        const panel = this.panels.get(requestId);
        if (panel && panel.store.add(event)) this.renderPanel(panel);
      }
    }
    this.statusLine.textContent =
      `t=${frame.time.toFixed(1)}s  ${frame.motion_state}` +
      (frame.stop_reason ? ` (${frame.stop_reason})` : "") +
      `  speed ${frame.vehicle.speed.toFixed(1)} m/s  ` +
      `lane ${frame.vehicle.lane_id}  perceptions: ` +
      (frame.perceptions.join(", ") || "none");
    this.renderOverrides(frame);
    this.redrawMap();
  }

  private renderOverrides(frame: StateFrame): void {
    this.overridesHost.innerHTML = "";
    for (const override of frame.overrides) {
      const row = el("div", "override-row");
      row.textContent =
        `${override.path} = ${String(override.value)} — ` +
        `${override.remaining.toFixed(1)} s left`;
      this.overridesHost.append(row);
    }
  }

  private renderPanel(panel: TracePanel): void {
    panel.element.innerHTML = "";
    const head = el("div", "trace-head");
    head.textContent = `"${panel.text}" — ${panel.store.summary()}`;
    panel.element.append(head);
    for (const event of panel.store.ordered()) {
      const row = el("div", "trace-row");
      row.dataset.stage = event.stage;
      row.textContent =
        `${STAGE_LABELS[event.stage] ?? event.stage} @ ${event.t.toFixed(1)}s ` +
        summarize(event);
      panel.element.append(row);
    }
  }

  private redrawMap(): void {
    if (this.world === null || this.lastFrame === null) return;
    this.mapHost.innerHTML = renderMap({
      world: this.world,
      vehicle: this.lastFrame.vehicle,
      lights: this.lastFrame.lights,
      overrides: this.lastFrame.overrides,
    });
  }
}

function summarize(event: TraceEvent): string {
  const data = event.data;
  switch (event.stage) {
    case "relevance":
      return data["relevant"] ? "yes" : "no";
    case "retrieval": {
      const results = data["results"] as { entry_id: string; score: number }[];
      return results.map((r) => `${r.entry_id} (${r.score.toFixed(2)})`).join(", ");
    }
    case "generation":
      return typeof data["autoir"] === "string"
        ? (data["autoir"] as string).split("\n").join(" · ")
        : `failed: ${String(data["error"] ?? "")}`;
    case "rule_match":
      return data["found"] ? "rule found" : "no rule — ignored";
    case "decision":
      return data["activated"] ? `activated for ${String(data["effective_timer"])}s`
        : `rejected: ${String(data["reason"] ?? data["conflict"] ?? "")}`;
    case "override":
      return `${String(data["path"])} ${String(data["old"])} → ${String(data["new"])}`;
    case "expiry":
      return data["restored"] ? "original value restored" : "expired";
    default:
      return "";
  }
}

function el(tag: string, className: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  return node;
}
