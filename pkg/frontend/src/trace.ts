// Trace bookkeeping for one submitted instruction. Events may arrive twice
// (once in the POST reply, again over the frame feed) and out of order;
// the store deduplicates and presents them sorted by pipeline stage.

import type { TraceEvent } from "./types";

export const STAGE_LABELS: Record<string, string> = {
  injected: "utterance received",
  relevance: "relevance verdict",
  retrieval: "knowledge retrieved",
  generation: "program generated",
  program_validation: "program validated",
  rule_match: "rule lookup",
  decision: "decision",
  override: "override applied",
  expiry: "override expired",
};

export class TraceStore {
  private events: TraceEvent[] = [];
  private seen = new Set<string>();

  add(event: TraceEvent): boolean {
    const key = `${event.stage_index}|${event.t}|${JSON.stringify(event.data)}`;
    if (this.seen.has(key)) return false;
    this.seen.add(key);
    this.events.push(event);
    return true;
  }

  addAll(events: TraceEvent[]): number {
    let added = 0;
    for (const event of events) if (this.add(event)) added += 1;
    return added;
  }

  /** Pipeline order regardless of arrival jitter: stage index, then time. */
  ordered(): TraceEvent[] {
    return [...this.events].sort(
      (a, b) => a.stage_index - b.stage_index || a.t - b.t,
    );
  }

  stages(): string[] {
    return this.ordered().map((event) => event.stage);
  }

  decision(): TraceEvent | undefined {
    return this.ordered().find((event) => event.stage === "decision");
  }

  isTerminal(): boolean {
    const decision = this.decision();
    if (decision === undefined) {
      // irrelevant utterances end at the relevance verdict
      const relevance = this.events.find((e) => e.stage === "relevance");
      return relevance !== undefined && relevance.data["relevant"] === false;
    }
    return true;
  }

  summary(): string {
    const decision = this.decision();
    if (decision === undefined) {
      return this.isTerminal() ? "not a driving instruction" : "in progress";
    }
    if (decision.data["activated"] === true) return "activated";
    const reason = decision.data["reason"] ?? decision.data["conflict"] ?? "rejected";
    return `rejected: ${String(reason)}`;
  }
}
