// Thin HTTP client for the gateway. The console mutates gateway state only
// through submitInstruction and selectScenario; everything else is reads.

import type { TraceEvent, WorldDoc } from "./types";

export class GatewayError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

async function asJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = await response.json();
      detail = JSON.stringify(body.detail ?? body);
    } catch {
      // keep statusText
    }
    throw new GatewayError(response.status, detail);
  }
  return (await response.json()) as T;
}

export class GatewayClient {
  constructor(readonly baseUrl: string,
              private readonly fetchFn: typeof fetch = fetch) {}

  async listScenarios(): Promise<{ scenarios: string[]; active: string }> {
    return asJson(await this.fetchFn(`${this.baseUrl}/api/scenarios`));
  }

  async selectScenario(name: string): Promise<void> {
    await asJson(
      await this.fetchFn(`${this.baseUrl}/api/scenario`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ name }),
      }),
    );
  }

  async fetchWorld(): Promise<WorldDoc> {
    return asJson(await this.fetchFn(`${this.baseUrl}/api/world`));
  }

  async submitInstruction(text: string): Promise<{ id: string; events: TraceEvent[] }> {
    return asJson(
      await this.fetchFn(`${this.baseUrl}/api/instruction`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ text }),
      }),
    );
  }

  async fetchTrace(id: string): Promise<{ id: string; events: TraceEvent[] }> {
    return asJson(await this.fetchFn(`${this.baseUrl}/api/trace/${id}`));
  }
}
