/** Typed client for the loop service. Every mutation the console can make
 * goes through here, and there are exactly two: posting an intent and
 * resolving a gate decision. */

import type {
  Diagnostics,
  GateProposal,
  IntentAck,
  IntentDocument,
  StateSnapshot,
  TrajectoryRecord,
} from "./types.js";

export type ApiResult<T> =
  | { ok: true; value: T }
  | { ok: false; status: number; reason: string; path?: string; retryable: boolean };

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function errorOf(status: number, response: Response): Promise<ApiResult<never>> {
  let reason = `HTTP ${status}`;
  let path: string | undefined;
  try {
    const body = (await response.json()) as { error?: { reason?: string; path?: string } };
    if (body.error?.reason) reason = body.error.reason;
    path = body.error?.path;
  } catch {
    // non-JSON error body: keep the status text
  }
  return { ok: false, status, reason, path, retryable: status >= 500 };
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<ApiResult<T>> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.baseUrl + path, init);
    } catch (error) {
      return { ok: false, status: 0, reason: String(error), retryable: true };
    }
    if (!response.ok) return errorOf(response.status, response);
    return { ok: true, value: (await response.json()) as T };
  }

  postIntent(document: IntentDocument): Promise<ApiResult<IntentAck>> {
    return this.request("/intent", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(document),
    });
  }

  postGate(decisionId: string, decision: "approve" | "reject") {
    return this.request<{ decision_id: string; outcome: string }>(
      `/gate/${encodeURIComponent(decisionId)}`,
      {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ decision }),
      },
    );
  }

  getState(): Promise<ApiResult<StateSnapshot>> {
    return this.request("/state");
  }

  getDiagnostics(): Promise<ApiResult<Diagnostics>> {
    return this.request("/diagnostics");
  }

  getPendingGates(): Promise<ApiResult<GateProposal[]>> {
    return this.request("/gate");
  }

  /** JSONL page of records with tick >= fromTick. */
  async getTrajectory(fromTick: number): Promise<ApiResult<TrajectoryRecord[]>> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}/trajectory?from=${fromTick}`);
    } catch (error) {
      return { ok: false, status: 0, reason: String(error), retryable: true };
    }
    if (!response.ok) return errorOf(response.status, response);
    const text = await response.text();
    const records = text
      .split("\n")
      .filter((line) => line.trim().length > 0)
      .map((line) => JSON.parse(line) as TrajectoryRecord);
    return { ok: true, value: records };
  }

  eventsUrl(): string {
    return `${this.baseUrl}/events`;
  }
}
