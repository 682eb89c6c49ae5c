/** Live connection management: one subscription at a time, resyncing from
 * /trajectory on every (re)connect so no tick is ever missed or shown
 * twice. All service mutations funnel through submitIntent / decideGate. */

import type { ApiClient } from "./api.js";
import { ConsoleModel } from "./model.js";
import type { GateProposal, IntentDocument, TrajectoryRecord } from "./types.js";

export interface StreamHandle {
  close(): void;
}

/** Transport that delivers parsed SSE messages; injectable for tests. The
 * browser implementation streams fetch chunks through the SSE parser. */
export type StreamTransport = (
  url: string,
  onMessage: (event: string, data: string) => void,
  onDrop: () => void,
) => StreamHandle;

export class ConsoleSession {
  readonly model = new ConsoleModel();
  private handle: StreamHandle | null = null;
  private closed = false;
  reconnects = 0;

  constructor(
    private readonly api: ApiClient,
    private readonly transport: StreamTransport,
    private readonly retryDelayMs = 1000,
    private readonly schedule: (fn: () => void, ms: number) => void = (fn, ms) =>
      void setTimeout(fn, ms),
  ) {}

  /** Catch up from the trajectory, then (re)open the single live stream. */
  async start(): Promise<void> {
    await this.resync();
    this.connect();
  }

  stop(): void {
    this.closed = true;
    this.handle?.close();
    this.handle = null;
  }

  /** Pull every record the model has not seen yet. */
  async resync(): Promise<void> {
    const result = await this.api.getTrajectory(this.model.lastTick + 1);
    if (result.ok) {
      for (const record of result.value) this.model.applyRecord(record);
    }
    const diagnostics = await this.api.getDiagnostics();
    if (diagnostics.ok) this.model.applyDiagnostics(diagnostics.value);
    const gates = await this.api.getPendingGates();
    if (gates.ok) for (const proposal of gates.value) this.model.applyGateProposal(proposal);
  }

  private connect(): void {
    if (this.closed) return;
    this.handle?.close(); // invariant: at most one live subscription
    this.handle = this.transport(
      this.api.eventsUrl(),
      (event, data) => this.onMessage(event, data),
      () => this.onDrop(),
    );
  }

  private onMessage(event: string, data: string): void {
    let payload: unknown;
    try {
      payload = JSON.parse(data);
    } catch {
      return; // tolerate malformed frames; the next resync repairs any gap
    }
    if (event === "gate") {
      this.model.applyGateProposal(payload as GateProposal);
    } else {
      this.model.applyRecord(payload as TrajectoryRecord);
    }
  }

  private onDrop(): void {
    if (this.closed) return;
    this.reconnects += 1;
    this.schedule(() => {
      void this.resync().then(() => this.connect());
    }, this.retryDelayMs);
  }

  async submitIntent(document: IntentDocument): Promise<boolean> {
    const result = await this.api.postIntent(document);
    if (result.ok) {
      this.model.noteIntentAccepted(result.value);
      return true;
    }
    this.model.noteIntentError(result.reason, result.path, result.retryable);
    return false;
  }

  async decideGate(decisionId: string, decision: "approve" | "reject"): Promise<void> {
    const result = await this.api.postGate(decisionId, decision);
    if (result.ok) {
      this.model.markGate(decisionId, result.value.outcome === "approved" ? "approved" : "rejected");
      return;
    }
    if (result.status === 409) {
      this.model.markGate(decisionId, "conflict", result.reason);
    } else if (result.status === 404) {
      this.model.markGate(decisionId, "conflict", "decision expired or unknown");
    } else {
      this.model.markGate(decisionId, "pending", `retry: ${result.reason}`);
    }
  }
}
