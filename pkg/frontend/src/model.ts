/** Console view state. The model owns no truth: every number it exposes
 * came from a service record (carrying its tick and digest), so replaying
 * the same records always rebuilds identical views — that is what makes a
 * page refresh reproducible from /trajectory. */

import type {
  Diagnostics,
  FixedPoint,
  GateProposal,
  IntentAck,
  TrajectoryRecord,
} from "./types.js";

export interface Series {
  ticks: number[];
  throughput: number[];
  latency: number[];
  energy: number[];
  utility: (number | null)[];
  residual: number[];
}

export interface CommandLogEntry {
  tick: number;
  commands: string;
  audit: string[];
  kind: "issued" | "noop" | "rejected" | "operator-rejected" | "fault";
}

export type GateStatus = "pending" | "approved" | "rejected" | "conflict";

export interface GateRow {
  proposal: GateProposal;
  status: GateStatus;
  note?: string;
}

export interface IntentNotice {
  kind: "accepted" | "error";
  text: string;
  path?: string;
  retryable?: boolean;
}

function logKind(record: TrajectoryRecord): CommandLogEntry["kind"] {
  for (const entry of record.audit) {
    if (entry.startsWith("policy-fault")) return "fault";
    if (entry.startsWith("gate-rejected")) return "rejected";
    if (entry.startsWith("operator-rejected")) return "operator-rejected";
  }
  return record.commands === "noop()" || record.commands === "" ? "noop" : "issued";
}

export class ConsoleModel {
  readonly series: Series = {
    ticks: [],
    throughput: [],
    latency: [],
    energy: [],
    utility: [],
    residual: [],
  };
  readonly commandLog: CommandLogEntry[] = [];
  readonly gates = new Map<string, GateRow>();
  activeIntent: string | null = null;
  activeIntentSinceTick: number | null = null;
  pendingIntent: string | null = null;
  intentNotice: IntentNotice | null = null;
  fixedPoint: FixedPoint | null = null;
  residualTolerance: number | null = null;
  lastTick = -1;

  /** Records may arrive twice around a resubscribe; only strictly newer
   * ticks are applied, so replays are idempotent. */
  applyRecord(record: TrajectoryRecord): boolean {
    if (record.tick <= this.lastTick) return false;
    this.lastTick = record.tick;
    this.series.ticks.push(record.tick);
    this.series.throughput.push(record.kpis.throughput);
    this.series.latency.push(record.kpis.latency);
    this.series.energy.push(record.kpis.energy);
    this.series.utility.push(record.utility);
    this.series.residual.push(record.residual);

    for (const entry of record.audit) {
      if (entry.startsWith("intent-replaced:")) {
        this.activeIntent = entry.slice("intent-replaced:".length).trim();
        this.activeIntentSinceTick = record.tick;
        if (this.pendingIntent === this.activeIntent) this.pendingIntent = null;
      } else if (entry.startsWith("operator-rejected:")) {
        this.markGate(entry.slice("operator-rejected:".length).trim(), "rejected");
      } else if (entry.startsWith("gate-approved:")) {
        this.markGate(entry.slice("gate-approved:".length).trim(), "approved");
      }
    }

    if (record.tier === "non-rt") {
      this.commandLog.push({
        tick: record.tick,
        commands: record.commands,
        audit: record.audit,
        kind: logKind(record),
      });
    }
    return true;
  }

  applyGateProposal(proposal: GateProposal): void {
    const existing = this.gates.get(proposal.decision_id);
    if (existing && existing.status !== "pending") return;
    this.gates.set(proposal.decision_id, { proposal, status: "pending" });
  }

  markGate(decisionId: string, status: GateStatus, note?: string): void {
    const row = this.gates.get(decisionId);
    if (row) {
      row.status = status;
      row.note = note;
    } else {
      this.gates.set(decisionId, {
        proposal: { decision_id: decisionId, commands: "", created_tick: -1 },
        status,
        note,
      });
    }
  }

  pendingGates(): GateRow[] {
    return [...this.gates.values()].filter((g) => g.status === "pending");
  }

  noteIntentAccepted(ack: IntentAck): void {
    this.pendingIntent = ack.objective;
    this.intentNotice = {
      kind: "accepted",
      text: `${ack.objective} accepted (w = [${ack.weights.join(", ")}]), effective ${ack.effective}`,
    };
  }

  noteIntentError(reason: string, path?: string, retryable?: boolean): void {
    this.intentNotice = { kind: "error", text: reason, path, retryable };
  }

  applyDiagnostics(diagnostics: Diagnostics): void {
    this.fixedPoint = diagnostics.fixed_point;
    this.residualTolerance = diagnostics.residual_tolerance;
    if (diagnostics.active_intent !== null && this.pendingIntent === null) {
      this.activeIntent = diagnostics.active_intent;
    }
  }
}
