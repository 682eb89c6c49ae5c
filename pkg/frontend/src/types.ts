/** Wire shapes of the loop service. These mirror the JSON the service
 * actually emits; the fixture tests pin them against recorded payloads. */

export interface KpiTriple {
  throughput: number;
  latency: number;
  energy: number;
}

export interface TrajectoryRecord {
  tick: number;
  state_digest: string;
  context_digest: string;
  commands: string;
  messages: { a1: unknown[]; e2: unknown[]; o1: unknown[] };
  kpis: KpiTriple;
  utility: number | null;
  residual: number;
  tier: "near-rt" | "non-rt";
  audit: string[];
}

export interface GateProposal {
  decision_id: string;
  commands: string;
  created_tick: number;
}

export interface FixedPoint {
  tick: number;
  state_digest: string;
}

export interface Diagnostics {
  tick: number;
  running: boolean;
  converged: boolean;
  fixed_point: FixedPoint | null;
  residuals: number[];
  residual_tolerance: number;
  lipschitz_estimate: number | null;
  faults: number;
  active_intent: string | null;
  gate_mode: string;
}

export interface StateSnapshot {
  tick: number;
  tokens: string[];
  digest: string;
  kpis: KpiTriple;
  utility: number | null;
  active_intent: string | null;
}

export interface IntentAck {
  accepted: boolean;
  objective: string;
  weights: number[];
  effective: string;
}

export interface IntentConstraint {
  metric: "throughput" | "latency" | "energy";
  comparator: "<=" | ">=";
  value: number;
  units?: string;
}

export interface IntentDocument {
  objective: string;
  weights?: [number, number, number];
  constraints?: IntentConstraint[];
  scope?: { cells?: string[]; window?: [number, number] };
}

export type StreamEvent =
  | { event: "record"; data: TrajectoryRecord }
  | { event: "gate"; data: GateProposal };
