import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import type {
  Diagnostics,
  GateProposal,
  IntentAck,
  StateSnapshot,
  TrajectoryRecord,
} from "../src/types.js";

const here = dirname(fileURLToPath(import.meta.url));

function load<T>(name: string): T {
  return JSON.parse(readFileSync(join(here, "fixtures", name), "utf-8")) as T;
}

export interface RecordedEvent {
  event: "record" | "gate";
  data: TrajectoryRecord | GateProposal;
}

export const recordedEvents = load<RecordedEvent[]>("events.json");
export const diagnostics = load<Diagnostics>("diagnostics.json");
export const stateSnapshot = load<StateSnapshot>("state.json");
export const intentAck = load<IntentAck>("intent_ack.json");
export const intentError = load<{ error: { reason: string; path: string } }>("intent_error.json");
export const gateConflict = load<{ error: { reason: string } }>("gate_conflict.json");

export const trajectoryRecords: TrajectoryRecord[] = readFileSync(
  join(here, "fixtures", "trajectory.jsonl"),
  "utf-8",
)
  .split("\n")
  .filter((line) => line.trim().length > 0)
  .map((line) => JSON.parse(line) as TrajectoryRecord);

export const trajectoryJsonl = readFileSync(join(here, "fixtures", "trajectory.jsonl"), "utf-8");
