import { describe, expect, it } from "vitest";

import { ConsoleModel } from "../src/model.js";
import {
  diagnostics,
  intentAck,
  recordedEvents,
  trajectoryRecords,
} from "./fixtures.js";
import type { GateProposal, TrajectoryRecord } from "../src/types.js";

function modelFromTrajectory(): ConsoleModel {
  const model = new ConsoleModel();
  for (const record of trajectoryRecords) model.applyRecord(record);
  return model;
}

describe("intent badge lifecycle", () => {
  it("promotes the pending intent to active within one boundary", () => {
    const model = new ConsoleModel();
    model.applyRecord(trajectoryRecords[0]!); // tick 0, pre-intent
    model.noteIntentAccepted(intentAck);
    expect(model.pendingIntent).toBe("minimize_energy");
    expect(model.activeIntent).toBeNull();

    // the recorded run has non_rt_period = 5; the intent-replaced audit
    // arrives on the first boundary record, tick 1 — within one period
    const boundary = trajectoryRecords.find((r) =>
      r.audit.some((a) => a.startsWith("intent-replaced")),
    )!;
    expect(boundary.tick - trajectoryRecords[0]!.tick).toBeLessThanOrEqual(5);
    for (const record of trajectoryRecords.slice(1)) {
      model.applyRecord(record);
      if (record.tick >= boundary.tick) break;
    }
    expect(model.activeIntent).toBe("minimize_energy");
    expect(model.pendingIntent).toBeNull();
    expect(model.activeIntentSinceTick).toBe(boundary.tick);
  });
});

describe("rejected gate decision", () => {
  it("shows a noop boundary carrying the operator-rejected audit", () => {
    const model = modelFromTrajectory();
    const rejectedRows = model.commandLog.filter((e) => e.kind === "operator-rejected");
    expect(rejectedRows.length).toBe(1);
    const row = rejectedRows[0]!;
    expect(row.commands).toBe("noop()");
    expect(row.audit.some((a) => a.startsWith("operator-rejected: d1"))).toBe(true);
    expect(model.gates.get("d1")?.status).toBe("rejected");
  });

  it("marks approved gates from the audit trail", () => {
    const model = modelFromTrajectory();
    expect(model.gates.get("d2")?.status).toBe("approved");
    const approved = model.commandLog.find((e) =>
      e.audit.some((a) => a.startsWith("gate-approved: d2")),
    )!;
    expect(approved.commands).toContain("set_power");
  });
});

describe("refresh reconstruction", () => {
  it("replaying /trajectory rebuilds identical KPI series", () => {
    // live path: the initial resync (tick 0 predates any subscription)
    // followed by the streamed events; refresh path: trajectory replay
    const live = new ConsoleModel();
    live.applyRecord(trajectoryRecords[0]!);
    for (const event of recordedEvents) {
      if (event.event === "record") live.applyRecord(event.data as TrajectoryRecord);
      else live.applyGateProposal(event.data as GateProposal);
    }
    const refreshed = modelFromTrajectory();
    expect(refreshed.series).toEqual(live.series);
    expect(refreshed.commandLog).toEqual(live.commandLog);
  });

  it("records apply idempotently across resync overlap", () => {
    const model = new ConsoleModel();
    for (const record of trajectoryRecords) model.applyRecord(record);
    const before = JSON.stringify(model.series);
    for (const record of trajectoryRecords) {
      expect(model.applyRecord(record)).toBe(false);
    }
    expect(JSON.stringify(model.series)).toBe(before);
  });

  it("every series point carries its source tick", () => {
    const model = modelFromTrajectory();
    expect(model.series.ticks.length).toBe(model.series.energy.length);
    expect(model.series.ticks[0]).toBe(trajectoryRecords[0]!.tick);
    expect(model.lastTick).toBe(trajectoryRecords[trajectoryRecords.length - 1]!.tick);
  });
});

describe("diagnostics", () => {
  it("feeds the fixed-point banner and tolerance line", () => {
    const model = modelFromTrajectory();
    model.applyDiagnostics(diagnostics);
    expect(model.residualTolerance).toBe(diagnostics.residual_tolerance);
    expect(model.fixedPoint).toEqual(diagnostics.fixed_point);
  });
});
