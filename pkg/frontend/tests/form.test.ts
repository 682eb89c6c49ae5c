import { describe, expect, it } from "vitest";

import { emptyForm, intentDocumentFromForm } from "../src/form.js";
import { ConsoleModel } from "../src/model.js";
import { renderGatePanel, renderIntentBadge, renderIntentNotice } from "../src/views.js";

describe("intent form mapping", () => {
  it("maps a preset to a bare objective document", () => {
    const form = { ...emptyForm(), objective: "minimize_energy" };
    expect(intentDocumentFromForm(form)).toEqual({
      ok: true,
      document: { objective: "minimize_energy" },
    });
  });

  it("rejects an empty objective locally", () => {
    const result = intentDocumentFromForm(emptyForm());
    expect(result).toEqual({ ok: false, field: "objective", reason: "choose an objective" });
  });

  it("carries custom weights and validates them", () => {
    const form = {
      ...emptyForm(),
      objective: "custom_weights",
      weights: ["0.5", "-1", "0"] as [string, string, string],
    };
    const result = intentDocumentFromForm(form);
    expect(result.ok && result.document.weights).toEqual([0.5, -1, 0]);
    const zero = { ...form, weights: ["0", "0", "0"] as [string, string, string] };
    expect(intentDocumentFromForm(zero)).toMatchObject({ ok: false, field: "weights" });
  });

  it("builds constraints with field-level errors", () => {
    const form = {
      ...emptyForm(),
      objective: "maximize_throughput",
      constraints: [{ metric: "throughput", comparator: ">=", value: "0.5" }],
    };
    const result = intentDocumentFromForm(form);
    expect(result.ok && result.document.constraints).toEqual([
      { metric: "throughput", comparator: ">=", value: 0.5 },
    ]);
    const bad = {
      ...form,
      constraints: [{ metric: "jitter", comparator: ">=", value: "1" }],
    };
    expect(intentDocumentFromForm(bad)).toMatchObject({
      ok: false,
      field: "constraints[0].metric",
    });
  });

  it("parses scope cells and tick window", () => {
    const form = {
      ...emptyForm(),
      objective: "minimize_energy",
      scopeCells: "cell_0, cell_2",
      windowStart: "0",
      windowEnd: "600",
    };
    const result = intentDocumentFromForm(form);
    expect(result.ok && result.document.scope).toEqual({
      cells: ["cell_0", "cell_2"],
      window: [0, 600],
    });
    const inverted = { ...form, windowStart: "10", windowEnd: "5" };
    expect(intentDocumentFromForm(inverted)).toMatchObject({ ok: false, field: "scope.window" });
  });
});

describe("panel rendering", () => {
  it("badge reflects pending then active intent", () => {
    const model = new ConsoleModel();
    expect(renderIntentBadge(model)).toContain("no intent");
    model.noteIntentAccepted({
      accepted: true,
      objective: "minimize_energy",
      weights: [0, 0, -1],
      effective: "next-boundary",
    });
    expect(renderIntentBadge(model)).toContain("minimize_energy pending");
    model.applyRecord({
      tick: 1,
      state_digest: "x",
      context_digest: "y",
      commands: "noop()",
      messages: { a1: [], e2: [], o1: [] },
      kpis: { throughput: 1, latency: 0, energy: 2 },
      utility: -0.1,
      residual: 0,
      tier: "non-rt",
      audit: ["intent-replaced: minimize_energy"],
    });
    const badge = renderIntentBadge(model);
    expect(badge).toContain('class="badge active"');
    expect(badge).not.toContain("pending");
  });

  it("intent errors render with the field path and a retry button when retryable", () => {
    const model = new ConsoleModel();
    model.noteIntentError("connection refused", undefined, true);
    expect(renderIntentNotice(model)).toContain("retry");
    model.noteIntentError("must be one of ...", "objective", false);
    const html = renderIntentNotice(model);
    expect(html).toContain("objective");
    expect(html).not.toContain("retry-intent");
  });

  it("gate panel shows approve/reject only while pending", () => {
    const model = new ConsoleModel();
    model.applyGateProposal({ decision_id: "d1", commands: "set_power(cell_0=0dBm)", created_tick: 4 });
    let html = renderGatePanel(model);
    expect(html).toContain("approve");
    expect(html).toContain("reject");
    model.markGate("d1", "conflict", "already resolved");
    html = renderGatePanel(model);
    expect(html).not.toContain(">approve<");
    expect(html).toContain("already resolved");
  });
});
