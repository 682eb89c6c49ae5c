/** Intent form state -> intent document, with local validation mirroring
 * the service's field paths so errors land on the right inputs. */

import type { IntentConstraint, IntentDocument } from "./types.js";

export interface ConstraintRow {
  metric: string;
  comparator: string;
  value: string;
}

export interface IntentFormState {
  objective: string; // "" until chosen
  weights: [string, string, string]; // only read for custom_weights
  constraints: ConstraintRow[];
  scopeCells: string; // comma-separated, "" = unscoped
  windowStart: string;
  windowEnd: string;
}

export const PRESETS = ["maximize_throughput", "minimize_latency", "minimize_energy"] as const;

export type FormResult =
  | { ok: true; document: IntentDocument }
  | { ok: false; field: string; reason: string };

export function emptyForm(): IntentFormState {
  return {
    objective: "",
    weights: ["1", "0", "0"],
    constraints: [],
    scopeCells: "",
    windowStart: "",
    windowEnd: "",
  };
}

export function intentDocumentFromForm(form: IntentFormState): FormResult {
  if (form.objective === "") {
    return { ok: false, field: "objective", reason: "choose an objective" };
  }
  const document: IntentDocument = { objective: form.objective };

  if (form.objective === "custom_weights") {
    const weights = form.weights.map((w) => Number(w));
    if (weights.some((w) => !Number.isFinite(w))) {
      return { ok: false, field: "weights", reason: "weights must be numbers" };
    }
    if (weights.every((w) => w === 0)) {
      return { ok: false, field: "weights", reason: "weights must not be all zero" };
    }
    document.weights = weights as [number, number, number];
  }

  const constraints: IntentConstraint[] = [];
  for (let i = 0; i < form.constraints.length; i++) {
    const row = form.constraints[i]!;
    if (row.metric === "" && row.value === "") continue; // blank row
    if (!["throughput", "latency", "energy"].includes(row.metric)) {
      return { ok: false, field: `constraints[${i}].metric`, reason: "pick a KPI" };
    }
    if (row.comparator !== "<=" && row.comparator !== ">=") {
      return { ok: false, field: `constraints[${i}].comparator`, reason: "pick <= or >=" };
    }
    const value = Number(row.value);
    if (!Number.isFinite(value)) {
      return { ok: false, field: `constraints[${i}].value`, reason: "value must be a number" };
    }
    constraints.push({
      metric: row.metric as IntentConstraint["metric"],
      comparator: row.comparator,
      value,
    });
  }
  if (constraints.length > 0) document.constraints = constraints;

  const cells = form.scopeCells
    .split(",")
    .map((c) => c.trim())
    .filter((c) => c.length > 0);
  const hasWindow = form.windowStart !== "" || form.windowEnd !== "";
  if (cells.length > 0 || hasWindow) {
    document.scope = {};
    if (cells.length > 0) document.scope.cells = cells;
    if (hasWindow) {
      const start = Number(form.windowStart);
      const end = Number(form.windowEnd);
      if (
        !Number.isInteger(start) ||
        !Number.isInteger(end) ||
        start < 0 ||
        end < start
      ) {
        return {
          ok: false,
          field: "scope.window",
          reason: "window must be integer ticks with start <= end",
        };
      }
      document.scope.window = [start, end];
    }
  }
  return { ok: true, document };
}
