/** HTML fragments for each panel, as pure functions of the model so the
 * same model state always renders the same markup. */

import { downsample, hLinePath, linePath, logBounds, logPath } from "./charts.js";
import type { CommandLogEntry, ConsoleModel, GateRow } from "./model.js";

const CHART_W = 560;
const CHART_H = 120;
const MAX_POINTS = 600;

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function svg(paths: string, extra = ""): string {
  return (
    `<svg viewBox="0 0 ${CHART_W} ${CHART_H}" preserveAspectRatio="none">` +
    `${extra}${paths}</svg>`
  );
}

function kpiChart(model: ConsoleModel, key: "throughput" | "latency" | "energy"): string {
  const ticks = downsample(model.series.ticks, MAX_POINTS);
  const values = downsample(model.series[key], MAX_POINTS);
  const path = linePath(ticks, values, CHART_W, CHART_H);
  const latest = model.series[key][model.series[key].length - 1];
  const label = latest === undefined ? "—" : latest.toPrecision(4);
  return (
    `<figure class="chart" data-kpi="${key}">` +
    `<figcaption>${key} <span class="latest">${label}</span></figcaption>` +
    svg(`<path class="line ${key}" d="${path}"/>`) +
    `</figure>`
  );
}

export function renderKpiCharts(model: ConsoleModel, highlight: string | null): string {
  const highlighted = (key: string) =>
    highlight !== null && highlight.includes(key) ? " highlighted" : "";
  return (
    `<div class="charts">` +
    `<div class="chart-wrap${highlighted("throughput")}">${kpiChart(model, "throughput")}</div>` +
    `<div class="chart-wrap${highlighted("latency")}">${kpiChart(model, "latency")}</div>` +
    `<div class="chart-wrap${highlighted("energy")}">${kpiChart(model, "energy")}</div>` +
    `</div>`
  );
}

export function renderUtilityChart(model: ConsoleModel): string {
  const ticks = downsample(model.series.ticks, MAX_POINTS);
  const utility = downsample(model.series.utility, MAX_POINTS);
  const path = linePath(ticks, utility, CHART_W, CHART_H);
  return (
    `<figure class="chart"><figcaption>utility U(s)</figcaption>` +
    svg(`<path class="line utility" d="${path}"/>`) +
    `</figure>`
  );
}

export function renderResidualChart(model: ConsoleModel): string {
  const ticks = downsample(model.series.ticks, MAX_POINTS);
  const residuals = downsample(model.series.residual, MAX_POINTS);
  const path = logPath(ticks, residuals, CHART_W, CHART_H);
  let tolerance = "";
  if (model.residualTolerance !== null && model.residualTolerance > 0) {
    const bounds = logBounds(residuals);
    const y = Math.log10(model.residualTolerance);
    if (y >= bounds.min && y <= bounds.max) {
      tolerance = `<path class="line tolerance" d="${hLinePath(y, CHART_W, CHART_H, bounds)}"/>`;
    }
  }
  return (
    `<figure class="chart"><figcaption>residual (log10) with tolerance</figcaption>` +
    svg(`<path class="line residual" d="${path}"/>`, tolerance) +
    `</figure>`
  );
}

export function renderIntentBadge(model: ConsoleModel): string {
  const active = model.activeIntent
    ? `<span class="badge active" data-since="${model.activeIntentSinceTick ?? ""}">` +
      `${esc(model.activeIntent)}</span>`
    : `<span class="badge none">no intent</span>`;
  const pending = model.pendingIntent
    ? ` <span class="badge pending">${esc(model.pendingIntent)} pending</span>`
    : "";
  return active + pending;
}

export function renderFixedPointBanner(model: ConsoleModel): string {
  if (model.fixedPoint === null) return "";
  return (
    `<div class="banner fixed-point">fixed point reached at tick ` +
    `${model.fixedPoint.tick} (digest ${esc(model.fixedPoint.state_digest)})</div>`
  );
}

function logRow(entry: CommandLogEntry): string {
  const audit = entry.audit.length
    ? `<div class="audit">${entry.audit.map(esc).join("<br>")}</div>`
    : "";
  return (
    `<tr class="log-${entry.kind}" data-tick="${entry.tick}">` +
    `<td>${entry.tick}</td><td><code>${esc(entry.commands)}</code>${audit}</td>` +
    `<td>${entry.kind}</td></tr>`
  );
}

export function renderCommandLog(model: ConsoleModel, limit = 50): string {
  const rows = model.commandLog.slice(-limit).reverse().map(logRow).join("");
  return (
    `<table class="command-log"><thead><tr><th>tick</th><th>commands</th>` +
    `<th>outcome</th></tr></thead><tbody>${rows}</tbody></table>`
  );
}

function gateRow(row: GateRow): string {
  const buttons =
    row.status === "pending"
      ? `<button class="approve" data-id="${esc(row.proposal.decision_id)}">approve</button>` +
        `<button class="reject" data-id="${esc(row.proposal.decision_id)}">reject</button>`
      : esc(row.note ?? row.status);
  return (
    `<tr class="gate-${row.status}"><td>${esc(row.proposal.decision_id)}</td>` +
    `<td><code>${esc(row.proposal.commands)}</code></td>` +
    `<td>${row.proposal.created_tick}</td><td>${buttons}</td></tr>`
  );
}

export function renderGatePanel(model: ConsoleModel): string {
  const rows = [...model.gates.values()].slice(-20).reverse().map(gateRow).join("");
  if (rows === "") return `<p class="gate-empty">no gate decisions yet</p>`;
  return (
    `<table class="gates"><thead><tr><th>id</th><th>proposal</th>` +
    `<th>tick</th><th>decision</th></tr></thead><tbody>${rows}</tbody></table>`
  );
}

export function renderIntentNotice(model: ConsoleModel): string {
  if (model.intentNotice === null) return "";
  const notice = model.intentNotice;
  if (notice.kind === "accepted") return `<p class="notice ok">${esc(notice.text)}</p>`;
  const retry = notice.retryable ? ` <button class="retry-intent">retry</button>` : "";
  const where = notice.path ? ` (field ${esc(notice.path)})` : "";
  return `<p class="notice error">${esc(notice.text)}${where}${retry}</p>`;
}
