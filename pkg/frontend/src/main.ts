/** Browser wiring: builds the session against the hosting service, pumps
 * the event stream through the SSE parser, and repaints panels on change. */

import { ApiClient } from "./api.js";
import { emptyForm, intentDocumentFromForm, PRESETS } from "./form.js";
import { ConsoleSession, type StreamTransport } from "./session.js";
import { createSseParser } from "./sse.js";
import {
  renderCommandLog,
  renderFixedPointBanner,
  renderGatePanel,
  renderIntentBadge,
  renderIntentNotice,
  renderKpiCharts,
  renderResidualChart,
  renderUtilityChart,
} from "./views.js";

const fetchStreamTransport: StreamTransport = (url, onMessage, onDrop) => {
  const controller = new AbortController();
  const parse = createSseParser();
  void (async () => {
    try {
      const response = await fetch(url, { signal: controller.signal });
      if (!response.ok || response.body === null) throw new Error(`stream ${response.status}`);
      const reader = response.body.getReader();
      const decoder = new TextDecoder();
      for (;;) {
        const { done, value } = await reader.read();
        if (done) break;
        for (const message of parse(decoder.decode(value, { stream: true }))) {
          onMessage(message.event, message.data);
        }
      }
      onDrop();
    } catch (error) {
      if (!controller.signal.aborted) onDrop();
    }
  })();
  return { close: () => controller.abort() };
};

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing #${id}`);
  return node;
}

function main(): void {
  const base = window.location.origin;
  const api = new ApiClient(base);
  const session = new ConsoleSession(api, fetchStreamTransport);
  const form = emptyForm();

  const render = () => {
    el("intent-badge").innerHTML = renderIntentBadge(session.model);
    el("intent-notice").innerHTML = renderIntentNotice(session.model);
    el("banner").innerHTML = renderFixedPointBanner(session.model);
    el("kpi-charts").innerHTML = renderKpiCharts(session.model, session.model.activeIntent);
    el("utility-chart").innerHTML = renderUtilityChart(session.model);
    el("residual-chart").innerHTML = renderResidualChart(session.model);
    el("command-log").innerHTML = renderCommandLog(session.model);
    el("gate-panel").innerHTML = renderGatePanel(session.model);
    el("tick").textContent = String(Math.max(session.model.lastTick, 0));
  };

  const presetSelect = el("objective") as HTMLSelectElement;
  for (const preset of [...PRESETS, "custom_weights"]) {
    const option = document.createElement("option");
    option.value = preset;
    option.textContent = preset;
    presetSelect.appendChild(option);
  }

  el("intent-form").addEventListener("submit", (event) => {
    event.preventDefault();
    form.objective = (el("objective") as HTMLSelectElement).value;
    form.weights = [
      (el("w-throughput") as HTMLInputElement).value,
      (el("w-latency") as HTMLInputElement).value,
      (el("w-energy") as HTMLInputElement).value,
    ];
    form.scopeCells = (el("scope-cells") as HTMLInputElement).value;
    form.windowStart = (el("window-start") as HTMLInputElement).value;
    form.windowEnd = (el("window-end") as HTMLInputElement).value;
    const metric = (el("c-metric") as HTMLSelectElement).value;
    const value = (el("c-value") as HTMLInputElement).value;
    form.constraints = metric && value
      ? [{ metric, comparator: (el("c-comparator") as HTMLSelectElement).value, value }]
      : [];
    const result = intentDocumentFromForm(form);
    if (!result.ok) {
      session.model.noteIntentError(result.reason, result.field);
      render();
      return;
    }
    void session.submitIntent(result.document).then(render);
  });

  document.body.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const id = target.dataset["id"];
    if (id && target.classList.contains("approve")) {
      void session.decideGate(id, "approve").then(render);
    } else if (id && target.classList.contains("reject")) {
      void session.decideGate(id, "reject").then(render);
    } else if (target.classList.contains("retry-intent")) {
      (el("intent-form") as HTMLFormElement).requestSubmit();
    }
  });

  void session.start().then(render);
  window.setInterval(() => {
    void session.resync().then(render);
  }, 2000);
  window.setInterval(render, 500);
}

main();
