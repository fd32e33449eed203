/** Browser bootstrap: wires the panels together over the JSON API.
 *
 * Everything here touches the DOM and is exercised manually in the browser;
 * the logic worth testing lives in the pure modules this file composes.
 */

import { ApiError, Client } from "./api.js";
import {
  renderCalibration,
  renderCascadeCard,
  renderComparison,
  renderErrorBanner,
  renderFieldHints,
  renderForecast,
  renderGraphSummary,
  renderHistoryList,
  renderRiskPanel,
  renderScenarioForm,
  type FormContext,
} from "./render.js";
import { ScenarioHistory } from "./state.js";
import type { RiskPayload, ScenariosPayload, WeeksPayload } from "./types.js";
import {
  buildStressRequest,
  validateStressRequest,
  type ScenarioFormState,
} from "./validation.js";

interface AppRefs {
  root: HTMLElement;
  client: Client;
  history: ScenarioHistory;
  weeks: WeeksPayload;
  scenarios: ScenariosPayload;
  risk: RiskPayload | null;
  prevRisk: RiskPayload | null;
  horizons: number[];
  hasModel: boolean;
}

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node;
}

function setHtml(id: string, html: string): void {
  el(id).innerHTML = html;
}

function showError(id: string, err: unknown): void {
  if (err instanceof ApiError) {
    setHtml(id, renderErrorBanner(err.status, err.detail));
  } else {
    setHtml(id, renderErrorBanner(0, String(err)));
  }
}

function readForm(root: HTMLElement): ScenarioFormState {
  const val = (id: string): string =>
    (root.querySelector(`#${id}`) as HTMLInputElement | HTMLSelectElement | null)?.value ?? "";
  const use =
    (root.querySelector('input[name="sf-use"]:checked') as HTMLInputElement | null)?.value ??
    "observed";
  return {
    week: val("sf-week"),
    name: val("sf-name"),
    kind: val("sf-kind"),
    n: val("sf-n"),
    sector: val("sf-sector"),
    ids: val("sf-ids")
      .split(",")
      .map((s) => s.trim())
      .filter((s) => s.length > 0),
    delta0: val("sf-delta0"),
    tau: val("sf-tau"),
    use,
    horizon: val("sf-horizon"),
  };
}

async function loadWeek(app: AppRefs, week: number): Promise<void> {
  try {
    const [summary, risk] = await Promise.all([
      app.client.getGraphSummary(week),
      app.client.getRisk(week),
    ]);
    const prevWeek = app.weeks.weeks[app.weeks.weeks.indexOf(week) - 1];
    app.prevRisk =
      prevWeek === undefined ? null : await app.client.getRisk(prevWeek).catch(() => null);
    app.risk = risk;
    setHtml("summary-slot", renderGraphSummary(summary));
    setHtml("risk-slot", renderRiskPanel(risk, app.prevRisk));
  } catch (err) {
    showError("risk-slot", err);
  }
}

function formContext(app: AppRefs): FormContext {
  return {
    weeks: app.weeks.weeks,
    latest: app.weeks.latest,
    presets: app.scenarios.scenarios,
    sectors: app.risk?.report.sectors ?? [],
    protocols: app.risk === null ? [] : Object.keys(app.risk.report.sis),
    horizons: app.horizons,
    hasModel: app.hasModel,
  };
}

function revalidate(app: AppRefs): void {
  const form = el("form-slot");
  const state = readForm(form);
  const req = buildStressRequest(state);
  const issues = validateStressRequest(req, {
    weeks: app.weeks.weeks,
    horizons: app.horizons,
    hasModel: app.hasModel,
    protocols: app.risk === null ? undefined : Object.keys(app.risk.report.sis),
  });
  setHtml("sf-hints", renderFieldHints(issues));
  const submit = form.querySelector("#sf-submit") as HTMLButtonElement | null;
  if (submit !== null) submit.disabled = issues.length > 0;
}

async function submitScenario(app: AppRefs): Promise<void> {
  const form = el("form-slot");
  const req = buildStressRequest(readForm(form));
  try {
    const entry = await app.history.submit(app.client, req);
    setHtml("cascade-slot", renderCascadeCard(entry));
    refreshHistory(app);
  } catch (err) {
    showError("cascade-slot", err);
  }
}

function refreshHistory(app: AppRefs): void {
  setHtml("history-slot", renderHistoryList(app.history.entries, app.history.selected));
  setHtml("compare-slot", renderComparison(app.history.comparison()));
}

function exportHistory(app: AppRefs): void {
  const blob = new Blob([app.history.exportJson()], { type: "application/json" });
  const a = document.createElement("a");
  a.href = URL.createObjectURL(blob);
  a.download = "scenario-history.json";
  a.click();
  URL.revokeObjectURL(a.href);
}

async function boot(): Promise<void> {
  const root = el("app");
  root.innerHTML =
    `<div id="banner-slot"></div>` +
    `<div class="layout">` +
    `<div><div id="summary-slot"></div><div id="risk-slot"></div></div>` +
    `<div><div id="form-slot"></div><div id="cascade-slot"></div>` +
    `<div id="history-slot"></div><div id="compare-slot"></div></div>` +
    `</div>` +
    `<div id="forecast-slot"></div><div id="calibration-slot"></div>`;

  const base =
    (window as { __EXPOSURE_API_BASE__?: string }).__EXPOSURE_API_BASE__ ?? "";
  const client = new Client(base);
  let weeks: WeeksPayload;
  let scenarios: ScenariosPayload;
  try {
    [weeks, scenarios] = await Promise.all([client.getWeeks(), client.getScenarios()]);
  } catch (err) {
    showError("banner-slot", err);
    return;
  }

  const forecast = await client.getForecast().catch(() => null);
  const app: AppRefs = {
    root,
    client,
    history: new ScenarioHistory(),
    weeks,
    scenarios,
    risk: null,
    prevRisk: null,
    horizons: forecast === null ? [] : Object.keys(forecast.horizons).map(Number).sort((a, b) => a - b),
    hasModel: forecast !== null,
  };

  if (weeks.latest !== null) {
    await loadWeek(app, weeks.latest);
  }
  setHtml("form-slot", renderScenarioForm(formContext(app)));
  revalidate(app);

  if (forecast !== null) {
    setHtml("forecast-slot", renderForecast(forecast));
    const firstHorizon = app.horizons[0];
    if (firstHorizon !== undefined) {
      await client
        .getCalibration(firstHorizon)
        .then((c) => setHtml("calibration-slot", renderCalibration(c)))
        .catch(() => undefined);
    }
  }

  el("form-slot").addEventListener("input", () => revalidate(app));
  el("form-slot").addEventListener("change", (ev) => {
    const target = ev.target as HTMLElement;
    if (target.id === "sf-week") {
      const week = Number((target as HTMLSelectElement).value);
      void loadWeek(app, week).then(() => revalidate(app));
    }
    if (target.id === "sf-preset") {
      const idx = (target as HTMLSelectElement).value;
      if (idx !== "") applyPreset(app, Number(idx));
    }
    revalidate(app);
  });
  el("form-slot").addEventListener("submit", (ev) => {
    ev.preventDefault();
    void submitScenario(app);
  });
  root.addEventListener("click", (ev) => {
    const target = ev.target as HTMLElement;
    if (target.classList.contains("hist-pick")) {
      app.history.toggleSelected(Number(target.dataset.seq));
      refreshHistory(app);
    }
    if (target.id === "history-export") exportHistory(app);
  });
}

function applyPreset(app: AppRefs, idx: number): void {
  const preset = app.scenarios.scenarios[idx];
  if (preset === undefined) return;
  const form = el("form-slot");
  const set = (id: string, value: string): void => {
    const node = form.querySelector(`#${id}`) as HTMLInputElement | HTMLSelectElement | null;
    if (node !== null) node.value = value;
  };
  set("sf-name", preset.name);
  set("sf-kind", preset.rule.kind);
  if (preset.rule.n !== undefined) set("sf-n", String(preset.rule.n));
  if (preset.rule.label !== undefined) set("sf-sector", preset.rule.label);
  if (preset.rule.ids !== undefined) set("sf-ids", preset.rule.ids.join(", "));
  set("sf-delta0", String(preset.delta0));
  set("sf-tau", String(preset.tau));
  const out = form.querySelector("#sf-delta0-out");
  if (out !== null) out.textContent = String(preset.delta0);
}

if (typeof document !== "undefined" && document.getElementById("app") !== null) {
  void boot();
}
