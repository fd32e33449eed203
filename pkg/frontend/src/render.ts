/** HTML renderers. Every function is a pure string builder: payload in,
 * markup out. Parity-critical numbers are emitted twice, a formatted
 * display value and the exact JSON value in a data-exact attribute, so
 * snapshots can assert that nothing was transformed on the way through.
 * Layout math (SVG scales) is the only arithmetic in this module; no risk
 * number is ever derived client-side.
 */

import type { HistoryEntry } from "./state.js";
import type {
  CalibrationPayload,
  ContagionResultPayload,
  ForecastPayload,
  GraphSummaryPayload,
  RiskPayload,
  ScenarioPayload,
  WatchRow,
} from "./types.js";
import type { FieldIssue } from "./validation.js";

export function escapeHtml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

/** Exact JSON text of a number; survives JSON.parse bit-for-bit. */
export function exact(v: number | null): string {
  return v === null ? "null" : String(v);
}

export function fmtNum(v: number | null, digits = 4): string {
  if (v === null || Number.isNaN(v)) return "n/a";
  if (!Number.isFinite(v)) return v > 0 ? "inf" : "-inf";
  if (Number.isInteger(v) && Math.abs(v) < 1e15) return groupDigits(String(v));
  return v.toFixed(digits);
}

export function fmtUsd(v: number | null): string {
  if (v === null || Number.isNaN(v)) return "n/a";
  const abs = Math.abs(v);
  if (abs >= 1e12) return `$${(v / 1e12).toFixed(2)}T`;
  if (abs >= 1e9) return `$${(v / 1e9).toFixed(2)}B`;
  if (abs >= 1e6) return `$${(v / 1e6).toFixed(2)}M`;
  if (abs >= 1e3) return `$${(v / 1e3).toFixed(2)}K`;
  return `$${v.toFixed(2)}`;
}

export function fmtPct(v: number | null): string {
  return v === null || Number.isNaN(v) ? "n/a" : `${v.toFixed(3)}%`;
}

function groupDigits(digits: string): string {
  return digits.replace(/\B(?=(\d{3})+(?!\d))/g, ",");
}

function scalarTile(label: string, value: number | null, display: string): string {
  return (
    `<div class="tile"><span class="tile-label">${escapeHtml(label)}</span>` +
    `<span class="tile-value" data-exact="${escapeHtml(exact(value))}">` +
    `${escapeHtml(display)}</span></div>`
  );
}

export function renderErrorBanner(status: number, detail: string): string {
  const kind = status === 0 ? "offline" : `HTTP ${status}`;
  return (
    `<div class="banner error" role="alert"><strong>${escapeHtml(kind)}</strong> ` +
    `${escapeHtml(detail)}</div>`
  );
}

export function renderFieldHints(issues: FieldIssue[]): string {
  if (issues.length === 0) return "";
  const items = issues
    .map(
      (i) =>
        `<li data-field="${escapeHtml(i.field)}">` +
        `<code>${escapeHtml(i.field)}</code> ${escapeHtml(i.message)}</li>`,
    )
    .join("");
  return `<ul class="hints">${items}</ul>`;
}

// ---------------------------------------------------------------------------
// dashboard panels
// ---------------------------------------------------------------------------

export function renderGraphSummary(s: GraphSummaryPayload): string {
  const nodes = s.top_nodes
    .map(
      (n) =>
        `<tr><td>${escapeHtml(n.protocol_id)}</td>` +
        `<td data-exact="${exact(n.weight)}">${fmtUsd(n.weight)}</td></tr>`,
    )
    .join("");
  const edges = s.top_edges
    .map(
      (e) =>
        `<tr><td>${escapeHtml(e.src)} &rarr; ${escapeHtml(e.dst)}</td>` +
        `<td data-exact="${exact(e.weight)}">${fmtUsd(e.weight)}</td></tr>`,
    )
    .join("");
  return (
    `<section class="panel" id="graph-summary">` +
    `<h2>Graph, week ${s.week}</h2>` +
    `<p class="muted">interval ${s.interval[0]} to ${s.interval[1]}</p>` +
    `<div class="tiles">` +
    scalarTile("protocols", s.n_nodes, fmtNum(s.n_nodes)) +
    scalarTile("exposures", s.n_edges, fmtNum(s.n_edges)) +
    scalarTile("total TVL", s.total_tvl, fmtUsd(s.total_tvl)) +
    scalarTile("total exposure", s.total_exposure, fmtUsd(s.total_exposure)) +
    `</div>` +
    `<div class="cols"><table class="data"><caption>largest protocols</caption>` +
    `<tbody>${nodes}</tbody></table>` +
    `<table class="data"><caption>largest exposures</caption>` +
    `<tbody>${edges}</tbody></table></div>` +
    `</section>`
  );
}

/** Risk panel; `previous` adds a change column to the watchlist. The change
 * is the difference of the two displayed SIS values, both shown verbatim. */
export function renderRiskPanel(risk: RiskPayload, previous: RiskPayload | null): string {
  const r = risk.report;
  const degenerate =
    r.degenerate.length > 0
      ? `<p class="banner warn">degenerate: ${escapeHtml(r.degenerate.join(", "))}</p>`
      : "";
  const prevSis = previous === null ? null : previous.report.sis;
  const watch = risk.watchlist.map((w) => watchRowHtml(w, prevSis)).join("");
  const prevHeader = prevSis === null ? "" : `<th>prev</th><th>change</th>`;
  return (
    `<section class="panel" id="risk-panel">` +
    `<h2>Risk, week ${risk.week}</h2>` +
    degenerate +
    `<div class="tiles">` +
    scalarTile("density", r.density, fmtNum(r.density, 4)) +
    scalarTile("TVL HHI", r.tvl_hhi, fmtNum(r.tvl_hhi, 4)) +
    scalarTile("edge HHI", r.edge_hhi, fmtNum(r.edge_hhi, 4)) +
    scalarTile("spillover index", r.spillover_index, fmtNum(r.spillover_index, 4)) +
    scalarTile("mean SIS", r.mean_sis, fmtNum(r.mean_sis, 4)) +
    `</div>` +
    `<table class="data" id="watchlist">` +
    `<caption>systemic importance watchlist</caption>` +
    `<thead><tr><th>protocol</th><th>SIS</th>${prevHeader}</tr></thead>` +
    `<tbody>${watch}</tbody></table>` +
    renderSpillover(r.sectors, r.spillover) +
    `</section>`
  );
}

function watchRowHtml(w: WatchRow, prevSis: Record<string, number> | null): string {
  let tail = "";
  if (prevSis !== null) {
    const prev = Object.prototype.hasOwnProperty.call(prevSis, w.protocol_id)
      ? prevSis[w.protocol_id]
      : null;
    const change =
      prev === null ? "new" : `${w.sis >= prev ? "+" : ""}${(w.sis - prev).toFixed(6)}`;
    tail =
      `<td data-exact="${exact(prev)}">${fmtNum(prev, 6)}</td>` +
      `<td class="delta">${escapeHtml(change)}</td>`;
  }
  return (
    `<tr><td>${escapeHtml(w.protocol_id)}</td>` +
    `<td data-exact="${exact(w.sis)}">${fmtNum(w.sis, 6)}</td>${tail}</tr>`
  );
}

function renderSpillover(sectors: string[], matrix: number[][] | null): string {
  if (matrix === null || sectors.length === 0) return "";
  const head = sectors.map((s) => `<th>${escapeHtml(s)}</th>`).join("");
  const rows = matrix
    .map((row, i) => {
      const cells = row
        .map((v) => `<td data-exact="${exact(v)}">${fmtUsd(v)}</td>`)
        .join("");
      return `<tr><th>${escapeHtml(sectors[i])}</th>${cells}</tr>`;
    })
    .join("");
  return (
    `<table class="data matrix"><caption>sector spillovers (row pays column)</caption>` +
    `<thead><tr><th></th>${head}</tr></thead><tbody>${rows}</tbody></table>`
  );
}

// ---------------------------------------------------------------------------
// scenario form
// ---------------------------------------------------------------------------

export interface FormContext {
  weeks: number[];
  latest: number | null;
  presets: ScenarioPayload[];
  sectors: string[];
  protocols: string[];
  horizons: number[];
  hasModel: boolean;
}

export function renderScenarioForm(ctx: FormContext): string {
  const weekOpts = ctx.weeks
    .map(
      (w) =>
        `<option value="${w}"${w === ctx.latest ? " selected" : ""}>${w}</option>`,
    )
    .join("");
  const presetOpts =
    `<option value="">custom</option>` +
    ctx.presets
      .map((p, i) => `<option value="${i}">${escapeHtml(p.name)}</option>`)
      .join("");
  const sectorOpts = ctx.sectors
    .map((s) => `<option value="${escapeHtml(s)}">${escapeHtml(s)}</option>`)
    .join("");
  const protoOpts = ctx.protocols
    .map((p) => `<option value="${escapeHtml(p)}"></option>`)
    .join("");
  const horizonOpts = ctx.horizons.map((h) => `<option value="${h}">${h}</option>`).join("");
  const predictedExtra = ctx.hasModel
    ? ""
    : `<span class="muted" id="sf-no-model">no trained model: predicted mode unavailable</span>`;
  return (
    `<form id="scenario-form" class="panel">` +
    `<h2>Stress scenario</h2>` +
    `<label>week <select id="sf-week">${weekOpts}</select></label>` +
    `<label>preset <select id="sf-preset">${presetOpts}</select></label>` +
    `<label>name <input id="sf-name" type="text" value="custom"></label>` +
    `<label>targets <select id="sf-kind">` +
    `<option value="largest_protocol">largest protocol</option>` +
    `<option value="top_n">top n protocols</option>` +
    `<option value="sector">whole sector</option>` +
    `<option value="explicit">explicit list</option>` +
    `</select></label>` +
    `<label data-for-kind="top_n">n <input id="sf-n" type="number" min="1" step="1" value="5"></label>` +
    `<label data-for-kind="sector">sector <select id="sf-sector">${sectorOpts}</select></label>` +
    `<label data-for-kind="explicit">protocols ` +
    `<input id="sf-ids" type="text" list="sf-proto-list" placeholder="comma-separated ids">` +
    `<datalist id="sf-proto-list">${protoOpts}</datalist></label>` +
    `<label>initial loss ratio ` +
    `<input id="sf-delta0" type="range" min="0" max="1" step="0.01" value="0.5">` +
    `<output id="sf-delta0-out">0.5</output></label>` +
    `<label>distress threshold tau ` +
    `<input id="sf-tau" type="number" min="0" max="1" step="0.01" value="0.1"></label>` +
    `<fieldset><legend>graph</legend>` +
    `<label><input type="radio" name="sf-use" value="observed" checked> observed</label>` +
    `<label><input type="radio" name="sf-use" value="predicted"${ctx.hasModel ? "" : " disabled"}> predicted</label>` +
    predictedExtra +
    `</fieldset>` +
    `<label data-for-use="predicted">horizon <select id="sf-horizon">${horizonOpts}</select></label>` +
    `<div id="sf-hints"></div>` +
    `<button type="submit" id="sf-submit">run scenario</button>` +
    `</form>`
  );
}

// ---------------------------------------------------------------------------
// cascade results and history
// ---------------------------------------------------------------------------

export function renderCascadeCard(entry: HistoryEntry): string {
  const r = entry.response.result;
  const mode =
    entry.response.use === "predicted"
      ? `predicted, horizon ${entry.response.horizon}`
      : "observed";
  const targets = r.targets.map((t) => `<span class="chip">${escapeHtml(t)}</span>`).join("");
  return (
    `<article class="cascade" data-seq="${entry.seq}">` +
    `<header><h3>#${entry.seq} ${escapeHtml(r.scenario)}</h3>` +
    `<span class="muted">week ${r.week}, ${escapeHtml(mode)}</span></header>` +
    `<p class="headline">system loss ` +
    `<strong data-exact="${exact(r.system_loss_pct)}">${fmtPct(r.system_loss_pct)}</strong> ` +
    `<span data-exact="${exact(r.system_loss_usd)}">(${fmtUsd(r.system_loss_usd)})</span></p>` +
    `<p class="exact-line">exact loss pct: <code>${exact(r.system_loss_pct)}</code></p>` +
    `<div class="tiles">` +
    scalarTile("cascade depth", r.depth, fmtNum(r.depth)) +
    scalarTile("affected", r.affected, fmtNum(r.affected)) +
    scalarTile("distressed", r.distressed, fmtNum(r.distressed)) +
    `</div>` +
    `<p>targets: ${targets}</p>` +
    renderLossBars(r.losses) +
    `</article>`
  );
}

/** Horizontal loss bars, largest first. Bar lengths are layout only; the
 * numbers shown are the payload values. */
export function renderLossBars(losses: Record<string, number>, topN = 12): string {
  const ranked = Object.entries(losses)
    .sort((a, b) => b[1] - a[1] || (a[0] < b[0] ? -1 : 1))
    .slice(0, topN);
  if (ranked.length === 0) return `<p class="muted">no losses</p>`;
  const max = ranked[0][1];
  const barH = 16;
  const gap = 6;
  const labelW = 90;
  const valueW = 100;
  const plotW = 240;
  const height = ranked.length * (barH + gap);
  const bars = ranked
    .map(([p, v], i) => {
      const y = i * (barH + gap);
      const w = max > 0 ? Math.max(1, Math.round((v / max) * plotW)) : 1;
      return (
        `<text x="0" y="${y + 12}" class="svg-label">${escapeHtml(p)}</text>` +
        `<rect x="${labelW}" y="${y}" width="${w}" height="${barH}"></rect>` +
        `<text x="${labelW + plotW + 8}" y="${y + 12}" class="svg-value" ` +
        `data-exact="${exact(v)}">${fmtUsd(v)}</text>`
      );
    })
    .join("");
  const more = Object.keys(losses).length - ranked.length;
  const tail = more > 0 ? `<p class="muted">and ${more} more</p>` : "";
  return (
    `<svg class="loss-bars" viewBox="0 0 ${labelW + plotW + valueW} ${height}" ` +
    `width="${labelW + plotW + valueW}" height="${height}" role="img" ` +
    `aria-label="per-protocol losses">${bars}</svg>` + tail
  );
}

export function renderHistoryList(entries: HistoryEntry[], selected: Set<number>): string {
  if (entries.length === 0) {
    return `<p class="muted" id="history-empty">no scenarios run yet</p>`;
  }
  const rows = entries
    .map((e) => {
      const r = e.response.result;
      const checked = selected.has(e.seq) ? " checked" : "";
      return (
        `<li><label><input type="checkbox" class="hist-pick" data-seq="${e.seq}"${checked}>` +
        ` #${e.seq} ${escapeHtml(r.scenario)} week ${r.week} ` +
        `<span data-exact="${exact(r.system_loss_pct)}">${fmtPct(r.system_loss_pct)}</span>` +
        `</label></li>`
      );
    })
    .join("");
  return (
    `<ul class="history">${rows}</ul>` +
    `<button type="button" id="history-export">export history JSON</button>`
  );
}

/** Side-by-side columns for the selected runs; values verbatim, no deltas. */
export function renderComparison(entries: HistoryEntry[]): string {
  if (entries.length < 2) {
    return `<p class="muted" id="compare-hint">pick two or more runs to compare</p>`;
  }
  const head = entries
    .map((e) => `<th>#${e.seq} ${escapeHtml(e.response.result.scenario)}</th>`)
    .join("");
  const row = (
    label: string,
    cell: (e: HistoryEntry) => string,
  ): string => `<tr><th>${escapeHtml(label)}</th>${entries.map(cell).join("")}</tr>`;
  const body =
    row("week", (e) => `<td>${e.response.result.week}</td>`) +
    row("graph", (e) =>
      `<td>${escapeHtml(
        e.response.use === "predicted" ? `predicted h=${e.response.horizon}` : "observed",
      )}</td>`,
    ) +
    row("system loss pct", (e) => {
      const v = e.response.result.system_loss_pct;
      return `<td data-exact="${exact(v)}">${fmtPct(v)}</td>`;
    }) +
    row("system loss", (e) => {
      const v = e.response.result.system_loss_usd;
      return `<td data-exact="${exact(v)}">${fmtUsd(v)}</td>`;
    }) +
    row("depth", (e) => `<td>${e.response.result.depth}</td>`) +
    row("affected", (e) => `<td>${e.response.result.affected}</td>`) +
    row("distressed", (e) => `<td>${e.response.result.distressed}</td>`) +
    row("targets", (e) => `<td>${e.response.result.targets.length}</td>`);
  return (
    `<table class="data" id="comparison"><caption>scenario comparison</caption>` +
    `<thead><tr><th></th>${head}</tr></thead><tbody>${body}</tbody></table>`
  );
}

// ---------------------------------------------------------------------------
// calibration and forecast views
// ---------------------------------------------------------------------------

export function renderCalibration(payload: CalibrationPayload): string {
  const metrics = payload.rows.length
    ? Object.keys(payload.rows[0])
        .filter((k) => k.endsWith("_pred"))
        .map((k) => k.slice(0, -"_pred".length))
    : [];
  const blocks = metrics
    .map((m) => {
      const pts: Array<[number, number]> = [];
      for (const row of payload.rows) {
        const p = row[`${m}_pred`];
        const r = row[`${m}_real`];
        if (p !== null && r !== null && p !== undefined && r !== undefined) {
          pts.push([p, r]);
        }
      }
      const corr = payload.correlations ? payload.correlations[m] ?? null : null;
      return (
        `<figure class="calib" data-metric="${escapeHtml(m)}">` +
        `<figcaption>${escapeHtml(m)} ` +
        `<span class="muted">corr <span data-exact="${exact(corr)}">${fmtNum(corr, 4)}</span>` +
        `</span></figcaption>` +
        scatterSvg(pts) +
        `</figure>`
      );
    })
    .join("");
  return (
    `<section class="panel" id="calibration">` +
    `<h2>Forecast calibration, horizon ${payload.horizon}</h2>` +
    `<p class="muted">predicted (x) vs realized (y); the line is y = x</p>` +
    blocks +
    `</section>`
  );
}

function scatterSvg(points: Array<[number, number]>): string {
  const size = 220;
  const pad = 18;
  if (points.length === 0) {
    return `<svg class="scatter" viewBox="0 0 ${size} ${size}" width="${size}" height="${size}"><text x="${size / 2}" y="${size / 2}" text-anchor="middle" class="muted">no data</text></svg>`;
  }
  let lo = Infinity;
  let hi = -Infinity;
  for (const [x, y] of points) {
    lo = Math.min(lo, x, y);
    hi = Math.max(hi, x, y);
  }
  if (lo === hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  const span = hi - lo;
  const scale = (v: number) => pad + ((v - lo) / span) * (size - 2 * pad);
  const flip = (v: number) => size - scale(v);
  const dots = points
    .map(
      ([x, y]) =>
        `<circle cx="${scale(x).toFixed(1)}" cy="${flip(y).toFixed(1)}" r="3" ` +
        `data-pred="${exact(x)}" data-real="${exact(y)}"></circle>`,
    )
    .join("");
  return (
    `<svg class="scatter" viewBox="0 0 ${size} ${size}" width="${size}" height="${size}" role="img">` +
    `<line x1="${scale(lo).toFixed(1)}" y1="${flip(lo).toFixed(1)}" ` +
    `x2="${scale(hi).toFixed(1)}" y2="${flip(hi).toFixed(1)}" class="diag"></line>` +
    dots +
    `</svg>`
  );
}

export function renderForecast(payload: ForecastPayload): string {
  const horizons = Object.keys(payload.horizons).sort((a, b) => Number(a) - Number(b));
  const cards = horizons
    .map((h) => {
      const block = payload.horizons[h];
      const r = block.risk;
      const watch = block.watchlist
        .map(
          (w) =>
            `<tr><td>${escapeHtml(w.protocol_id)}</td>` +
            `<td data-exact="${exact(w.sis)}">${fmtNum(w.sis, 6)}</td></tr>`,
        )
        .join("");
      const stress = block.stress
        .map(
          (s: ContagionResultPayload) =>
            `<li>${escapeHtml(s.scenario)}: ` +
            `<span data-exact="${exact(s.system_loss_pct)}">${fmtPct(s.system_loss_pct)}</span></li>`,
        )
        .join("");
      return (
        `<article class="forecast-card" data-horizon="${escapeHtml(h)}">` +
        `<h3>+${escapeHtml(h)}w (week ${block.target_week})</h3>` +
        `<div class="tiles">` +
        scalarTile("density", r.density, fmtNum(r.density, 4)) +
        scalarTile("TVL HHI", r.tvl_hhi, fmtNum(r.tvl_hhi, 4)) +
        scalarTile("spillover index", r.spillover_index, fmtNum(r.spillover_index, 4)) +
        scalarTile("mean SIS", r.mean_sis, fmtNum(r.mean_sis, 4)) +
        `</div>` +
        `<table class="data"><caption>predicted watchlist</caption><tbody>${watch}</tbody></table>` +
        `<ul class="stress-lines">${stress}</ul>` +
        `</article>`
      );
    })
    .join("");
  return (
    `<section class="panel" id="forecast">` +
    `<h2>Forward risk, anchored at week ${payload.anchor_week}</h2>` +
    cards +
    `</section>`
  );
}
