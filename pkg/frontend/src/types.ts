/** Payload shapes of the exposure-graph JSON API, one type per endpoint. */

export interface WeeksPayload {
  weeks: number[];
  latest: number | null;
}

export interface ScenarioRule {
  kind: string;
  n?: number;
  label?: string;
  ids?: string[];
  [extra: string]: unknown;
}

export interface ScenarioPayload {
  name: string;
  rule: ScenarioRule;
  delta0: number;
  tau: number;
}

export interface ScenariosPayload {
  scenarios: ScenarioPayload[];
}

export interface NodeRow {
  protocol_id: string;
  weight: number;
}

export interface EdgeRow {
  src: string;
  dst: string;
  weight: number;
}

export interface GraphSummaryPayload {
  week: number;
  interval: [number, number];
  n_nodes: number;
  n_edges: number;
  total_tvl: number;
  total_exposure: number;
  top_nodes: NodeRow[];
  top_edges: EdgeRow[];
}

export interface RiskReportPayload {
  week: number;
  sis: Record<string, number>;
  mean_sis: number | null;
  sectors: string[];
  spillover: number[][] | null;
  spillover_index: number | null;
  density: number | null;
  tvl_hhi: number | null;
  edge_hhi: number | null;
  n_nodes: number;
  n_edges: number;
  total_tvl: number;
  degenerate: string[];
}

export interface WatchRow {
  protocol_id: string;
  sis: number;
}

export interface RiskPayload {
  week: number;
  report: RiskReportPayload;
  watchlist: WatchRow[];
}

/** Body for POST /stress; `scenario` stays loose so invalid drafts typecheck. */
export interface StressRequestBody {
  week: number;
  scenario: unknown;
  use: "observed" | "predicted";
  horizon?: number | null;
}

export interface ContagionResultPayload {
  scenario: string;
  week: number;
  targets: string[];
  losses: Record<string, number>;
  system_loss_usd: number;
  system_loss_pct: number;
  depth: number;
  affected: number;
  distressed: number;
}

export interface StressResponsePayload {
  use: string;
  week: number;
  horizon: number | null;
  result: ContagionResultPayload;
}

export interface CalibrationRow {
  anchor_week: number;
  horizon: number;
  [metricColumn: string]: number | null;
}

export interface CalibrationPayload {
  horizon: number;
  rows: CalibrationRow[];
  correlations: Record<string, number | null> | null;
}

export interface ForecastHorizonBlock {
  target_week: number;
  risk: RiskReportPayload;
  watchlist: WatchRow[];
  stress: ContagionResultPayload[];
}

export interface ForecastPayload {
  anchor_week: number;
  horizons: Record<string, ForecastHorizonBlock>;
}
