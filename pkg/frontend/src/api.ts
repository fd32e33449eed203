/** Thin typed client over the JSON API. No retries, no caching: the service
 * is local and deterministic, and stale data is worse than a visible error. */

import type {
  CalibrationPayload,
  ForecastPayload,
  GraphSummaryPayload,
  RiskPayload,
  ScenariosPayload,
  StressRequestBody,
  StressResponsePayload,
  WeeksPayload,
} from "./types.js";

export class ApiError extends Error {
  readonly status: number;
  readonly detail: string;

  constructor(status: number, detail: string) {
    super(status > 0 ? `HTTP ${status}: ${detail}` : detail);
    this.name = "ApiError";
    this.status = status;
    this.detail = detail;
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class Client {
  private readonly base: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl = "", fetchFn: FetchLike = fetch) {
    // trailing slash would double up in request paths
    this.base = baseUrl.replace(/\/+$/, "");
    this.fetchFn = fetchFn;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let res: Response;
    try {
      res = await this.fetchFn(this.base + path, init);
    } catch (err) {
      throw new ApiError(0, `service unreachable: ${String(err)}`);
    }
    const text = await res.text();
    let body: unknown = null;
    if (text.length > 0) {
      try {
        body = JSON.parse(text);
      } catch {
        body = text;
      }
    }
    if (!res.ok) {
      let detail: unknown = res.statusText;
      if (body !== null && typeof body === "object" && "detail" in body) {
        detail = (body as { detail: unknown }).detail;
      } else if (body !== null) {
        detail = body;
      }
      throw new ApiError(
        res.status,
        typeof detail === "string" ? detail : JSON.stringify(detail),
      );
    }
    return body as T;
  }

  getHealth(): Promise<{ status: string }> {
    return this.request("/health");
  }

  getWeeks(): Promise<WeeksPayload> {
    return this.request("/weeks");
  }

  getScenarios(): Promise<ScenariosPayload> {
    return this.request("/scenarios");
  }

  getGraphSummary(week: number): Promise<GraphSummaryPayload> {
    return this.request(`/graph/${week}/summary`);
  }

  getRisk(week: number): Promise<RiskPayload> {
    return this.request(`/risk/${week}`);
  }

  postStress(body: StressRequestBody): Promise<StressResponsePayload> {
    return this.request("/stress", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  getCalibration(horizon: number): Promise<CalibrationPayload> {
    return this.request(`/calibration/${horizon}`);
  }

  getForecast(): Promise<ForecastPayload> {
    return this.request("/forecast");
  }
}
