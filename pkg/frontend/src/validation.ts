/** Client-side scenario validation, kept field-for-field in lockstep with the
 * service's payload checks. The shared constraint table
 * (shared/scenario-constraints.json) is asserted against both sides, so any
 * drift between this module and the API fails a test on whichever side moved.
 */

import type { StressRequestBody } from "./types.js";

export interface FieldIssue {
  field: string;
  message: string;
}

export const RULE_KINDS = ["largest_protocol", "top_n", "sector", "explicit"] as const;

export const DEFAULT_TAU = 0.1;

// digits with optional single underscores, e.g. 1_000.5; matches the server's
// numeric-string coercion, which is wider than Number() and narrower than
// parseFloat()
const FLOAT_BODY =
  /^[+-]?(?:\d(?:_?\d)*(?:\.(?:\d(?:_?\d)*)?)?|\.\d(?:_?\d)*)(?:[eE][+-]?\d(?:_?\d)*)?$/;

/** Coerce a JSON value to a float the way the server does; null = rejected.
 * Numbers and booleans pass through, strings parse including inf/nan forms,
 * everything else fails. NaN/Infinity are returned as-is so range checks can
 * reject them the same way the server's interval comparisons do. */
export function coerceFloat(value: unknown): number | null {
  if (typeof value === "number") return value;
  if (typeof value === "boolean") return value ? 1.0 : 0.0;
  if (typeof value !== "string") return null;
  const t = value.trim();
  const special = t.match(/^([+-]?)(inf(?:inity)?|nan)$/i);
  if (special) {
    if (special[2].toLowerCase() === "nan") return Number.NaN;
    return special[1] === "-" ? -Infinity : Infinity;
  }
  if (!FLOAT_BODY.test(t)) return null;
  return Number(t.replace(/_/g, ""));
}

function isPlainObject(v: unknown): v is Record<string, unknown> {
  return typeof v === "object" && v !== null && !Array.isArray(v);
}

/** Validate a scenario payload; empty result means the API will accept it.
 * Issues come back in the order the server checks fields, so issues[0]
 * matches the server's complaint. */
export function validateScenario(payload: unknown): FieldIssue[] {
  if (!isPlainObject(payload)) {
    return [{ field: "scenario", message: "scenario must be an object" }];
  }
  const issues: FieldIssue[] = [];
  if (!("name" in payload)) {
    issues.push({ field: "name", message: "name is required" });
  }

  let rule: Record<string, unknown> | null = null;
  if (!("rule" in payload)) {
    issues.push({ field: "rule", message: "rule is required" });
  } else if (!isPlainObject(payload.rule)) {
    issues.push({ field: "rule", message: "rule must be an object" });
  } else {
    rule = payload.rule;
  }

  if (!("delta0" in payload)) {
    issues.push({ field: "delta0", message: "delta0 is required" });
  } else {
    const d0 = coerceFloat(payload.delta0);
    if (d0 === null) {
      issues.push({ field: "delta0", message: "delta0 must be a number" });
    } else if (!(d0 >= 0 && d0 <= 1)) {
      issues.push({ field: "delta0", message: "delta0 must be in [0, 1]" });
    }
  }

  if ("tau" in payload) {
    const tau = coerceFloat(payload.tau);
    if (tau === null) {
      issues.push({ field: "tau", message: "tau must be a number" });
    } else if (!(tau > 0 && tau < 1)) {
      issues.push({ field: "tau", message: "tau must be in (0, 1) exclusive" });
    }
  }

  if (rule !== null) {
    const kind = rule.kind;
    if (typeof kind !== "string" || !(RULE_KINDS as readonly string[]).includes(kind)) {
      issues.push({
        field: "rule.kind",
        message: `rule kind must be one of: ${RULE_KINDS.join(", ")}`,
      });
    } else if (kind === "top_n") {
      const n = rule.n;
      if (typeof n !== "number" || !Number.isInteger(n) || n < 1) {
        issues.push({ field: "rule.n", message: "top_n needs an integer n >= 1" });
      }
    } else if (kind === "sector") {
      if (typeof rule.label !== "string" || rule.label.length === 0) {
        issues.push({ field: "rule.label", message: "sector needs a non-empty label" });
      }
    } else if (kind === "explicit") {
      if (!Array.isArray(rule.ids) || rule.ids.length === 0) {
        issues.push({ field: "rule.ids", message: "explicit needs at least one protocol id" });
      }
    }
  }
  return issues;
}

export interface RequestContext {
  weeks?: number[];
  horizons?: number[];
  hasModel?: boolean;
  /** protocol ids known from the current risk payload, for explicit rules */
  protocols?: string[];
}

/** Full pre-flight check of a stress request. Scenario issues are included
 * verbatim; request-level issues use the week/use/horizon fields. Context
 * checks (known weeks, known horizons, known protocol ids) only run when the
 * corresponding context is supplied. */
export function validateStressRequest(
  req: StressRequestBody,
  ctx: RequestContext = {},
): FieldIssue[] {
  const issues: FieldIssue[] = [];
  if (!Number.isInteger(req.week)) {
    issues.push({ field: "week", message: "week must be an integer" });
  } else if (ctx.weeks && !ctx.weeks.includes(req.week)) {
    issues.push({ field: "week", message: `no graph for week ${req.week}` });
  }
  if (req.use !== "observed" && req.use !== "predicted") {
    issues.push({ field: "use", message: "use must be 'observed' or 'predicted'" });
  }
  if (req.use === "predicted") {
    if (ctx.hasModel === false) {
      issues.push({ field: "use", message: "predicted mode needs a trained model" });
    }
    if (req.horizon === null || req.horizon === undefined) {
      issues.push({ field: "horizon", message: "predicted mode needs a horizon" });
    } else if (ctx.horizons && !ctx.horizons.includes(req.horizon)) {
      issues.push({
        field: "horizon",
        message: `horizon must be one of: ${ctx.horizons.join(", ")}`,
      });
    }
  }
  issues.push(...validateScenario(req.scenario));
  if (ctx.protocols && issues.every((i) => i.field !== "rule.ids")) {
    const scenario = req.scenario;
    if (isPlainObject(scenario) && isPlainObject(scenario.rule)) {
      const rule = scenario.rule;
      if (rule.kind === "explicit" && Array.isArray(rule.ids)) {
        const known = new Set(ctx.protocols);
        const missing = rule.ids.filter((p) => !known.has(String(p)));
        if (missing.length > 0) {
          issues.push({
            field: "rule.ids",
            message: `unknown protocol id(s): ${missing.map(String).join(", ")}`,
          });
        }
      }
    }
  }
  return issues;
}

/** Raw string state of the scenario form, exactly as the inputs hold it. */
export interface ScenarioFormState {
  week: string;
  name: string;
  kind: string;
  n: string;
  sector: string;
  ids: string[];
  delta0: string;
  tau: string;
  use: string;
  horizon: string;
}

/** Turn form state into the POST /stress body. No validation here: the
 * builder is dumb on purpose so validateStressRequest sees exactly what
 * would hit the wire. */
export function buildStressRequest(form: ScenarioFormState): StressRequestBody {
  const rule: Record<string, unknown> = { kind: form.kind };
  if (form.kind === "top_n") rule.n = parseIntStrict(form.n);
  if (form.kind === "sector") rule.label = form.sector;
  if (form.kind === "explicit") rule.ids = form.ids.slice();
  const scenario: Record<string, unknown> = {
    name: form.name,
    rule,
    delta0: numberOrRaw(form.delta0),
  };
  if (form.tau.trim() !== "") scenario.tau = numberOrRaw(form.tau);
  const body: StressRequestBody = {
    week: numberOrRaw(form.week) as number,
    scenario,
    use: form.use === "predicted" ? "predicted" : "observed",
  };
  if (body.use === "predicted") {
    body.horizon = form.horizon.trim() === "" ? null : (numberOrRaw(form.horizon) as number);
  }
  return body;
}

function numberOrRaw(raw: string): unknown {
  const t = raw.trim();
  if (t === "") return raw;
  const n = Number(t);
  return Number.isNaN(n) ? raw : n;
}

function parseIntStrict(raw: string): unknown {
  const t = raw.trim();
  if (!/^[+-]?\d+$/.test(t)) return raw;
  return Number(t);
}
