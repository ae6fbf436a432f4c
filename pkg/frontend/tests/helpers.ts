/** Fetch mock: canned responses keyed by "METHOD path", recorded calls. */

import { vi } from "vitest";
import type { PredictionPayload, ScenarioPayload, SequencePayload } from "../src/types.js";

export interface RecordedCall {
  method: string;
  path: string;
  body: unknown;
}

export function mockFetch(routes: Record<string, unknown | ((body: unknown) => unknown)>) {
  const calls: RecordedCall[] = [];
  const fn = vi.fn(async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = String(input);
    const path = url.replace(/^https?:\/\/[^/]+/, "");
    const method = init?.method ?? "GET";
    const body = init?.body ? JSON.parse(String(init.body)) : undefined;
    calls.push({ method, path, body });
    const key = `${method} ${path.split("?")[0]}`;
    const handler = routes[key];
    if (handler === undefined) {
      return new Response(JSON.stringify({
        error_code: "not_mocked", message: `no route for ${key}`, detail: null,
      }), { status: 404, headers: { "Content-Type": "application/json" } });
    }
    const payload = typeof handler === "function" ? (handler as (b: unknown) => unknown)(body) : handler;
    return new Response(JSON.stringify(payload), {
      status: 200, headers: { "Content-Type": "application/json" },
    });
  });
  globalThis.fetch = fn as unknown as typeof fetch;
  return { calls, fn };
}

export function sequencePayload(): SequencePayload {
  return {
    patient_id: "P1",
    steps: [
      { timestamp: 1.5, codes: [{ code: "T00", kind: "treatment", display_name: "Treat 0" }] },
      {
        timestamp: 4.0,
        codes: [
          { code: "D05", kind: "diagnosis", display_name: "Diag 5" },
          { code: "T01", kind: "treatment", display_name: "Treat 1" },
          { code: "T02", kind: "treatment", display_name: "Treat 2" },
        ],
      },
      { timestamp: 9.25, codes: [{ code: "D03", kind: "diagnosis", display_name: "Diag 3" }] },
    ],
    prediction_time: 20.0,
  };
}

export function predictionPayload(probabilities: Record<string, number> = {
  D00: 0.8123, D01: 0.3141, D02: 0.3141,
}): PredictionPayload {
  const ranked = Object.entries(probabilities)
    .sort(([ca, pa], [cb, pb]) => (pb - pa) || (ca < cb ? -1 : 1))
    .map(([code, probability]) => ({
      code, probability, prevalence: 0.25, display_name: `Disease ${code}`,
    }));
  return {
    schema_version: 1,
    patient_id: "P1",
    target_codes: Object.keys(probabilities),
    probabilities,
    logits: Object.fromEntries(Object.keys(probabilities).map((c) => [c, 0.0])),
    ranked,
    alphas: [0.2, 0.5, 0.3],
    influence: [],
  };
}

export function scenarioPayload(
  sequence: SequencePayload = sequencePayload(),
  prediction: PredictionPayload = predictionPayload(),
  edits: ScenarioPayload["edits"] = [],
): ScenarioPayload {
  return {
    scenario_id: "scn-1",
    base_patient_id: "P1",
    label: "",
    edits,
    edited_sequence: sequence,
    prediction,
  };
}
