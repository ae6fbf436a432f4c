/** Thin fetch client for the decision service; no numbers are computed here. */

import type {
  AggregatePayload,
  DiseasePayload,
  EditOpPayload,
  KeyEventQuery,
  PatientDetailPayload,
  PatientListPayload,
  PredictionPayload,
  ScenarioListPayload,
  ScenarioPayload,
  SignificancePayload,
  SimilarPayload,
} from "./types.js";

export class ApiError extends Error {
  errorCode: string;
  detail: unknown;

  constructor(errorCode: string, message: string, detail: unknown) {
    super(message);
    this.errorCode = errorCode;
    this.detail = detail;
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const res = await fetch(`${base}${path}`, init);
  const body = await res.json();
  if (!res.ok) {
    throw new ApiError(body.error_code ?? "unknown", body.message ?? res.statusText, body.detail);
  }
  return body as T;
}

function post(payload: unknown): RequestInit {
  return {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(payload),
  };
}

export class ApiClient {
  constructor(readonly base: string = "") {}

  listPatients(page = 1, perPage = 20): Promise<PatientListPayload> {
    return request(this.base, `/api/patients?page=${page}&per_page=${perPage}`);
  }

  getPatient(patientId: string): Promise<PatientDetailPayload> {
    return request(this.base, `/api/patients/${encodeURIComponent(patientId)}`);
  }

  predict(patientId: string, targets?: string[]): Promise<PredictionPayload> {
    return request(this.base, "/api/predict", post({ patient_id: patientId, targets }));
  }

  similar(
    patientId: string,
    k: number,
    distanceRange?: [number, number],
    keyEvents?: KeyEventQuery[],
  ): Promise<SimilarPayload> {
    return request(this.base, "/api/similar", post({
      patient_id: patientId,
      k,
      distance_range: distanceRange,
      key_events: keyEvents,
    }));
  }

  aggregate(patientId: string, selection: string[], nStages: number): Promise<AggregatePayload> {
    return request(this.base, "/api/similar/aggregate", post({
      patient_id: patientId,
      selection,
      n_stages: nStages,
    }));
  }

  createScenario(basePatientId: string, label = ""): Promise<{ scenario: ScenarioPayload }> {
    return request(this.base, "/api/scenarios", post({ base_patient_id: basePatientId, label }));
  }

  editScenario(scenarioId: string, op: EditOpPayload): Promise<{ scenario: ScenarioPayload }> {
    return request(this.base, `/api/scenarios/${encodeURIComponent(scenarioId)}/edits`, post(op));
  }

  listScenarios(base?: string): Promise<ScenarioListPayload> {
    const query = base ? `?base=${encodeURIComponent(base)}` : "";
    return request(this.base, `/api/scenarios${query}`);
  }

  significance(
    patientId: string,
    targets?: string[],
    nGroups?: number,
    mode = "predicted",
  ): Promise<SignificancePayload> {
    return request(this.base, "/api/significance", post({
      patient_id: patientId,
      targets,
      n_groups: nGroups,
      mode,
    }));
  }

  disease(code: string): Promise<DiseasePayload> {
    return request(this.base, `/api/diseases/${encodeURIComponent(code)}`);
  }
}
