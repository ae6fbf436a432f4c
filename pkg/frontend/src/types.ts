/** Payload shapes of the decision-service API (schema_version 1). */

export interface CodeRef {
  code: string;
  kind: string;
  display_name: string;
}

export interface StepPayload {
  timestamp: number;
  codes: CodeRef[];
}

export interface SequencePayload {
  patient_id: string;
  steps: StepPayload[];
  prediction_time: number;
}

export interface PatientSummary {
  patient_id: string;
  step_count: number;
  event_count: number;
  span_days: number;
}

export interface PatientListPayload {
  schema_version: number;
  page: number;
  per_page: number;
  total: number;
  patients: PatientSummary[];
}

export interface PatientDetailPayload {
  schema_version: number;
  patient: SequencePayload;
  labels: string[];
}

export interface RankedTarget {
  code: string;
  probability: number;
  prevalence: number;
  display_name: string;
}

export interface InfluenceEntry {
  step: number;
  code: string;
  values: Record<string, number>;
}

export interface PredictionPayload {
  schema_version: number;
  patient_id: string;
  target_codes: string[];
  probabilities: Record<string, number>;
  logits: Record<string, number>;
  ranked: RankedTarget[];
  alphas: number[];
  influence: InfluenceEntry[];
}

export interface SimilarPatient {
  patient_id: string;
  distance: number;
  step_count: number;
  event_count: number;
  labels: string[];
}

export interface HistogramPayload {
  bin_edges: number[];
  counts: number[];
}

export interface SimilarPayload {
  schema_version: number;
  patients: SimilarPatient[];
  histogram: HistogramPayload;
}

export interface FlowNodePayload {
  stage: number;
  code: string;
  patient_count: number;
}

export interface FlowEdgePayload {
  source: { stage: number; code: string };
  target: { stage: number; code: string };
  patient_count: number;
  mean_duration_days: number;
}

export interface FlowPayload {
  stages: number[];
  nodes: FlowNodePayload[];
  edges: FlowEdgePayload[];
}

export interface SplitPayload {
  patient_id: string;
  split_index: number;
  history: { timestamp: number; codes: string[] }[];
  outcome: { timestamp: number; codes: string[] }[];
}

export interface AggregatePayload {
  schema_version: number;
  flow: FlowPayload;
  splits: SplitPayload[];
}

export type EditOpPayload =
  | { kind: "add"; code: string; timestamp: number }
  | { kind: "remove"; step_index: number; code: string }
  | { kind: "move"; from_step: number; code: string; to_timestamp: number }
  | { kind: "adjust_duration"; step_index: number; new_gap_days: number };

export interface ScenarioPayload {
  scenario_id: string;
  base_patient_id: string;
  label: string;
  edits: EditOpPayload[];
  edited_sequence: SequencePayload;
  prediction: PredictionPayload;
}

export interface ScenarioListPayload {
  schema_version: number;
  scenarios: ScenarioPayload[];
  comparison?: {
    scenario_ids: string[];
    rows: { target: string; probabilities: number[]; deltas: number[]; ranks: number[] }[];
  };
}

export interface GroupStatsPayload {
  n: number;
  mean: number | null;
  ci95: number | null;
}

export interface SignificanceCellPayload {
  treatment_group: string[];
  target: string;
  with: GroupStatsPayload | null;
  without: GroupStatsPayload | null;
  p_value: number | null;
  significant: boolean;
  insufficient: boolean;
}

export interface SignificancePayload {
  schema_version: number;
  targets: string[];
  groups: string[][];
  mode: string;
  cells: SignificanceCellPayload[][];
}

export interface DiseasePayload {
  schema_version: number;
  disease: {
    code: string;
    name: string;
    sections: Record<string, string>;
    found: boolean;
  };
}

export interface KeyEventQuery {
  code: string;
  after_previous?: boolean;
}
