/** Shapes shared between the guide, the dashboard, and the read-only API. */

export type CriterionKind = "risk" | "requirement";
export type CostClass = "low" | "medium" | "high";

export interface Criterion {
  id: string;
  label: string;
  kind: CriterionKind;
  description: string;
}

export interface EvalMethod {
  id: string;
  label: string;
  covers: string[];
  requires_reference: boolean;
  requires_judge_model: boolean;
  cost_class: CostClass;
}

export interface KnowledgeBase {
  criteria: Criterion[];
  methods: EvalMethod[];
}

export interface Constraints {
  has_reference: boolean;
  has_judge: boolean;
}

export interface CoverageReport {
  selected: string[];
  covered: string[];
  uncovered: string[];
}

/** analysis/results.json as served by GET /api/results. */
export interface ResultsPayload {
  columns: string[];
  rows: ResultsRow[];
  rank1: Record<string, string[]>;
  rank2: Record<string, string[]>;
}

export interface ResultsRow {
  experiment: string;
  dataset?: string;
  model?: string;
  level?: number;
  metrics: Record<string, { mean: number; n: number }>;
}

/** analysis/meta_eval.json as served by GET /api/meta. */
export interface MetaPayload {
  results: MetaRow[];
}

export interface MetaRow {
  metric: string;
  avg_correlation: number | null;
  n_samples: number;
  n_degenerate: number;
}

export interface ManifestPayload {
  experiments: Record<
    string,
    {
      status: string;
      n_samples: number | null;
      log: string;
      created: string;
      updated: string;
    }
  >;
}
