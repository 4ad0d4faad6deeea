/** Payload shapes served by the /api/v1 endpoints (see docs/formats.md). */

export type SemanticType = "categorical" | "numeric" | "temporal";
export type MarkKind = "bar" | "line" | "pie" | "scatter";
export type AggregateKind = "NONE" | "COUNT" | "SUM" | "AVG";

export interface ColumnStats {
  distinct_count: number;
  unique_ratio: number;
  min: number | string | null;
  max: number | string | null;
  null_count: number;
  sample_values: Array<number | string>;
}

export interface ColumnDescription {
  name: string;
  semantic_type: SemanticType;
  stats: ColumnStats;
}

export interface DatasetDescription {
  dataset_id: string;
  name: string;
  row_count: number;
  columns: ColumnDescription[];
}

export interface SpecDataRow {
  x: number | string | null;
  y: number;
  c?: string;
  share?: number;
}

export interface ChartSpec {
  spec_version: number;
  mark: MarkKind;
  encoding: {
    x: { field: string; type: SemanticType };
    y: { field: string; type: SemanticType; aggregate: AggregateKind };
    color?: { field: string; type: SemanticType };
  };
  data: SpecDataRow[];
}

export interface Score {
  s_k: number;
  s_d: number;
  s_u: number;
  beta: number;
  crf: number;
  violated_rules: string[];
}

export interface RecommendationEntry {
  rank: number;
  query: string;
  score: Score;
  spec: ChartSpec;
}

export interface HintPayload {
  id: string;
  text: string;
  kind: string;
  target: string;
  cost: number;
  avg_score: number;
  visualizations: string[];
  constraints: Array<[string, string[]]>;
}

export interface MarkRule {
  x_types?: SemanticType[];
  y_types?: SemanticType[];
  min_points?: number;
  max_points?: number;
  y_nonnegative?: boolean;
  no_avg?: boolean;
  distinct_x?: boolean;
  aggregates?: AggregateKind[];
}

export type MarkRules = Record<MarkKind, MarkRule>;

export interface RoundPayload {
  session_id: string;
  round: number;
  recommendations: RecommendationEntry[];
  hints: HintPayload[];
  hint_selected: string | null;
  user_kept: string[];
  constraints: Array<[string, string[]]>;
  mark_rules: MarkRules;
}

export interface SessionSummary {
  session_id: string;
  dataset_id: string | null;
  round: number;
  rounds: number[];
  current: RoundPayload;
  kept_union: string[];
}

export interface ApiErrorBody {
  code: "bad_request" | "not_found" | "conflict" | "internal";
  message: string;
  detail?: string;
}
