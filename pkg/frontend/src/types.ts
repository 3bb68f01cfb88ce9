export interface Taxonomy {
  aspects: string[];
  sentiment: string[];
}

export interface TaskView {
  doc_id: string;
  text: string;
  predictions: { aspect: number[]; sentiment: number[] } | null;
  uncertainty: number | null;
  queued_at: string;
}

export interface TasksResponse {
  selection: "uncertainty" | "random_fallback";
  tasks: TaskView[];
}

export interface SubmitAck {
  doc_id: string;
  labeled: number;
}

export interface PoolCounts {
  labeled: number;
  unlabeled: number;
  pending: number;
  validation: number;
}

export interface MetricReport {
  micro_precision: number;
  micro_recall: number;
  micro_f1: number;
  tp: number;
  fp: number;
  fn: number;
  n_samples: number;
}

export interface Metrics {
  rounds: number;
  counts: PoolCounts;
  aspect: MetricReport;
  sentiment: MetricReport;
}

export interface CurvePoint {
  round: number;
  labeled_count: number;
  micro_precision: number;
  micro_recall: number;
  micro_f1: number;
}

export interface Curve {
  setting: string;
  seed: number | string;
  points: { aspect: CurvePoint[]; sentiment: CurvePoint[] };
}

export interface TrainStatus {
  status: "idle" | "running" | "done" | "failed";
  detail: string | null;
}
