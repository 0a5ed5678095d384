export type LabelVerdict = "yes" | "maybe" | "no";
export type AuditCategory = "clear-mistake" | "not-a-mistake" | "undecidable";

export const LABEL_VERDICTS: readonly LabelVerdict[] = ["yes", "maybe", "no"];
export const AUDIT_CATEGORIES: readonly AuditCategory[] = [
  "clear-mistake",
  "not-a-mistake",
  "undecidable",
];

export interface AuditPayload {
  model: string;
  metric: "original" | "real";
  predicted: number;
  correct_labels: number[];
  exemplars: Record<string, string[]>;
}

export interface Task {
  task_id: string;
  kind: "label-assessment" | "mistake-audit";
  image_id: string;
  options: number[];
  required_raters: number;
  audit?: AuditPayload;
}

export interface Ack {
  task_id: string;
  answers: number;
  complete: boolean;
}

export interface Progress {
  tasks: number;
  complete: number;
  answers: number;
}
