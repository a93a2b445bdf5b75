export interface ReviewItem {
  record_id: string;
  question_text: string;
  reference_answer: string;
  student_answer: string;
  predicted_mean: number | null;
  // null means the model produced nothing parseable at all: maximally uncertain.
  indecisiveness_score: number | null;
  sample_feedbacks: string[];
  status: "pending" | "done";
  human_grade: number | null;
}

export interface Progress {
  pending: number;
  done: number;
}

export type SubmitResult =
  | { kind: "ok" }
  | { kind: "invalid-grade"; reason: string }   // 422
  | { kind: "unknown-record"; reason: string }  // 404
  | { kind: "not-routed"; reason: string }      // 409
  | { kind: "offline"; reason: string };        // no connection; no offline queue

// The only grades the control may produce: 0.0, 0.5, ..., 5.0.
export const LATTICE_GRADES: readonly number[] = Object.freeze(
  Array.from({ length: 11 }, (_, i) => i / 2),
);
