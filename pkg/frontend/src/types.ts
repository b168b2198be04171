/** Shapes exchanged with the review service API. */

export const RATINGS = ["unsatisfactory", "sufficient", "satisfactory"] as const;
export const OTHERS_DETECTED = ["yes", "no", "not_applicable"] as const;
export const COMPARISONS = ["a_better", "similar", "b_better"] as const;
export const RUN_IDS = ["run_a", "run_b"] as const;

export type Rating = (typeof RATINGS)[number];
export type OthersDetected = (typeof OTHERS_DETECTED)[number];
export type Comparison = (typeof COMPARISONS)[number];
export type RunId = (typeof RUN_IDS)[number];

export interface SessionSummary {
  session_id: string;
  name: string;
  run_a: string;
  run_b: string;
  n_images: number;
}

export interface ImageEntry {
  image_id: string;
  original: string;
  run_a_overlay?: string;
  run_b_overlay?: string;
}

export interface Session {
  session_id: string;
  name?: string;
  run_a: string;
  run_b: string;
  images: ImageEntry[];
}

export interface Tally {
  session_id: string;
  ratings: Record<RunId, Record<Rating, number>>;
  false_positives: Record<RunId, number>;
  comparisons: Record<Comparison, number>;
  images_assessed: Record<RunId, number>;
  n_assessments: number;
}

export interface AssessmentPayload {
  session_id: string;
  reviewer: string;
  image_id: string;
  run_id: RunId;
  rating: Rating;
  others_detected: OthersDetected;
  fp_count: number;
  comparison?: Comparison;
  note?: string;
}

/** Per-field messages as returned by the service on a 400. */
export type FieldErrorMap = Record<string, string>;
