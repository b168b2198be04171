/** Client-side form validation mirroring the service's field rules.
 *
 * The server stays authoritative; this only catches obvious mistakes
 * before a round trip and renders the same field names the server uses,
 * so inline errors look identical either way.
 */

import { COMPARISONS, OTHERS_DETECTED, RATINGS, RUN_IDS } from "./types.js";
import type { AssessmentPayload, FieldErrorMap } from "./types.js";

/** Unvalidated form state: everything optional, fp_count still text. */
export interface FormDraft {
  rating?: string;
  others_detected?: string;
  fp_count?: string;
  comparison?: string;
  note?: string;
}

export interface ValidationResult {
  ok: boolean;
  errors: FieldErrorMap;
  payload?: AssessmentPayload;
}

function oneOf(value: string, allowed: readonly string[]): boolean {
  return (allowed as readonly string[]).includes(value);
}

export function validateDraft(
  draft: FormDraft,
  context: { session_id: string; reviewer: string; image_id: string; run_id: string },
): ValidationResult {
  const errors: FieldErrorMap = {};
  if (!context.reviewer.trim()) {
    errors.reviewer = "required";
  }
  if (!oneOf(context.run_id, RUN_IDS)) {
    errors.run_id = `must be one of ${JSON.stringify(RUN_IDS)}`;
  }
  if (!draft.rating) {
    errors.rating = "required";
  } else if (!oneOf(draft.rating, RATINGS)) {
    errors.rating = `must be one of ${JSON.stringify(RATINGS)}`;
  }
  if (!draft.others_detected) {
    errors.others_detected = "required";
  } else if (!oneOf(draft.others_detected, OTHERS_DETECTED)) {
    errors.others_detected = `must be one of ${JSON.stringify(OTHERS_DETECTED)}`;
  }
  const fpText = (draft.fp_count ?? "").trim();
  const fp = Number(fpText);
  if (fpText === "" || !Number.isInteger(fp) || fp < 0) {
    errors.fp_count = "must be a non-negative integer";
  }
  if (draft.comparison && !oneOf(draft.comparison, COMPARISONS)) {
    errors.comparison = `must be one of ${JSON.stringify(COMPARISONS)} or omitted`;
  }
  if (Object.keys(errors).length > 0) {
    return { ok: false, errors };
  }
  const payload: AssessmentPayload = {
    session_id: context.session_id,
    reviewer: context.reviewer.trim(),
    image_id: context.image_id,
    run_id: context.run_id as AssessmentPayload["run_id"],
    rating: draft.rating as AssessmentPayload["rating"],
    others_detected: draft.others_detected as AssessmentPayload["others_detected"],
    fp_count: fp,
  };
  if (draft.comparison) {
    payload.comparison = draft.comparison as AssessmentPayload["comparison"];
  }
  if (draft.note && draft.note.trim()) {
    payload.note = draft.note.trim();
  }
  return { ok: true, errors: {}, payload };
}
