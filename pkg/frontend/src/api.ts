/** Thin typed client over the review service HTTP API.
 *
 * All methods reject with ApiError subtypes; ValidationError carries the
 * per-field message map so forms can render errors inline.
 */

import type {
  AssessmentPayload,
  FieldErrorMap,
  ImageEntry,
  Session,
  SessionSummary,
  Tally,
} from "./types.js";

export class ApiError extends Error {
  constructor(message: string, readonly status?: number) {
    super(message);
    this.name = "ApiError";
  }
}

/** A 400 with {"errors": {field: message}}. */
export class ValidationError extends ApiError {
  constructor(readonly errors: FieldErrorMap) {
    super(
      Object.entries(errors)
        .map(([k, v]) => `${k}: ${v}`)
        .join("; "),
      400,
    );
    this.name = "ValidationError";
  }
}

/** Network failure (server unreachable), as opposed to an HTTP error. */
export class OfflineError extends ApiError {
  constructor(cause: unknown) {
    super(`server unreachable: ${String(cause)}`);
    this.name = "OfflineError";
  }
}

async function request<T>(
  base: string,
  path: string,
  init?: RequestInit,
): Promise<T> {
  let response: Response;
  try {
    response = await fetch(base + path, init);
  } catch (cause) {
    throw new OfflineError(cause);
  }
  let body: unknown = null;
  const text = await response.text();
  if (text) {
    try {
      body = JSON.parse(text);
    } catch {
      body = null;
    }
  }
  if (response.status === 400 && body && typeof body === "object" && "errors" in body) {
    throw new ValidationError((body as { errors: FieldErrorMap }).errors);
  }
  if (!response.ok) {
    const detail =
      body && typeof body === "object" && "error" in body
        ? String((body as { error: unknown }).error)
        : response.statusText;
    throw new ApiError(`${path}: ${detail}`, response.status);
  }
  return body as T;
}

export class ReviewApi {
  constructor(readonly base: string = "") {}

  health(): Promise<{ status: string }> {
    return request(this.base, "/api/health");
  }

  listSessions(): Promise<SessionSummary[]> {
    return request(this.base, "/api/sessions");
  }

  getSession(sessionId: string): Promise<Session> {
    return request(this.base, `/api/sessions/${encodeURIComponent(sessionId)}`);
  }

  getImages(sessionId: string): Promise<ImageEntry[]> {
    return request(this.base, `/api/sessions/${encodeURIComponent(sessionId)}/images`);
  }

  getTally(sessionId: string): Promise<Tally> {
    return request(this.base, `/api/sessions/${encodeURIComponent(sessionId)}/tally`);
  }

  submitAssessment(payload: AssessmentPayload): Promise<{ ok: boolean; seq: number }> {
    return request(this.base, "/api/assessments", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  /** URL for a session asset (originals and overlays). */
  assetUrl(relPath: string): string {
    return `${this.base}/assets/${relPath}`;
  }
}
