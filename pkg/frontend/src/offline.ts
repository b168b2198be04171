/** Offline handling: a retry queue for submissions that never reached
 * the server, plus the predicate driving the banner.
 *
 * Only network failures queue; HTTP errors (400/404) are final answers
 * from the server and must surface to the form instead.
 */

import { OfflineError } from "./api.js";
import type { AssessmentPayload } from "./types.js";

export interface QueuedSubmission {
  payload: AssessmentPayload;
  attempts: number;
}

export class RetryQueue {
  private items: QueuedSubmission[] = [];
  /** false while the last health probe or submit failed */
  private lastContactOk = true;

  get size(): number {
    return this.items.length;
  }

  get pending(): readonly QueuedSubmission[] {
    return this.items;
  }

  /** Banner shows while anything is queued or the server was last seen down. */
  get bannerVisible(): boolean {
    return this.items.length > 0 || !this.lastContactOk;
  }

  markContact(ok: boolean): void {
    this.lastContactOk = ok;
  }

  enqueue(payload: AssessmentPayload): void {
    // a resubmission for the same (reviewer, image, run) replaces the
    // queued one; only the latest would win server-side anyway
    this.items = this.items.filter(
      (item) =>
        item.payload.reviewer !== payload.reviewer ||
        item.payload.image_id !== payload.image_id ||
        item.payload.run_id !== payload.run_id,
    );
    this.items.push({ payload, attempts: 0 });
    this.lastContactOk = false;
  }

  /** Try to flush in order; stops at the first network failure.
   *
   * Returns the submissions accepted this pass with whatever the
   * submit call resolved to. A validation or session error drops the
   * item (retrying cannot fix it) and is reported through onReject.
   */
  async flush<T>(
    submit: (payload: AssessmentPayload) => Promise<T>,
    onReject?: (item: QueuedSubmission, error: unknown) => void,
  ): Promise<Array<{ payload: AssessmentPayload; result: T }>> {
    const accepted: Array<{ payload: AssessmentPayload; result: T }> = [];
    while (this.items.length > 0) {
      const item = this.items[0];
      try {
        const result = await submit(item.payload);
        accepted.push({ payload: item.payload, result });
        this.items.shift();
        this.lastContactOk = true;
      } catch (error) {
        if (error instanceof OfflineError) {
          item.attempts += 1;
          this.lastContactOk = false;
          break;
        }
        this.items.shift();
        onReject?.(item, error);
      }
    }
    return accepted;
  }
}
