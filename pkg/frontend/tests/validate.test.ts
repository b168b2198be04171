import { describe, expect, it } from "vitest";

import { validateDraft } from "../src/validate.js";

const CTX = {
  session_id: "abc123abc123",
  reviewer: "sam",
  image_id: "im001",
  run_id: "run_a",
};

const GOOD = {
  rating: "sufficient",
  others_detected: "no",
  fp_count: "2",
};

describe("validateDraft", () => {
  it("accepts a complete draft and builds the payload", () => {
    const result = validateDraft(GOOD, CTX);
    expect(result.ok).toBe(true);
    expect(result.payload).toEqual({
      session_id: "abc123abc123",
      reviewer: "sam",
      image_id: "im001",
      run_id: "run_a",
      rating: "sufficient",
      others_detected: "no",
      fp_count: 2,
    });
  });

  it("passes comparison and trimmed note through when set", () => {
    const result = validateDraft(
      { ...GOOD, comparison: "a_better", note: "  borderline  " },
      CTX,
    );
    expect(result.payload?.comparison).toBe("a_better");
    expect(result.payload?.note).toBe("borderline");
  });

  it("requires rating and others_detected", () => {
    const result = validateDraft({ fp_count: "0" }, CTX);
    expect(result.ok).toBe(false);
    expect(result.errors.rating).toBe("required");
    expect(result.errors.others_detected).toBe("required");
  });

  it("rejects unknown enum values with the server's field names", () => {
    const result = validateDraft(
      { rating: "great", others_detected: "maybe", fp_count: "1", comparison: "tie" },
      CTX,
    );
    expect(result.ok).toBe(false);
    expect(Object.keys(result.errors).sort()).toEqual([
      "comparison",
      "others_detected",
      "rating",
    ]);
  });

  it("rejects missing, negative, and fractional fp_count", () => {
    for (const fp of [undefined, "-1", "1.5", "x"]) {
      const result = validateDraft({ ...GOOD, fp_count: fp }, CTX);
      expect(result.ok).toBe(false);
      expect(result.errors.fp_count).toBe("must be a non-negative integer");
    }
  });

  it("accepts zero false positives", () => {
    const result = validateDraft({ ...GOOD, fp_count: "0" }, CTX);
    expect(result.ok).toBe(true);
    expect(result.payload?.fp_count).toBe(0);
  });

  it("requires a reviewer name", () => {
    const result = validateDraft(GOOD, { ...CTX, reviewer: "   " });
    expect(result.ok).toBe(false);
    expect(result.errors.reviewer).toBe("required");
  });

  it("rejects an unknown run id", () => {
    const result = validateDraft(GOOD, { ...CTX, run_id: "run_c" });
    expect(result.ok).toBe(false);
    expect(result.errors.run_id).toContain("run_a");
  });
});
