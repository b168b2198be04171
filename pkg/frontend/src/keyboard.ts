/** Keyboard navigation mapping.
 *
 * Arrows and j/k move between images, digits set the rating on a run
 * (1..3 for run A, shift+1..3 or 7..9 for run B), u jumps to the next
 * unassessed image, 0 resets zoom. Keys typed into form fields are
 * never intercepted.
 */

export type KeyAction =
  | { type: "next" }
  | { type: "prev" }
  | { type: "next_unassessed" }
  | { type: "reset_view" }
  | { type: "rate"; run: "run_a" | "run_b"; ratingIndex: 0 | 1 | 2 };

const RUN_A_DIGITS: Record<string, 0 | 1 | 2> = { "1": 0, "2": 1, "3": 2 };
const RUN_B_DIGITS: Record<string, 0 | 1 | 2> = { "7": 0, "8": 1, "9": 2 };

export function keyAction(
  key: string,
  options: { shift?: boolean; inFormField?: boolean } = {},
): KeyAction | null {
  if (options.inFormField) {
    return null;
  }
  switch (key) {
    case "ArrowRight":
    case "j":
      return { type: "next" };
    case "ArrowLeft":
    case "k":
      return { type: "prev" };
    case "u":
      return { type: "next_unassessed" };
    case "0":
      return { type: "reset_view" };
    default:
      break;
  }
  if (key in RUN_A_DIGITS) {
    const ratingIndex = RUN_A_DIGITS[key];
    return options.shift
      ? { type: "rate", run: "run_b", ratingIndex }
      : { type: "rate", run: "run_a", ratingIndex };
  }
  if (key in RUN_B_DIGITS) {
    return { type: "rate", run: "run_b", ratingIndex: RUN_B_DIGITS[key] };
  }
  return null;
}
