/** Shared zoom/pan model for the three image panes.
 *
 * One ViewTransform drives all panes, which is what keeps them in
 * sync: the same CSS transform string is applied to each image. Zoom
 * anchors the point under the cursor; pan and zoom are clamped so the
 * image cannot be lost off-screen.
 */

export interface ViewTransform {
  scale: number;
  tx: number;
  ty: number;
}

export const MIN_SCALE = 1;
export const MAX_SCALE = 8;

export function identity(): ViewTransform {
  return { scale: 1, tx: 0, ty: 0 };
}

function clampScale(scale: number): number {
  return Math.min(MAX_SCALE, Math.max(MIN_SCALE, scale));
}

/** Keep the viewport covered: translation bounded by the overflow. */
function clampTranslation(t: ViewTransform, width: number, height: number): ViewTransform {
  const maxX = (t.scale - 1) * width;
  const maxY = (t.scale - 1) * height;
  return {
    scale: t.scale,
    // + 0 folds the -0 that clamping can produce into plain 0
    tx: Math.min(0, Math.max(-maxX, t.tx)) + 0,
    ty: Math.min(0, Math.max(-maxY, t.ty)) + 0,
  };
}

/** Zoom by `factor` keeping the content under (cx, cy) stationary.
 *
 * (cx, cy) are viewport coordinates. Solving for the new translation:
 * the content point p = (c - t) / s must satisfy c = p * s' + t', so
 * t' = c - (c - t) * s' / s.
 */
export function zoomAt(
  t: ViewTransform,
  cx: number,
  cy: number,
  factor: number,
  width: number,
  height: number,
): ViewTransform {
  const scale = clampScale(t.scale * factor);
  const ratio = scale / t.scale;
  const next = {
    scale,
    tx: cx - (cx - t.tx) * ratio,
    ty: cy - (cy - t.ty) * ratio,
  };
  return clampTranslation(next, width, height);
}

export function panBy(
  t: ViewTransform,
  dx: number,
  dy: number,
  width: number,
  height: number,
): ViewTransform {
  return clampTranslation({ scale: t.scale, tx: t.tx + dx, ty: t.ty + dy }, width, height);
}

/** Where a viewport point lands in content coordinates. */
export function toContent(t: ViewTransform, cx: number, cy: number): [number, number] {
  return [(cx - t.tx) / t.scale, (cy - t.ty) / t.scale];
}

/** CSS transform string, identical for every synchronized pane. */
export function cssTransform(t: ViewTransform): string {
  return `translate(${t.tx}px, ${t.ty}px) scale(${t.scale})`;
}
