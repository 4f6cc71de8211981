/** Wire types shared with the ingestion API (field names match the server). */

export type EventKind = "zoom" | "pan" | "session_end";

export interface EventEnvelope {
  kind: EventKind;
  /** milliseconds since the image session started */
  t: number;
  x0?: number;
  y0?: number;
  x1?: number;
  y1?: number;
}

/** Half-open pixel rectangle in image coordinates. */
export interface Rect {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
}

export interface ImageInfo {
  imageId: string;
  width: number;
  height: number;
}

/**
 * What the host page's zoom widget reports: the affine view transform
 * (screenPoint = imagePoint * scale + offset) plus the viewport size in
 * screen pixels.
 */
export interface ScreenView {
  scale: number;
  offsetX: number;
  offsetY: number;
  viewWidth: number;
  viewHeight: number;
}

/** Clamp a raw rectangle to the image; null when nothing remains. */
export function clampRect(rect: Rect, image: ImageInfo): Rect | null {
  const x0 = Math.max(0, Math.min(rect.x0, image.width));
  const y0 = Math.max(0, Math.min(rect.y0, image.height));
  const x1 = Math.max(0, Math.min(rect.x1, image.width));
  const y1 = Math.max(0, Math.min(rect.y1, image.height));
  if (x0 >= x1 || y0 >= y1) return null;
  return { x0, y0, x1, y1 };
}

/** Image-coordinate rectangle currently visible under a view transform. */
export function visibleRect(view: ScreenView, image: ImageInfo): Rect | null {
  return clampRect(
    {
      x0: Math.floor(-view.offsetX / view.scale),
      y0: Math.floor(-view.offsetY / view.scale),
      x1: Math.ceil((view.viewWidth - view.offsetX) / view.scale),
      y1: Math.ceil((view.viewHeight - view.offsetY) / view.scale),
    },
    image,
  );
}
