/**
 * Phase-2 marking pad: rectangles drawn in image coordinates, with undo.
 * Drags clamp to the image and zero-area results are discarded.
 */

import type { ImageInfo, Rect } from "./types.js";
import { clampRect } from "./types.js";

export class MarkPad {
  private rects: Rect[] = [];

  constructor(private readonly image: ImageInfo) {}

  /** Finish one drag gesture between two image-coordinate corners. */
  draw(ax: number, ay: number, bx: number, by: number): Rect | null {
    const raw: Rect = {
      x0: Math.floor(Math.min(ax, bx)),
      y0: Math.floor(Math.min(ay, by)),
      x1: Math.ceil(Math.max(ax, bx)),
      y1: Math.ceil(Math.max(ay, by)),
    };
    const rect = clampRect(raw, this.image);
    if (rect) this.rects.push(rect);
    return rect;
  }

  /** Remove the most recent rectangle; true if one was removed. */
  undo(): boolean {
    return this.rects.pop() !== undefined;
  }

  list(): readonly Rect[] {
    return this.rects;
  }

  clear(): void {
    this.rects = [];
  }
}
