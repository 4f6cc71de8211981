/**
 * Viewport tracker: turns a host page's raw view-transform changes into
 * debounced, clamped, session-relative viewport events.
 *
 * The host widget calls `viewportChanged(view, now)` on every pan/zoom tick;
 * bursts are debounced on the trailing edge (default 100 ms) so a drag
 * gesture produces one event for where the user settled, stamped with the
 * time of the last movement.  Kind is "zoom" when the scale moved beyond a
 * relative epsilon since the previously emitted event, else "pan".
 */

import type { EventEnvelope, ImageInfo, Rect, ScreenView } from "./types.js";
import { visibleRect } from "./types.js";

export interface TrackerOptions {
  image: ImageInfo;
  /** receives each settled event, in order */
  sink: (event: EventEnvelope) => void;
  /** trailing-edge debounce window in ms (default 100) */
  debounceMs?: number;
  /** relative scale change that counts as zooming (default 1e-3) */
  zoomEpsilon?: number;
  /**
   * session-relative time the clock starts at (default 0); a resumed session
   * passes the interrupted session's last timestamp so the stream's
   * timestamps keep non-decreasing
   */
  tStart?: number;
  /** injectable timer hooks for tests */
  setTimer?: (callback: () => void, ms: number) => unknown;
  clearTimer?: (handle: unknown) => void;
}

export class ViewportTracker {
  private readonly image: ImageInfo;
  private readonly sink: (event: EventEnvelope) => void;
  private readonly debounceMs: number;
  private readonly zoomEpsilon: number;
  private readonly setTimer: (callback: () => void, ms: number) => unknown;
  private readonly clearTimer: (handle: unknown) => void;

  private readonly tStart: number;
  private t0 = 0;
  private started = false;
  private ended = false;
  private lastEmittedScale = 0;
  private lastEmittedT = 0;
  private pending: { view: ScreenView; at: number } | null = null;
  private timer: unknown = null;

  constructor(options: TrackerOptions) {
    this.image = options.image;
    this.sink = options.sink;
    this.debounceMs = options.debounceMs ?? 100;
    this.zoomEpsilon = options.zoomEpsilon ?? 1e-3;
    this.tStart = options.tStart ?? 0;
    this.lastEmittedT = this.tStart;
    this.setTimer = options.setTimer ?? ((cb, ms) => setTimeout(cb, ms));
    this.clearTimer = options.clearTimer ?? ((h) => clearTimeout(h as number));
  }

  /**
   * Begin the session: records t0 and immediately emits the initial
   * full-image viewport at t = tStart (0 for a fresh session), which anchors
   * the session clock.
   */
  start(initialView: ScreenView, now: number): void {
    if (this.started) throw new Error("session already started");
    this.started = true;
    this.t0 = now;
    this.lastEmittedScale = initialView.scale;
    this.emit(initialView, now, "pan");
  }

  /** Report a view change; the settled state emits after the quiet window. */
  viewportChanged(view: ScreenView, now: number): void {
    if (!this.started || this.ended) throw new Error("session not active");
    this.pending = { view, at: now };
    if (this.timer !== null) this.clearTimer(this.timer);
    this.timer = this.setTimer(() => this.settle(), this.debounceMs);
  }

  /** Flush any pending debounced event without waiting for the timer. */
  settle(): void {
    if (this.timer !== null) {
      this.clearTimer(this.timer);
      this.timer = null;
    }
    if (!this.pending) return;
    const { view, at } = this.pending;
    this.pending = null;
    const relativeChange =
      Math.abs(view.scale - this.lastEmittedScale) / Math.max(this.lastEmittedScale, 1e-12);
    const kind = relativeChange > this.zoomEpsilon ? "zoom" : "pan";
    this.emit(view, at, kind);
  }

  /** Settle outstanding movement, then emit session_end. */
  end(now: number): void {
    if (!this.started || this.ended) return;
    this.settle();
    this.ended = true;
    this.sink({ kind: "session_end", t: this.clock(now) });
  }

  private clock(now: number): number {
    // session-relative and monotone even if the host clock jitters backwards
    const t = this.tStart + Math.max(0, Math.round(now - this.t0));
    return Math.max(t, this.lastEmittedT);
  }

  private emit(view: ScreenView, at: number, kind: "zoom" | "pan"): void {
    const rect: Rect | null = visibleRect(view, this.image);
    if (!rect) return; // viewport entirely off-image: nothing to report
    const t = this.clock(at);
    this.sink({ kind, t, ...rect });
    this.lastEmittedT = t;
    this.lastEmittedScale = view.scale;
  }
}
