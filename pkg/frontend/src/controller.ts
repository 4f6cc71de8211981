/**
 * Two-phase test controller.
 *
 * Phase "browse": each image is shown for free zoom/pan interaction; Next
 * posts session_end and moves on.  Phase "mark": the same images come back
 * and the user draws rectangles around what they found interesting (with
 * undo); Next submits the rectangles.  Progress (and the session clock of a
 * half-finished image) persists to storage, so a reload resumes where the
 * user left off without breaking the stream's timestamp order.
 */

import { ApiClient } from "./client.js";
import { MarkPad } from "./marks.js";
import { ViewportTracker } from "./tracker.js";
import type { EventEnvelope, ImageInfo, Rect, ScreenView } from "./types.js";

export type TestPhase = "browse" | "mark" | "done";

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

export interface TestControllerOptions {
  client: ApiClient;
  images: ImageInfo[];
  storage?: StorageLike;
  debounceMs?: number;
  setTimer?: (callback: () => void, ms: number) => unknown;
  clearTimer?: (handle: unknown) => void;
}

interface Progress {
  phase: TestPhase;
  imageIndex: number;
  tBase: number;
}

export const BROWSE_INSTRUCTION =
  "Browse each image freely: zoom and pan as much as you like. " +
  "Click Next when you are done with an image.";
export const MARK_INSTRUCTION =
  "Draw rectangles around the parts of the image you found interesting. " +
  "The undo button removes the last rectangle. Click Next to submit.";

export class TestController {
  readonly images: ImageInfo[];
  phase: TestPhase = "browse";
  imageIndex = 0;

  private readonly client: ApiClient;
  private readonly storage: StorageLike | null;
  private readonly storageKey: string;
  private readonly trackerExtras: Pick<
    TestControllerOptions,
    "debounceMs" | "setTimer" | "clearTimer"
  >;
  private tracker: ViewportTracker | null = null;
  private pad: MarkPad | null = null;
  private tBase = 0;

  constructor(options: TestControllerOptions) {
    if (options.images.length === 0) throw new Error("test needs at least one image");
    this.client = options.client;
    this.images = options.images;
    this.storage = options.storage ?? null;
    this.storageKey = `interest-miner:${options.client.testId}:${options.client.userId}`;
    this.trackerExtras = {
      debounceMs: options.debounceMs,
      setTimer: options.setTimer,
      clearTimer: options.clearTimer,
    };
    const saved = this.load();
    if (saved) {
      this.phase = saved.phase;
      this.imageIndex = Math.min(saved.imageIndex, this.images.length - 1);
      this.tBase = saved.tBase;
    }
  }

  get currentImage(): ImageInfo | null {
    return this.phase === "done" ? null : this.images[this.imageIndex];
  }

  get instruction(): string {
    if (this.phase === "browse") return BROWSE_INSTRUCTION;
    if (this.phase === "mark") return MARK_INSTRUCTION;
    return "All done. Thank you!";
  }

  get pendingMarks(): readonly Rect[] {
    return this.pad ? this.pad.list() : [];
  }

  get droppedEvents(): number {
    return this.client.droppedCount;
  }

  /** Host calls this when the current image is rendered and interactive. */
  beginImage(initialView: ScreenView, now: number): void {
    const image = this.currentImage;
    if (!image) throw new Error("test already finished");
    if (this.phase === "browse") {
      this.tracker = new ViewportTracker({
        image,
        sink: (event) => this.onEvent(image, event),
        tStart: this.tBase,
        ...this.trackerExtras,
      });
      this.tracker.start(initialView, now);
    } else {
      this.pad = new MarkPad(image);
    }
  }

  /** Forward pan/zoom movement while browsing. */
  viewportChanged(view: ScreenView, now: number): void {
    if (this.phase !== "browse" || !this.tracker) {
      return; // phase-2 navigation is not recorded
    }
    this.tracker.viewportChanged(view, now);
  }

  drawMark(ax: number, ay: number, bx: number, by: number): Rect | null {
    if (this.phase !== "mark" || !this.pad) throw new Error("not in marking phase");
    return this.pad.draw(ax, ay, bx, by);
  }

  undoMark(): boolean {
    if (this.phase !== "mark" || !this.pad) throw new Error("not in marking phase");
    return this.pad.undo();
  }

  /** Advance past the current image; resolves when its data is delivered. */
  async next(now: number): Promise<void> {
    if (this.phase === "browse") {
      if (this.tracker) {
        this.tracker.end(now);
        this.tracker = null;
      }
      await this.client.flush();
    } else if (this.phase === "mark") {
      const image = this.currentImage;
      const rects = this.pad ? [...this.pad.list()] : [];
      this.pad = null;
      if (image && rects.length > 0) {
        await this.client.submitMarks(image.imageId, rects);
      }
    } else {
      return;
    }
    this.tBase = 0;
    if (this.imageIndex + 1 < this.images.length) {
      this.imageIndex += 1;
    } else if (this.phase === "browse") {
      this.phase = "mark";
      this.imageIndex = 0;
    } else {
      this.phase = "done";
      if (this.storage) this.storage.removeItem(this.storageKey);
      return;
    }
    this.persist();
  }

  private onEvent(image: ImageInfo, event: EventEnvelope): void {
    this.client.enqueueEvent(image.imageId, event);
    this.tBase = Math.max(this.tBase, event.t);
    this.persist();
  }

  private persist(): void {
    if (!this.storage) return;
    const progress: Progress = {
      phase: this.phase,
      imageIndex: this.imageIndex,
      tBase: this.tBase,
    };
    this.storage.setItem(this.storageKey, JSON.stringify(progress));
  }

  private load(): Progress | null {
    if (!this.storage) return null;
    const raw = this.storage.getItem(this.storageKey);
    if (!raw) return null;
    try {
      return JSON.parse(raw) as Progress;
    } catch {
      return null;
    }
  }
}
