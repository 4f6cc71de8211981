/**
 * HTTP client for the ingestion API with an ordered, capped outbound queue.
 *
 * Events queue locally and flush as batches; a failed flush puts the batch
 * back at the head of the queue and retries on the next flush, so order is
 * preserved.  When the queue overflows its cap the oldest events are dropped
 * and counted, never silently.
 */

import type { EventEnvelope, Rect } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface ApiClientOptions {
  baseUrl: string;
  testId: string;
  userId: string;
  /** outbound queue cap; oldest events drop beyond it (default 1000) */
  queueCap?: number;
  /** max events per POST (default 100) */
  batchSize?: number;
  fetchImpl?: FetchLike;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly body: string,
  ) {
    super(`API ${status}: ${body}`);
  }
}

export class ApiClient {
  readonly baseUrl: string;
  readonly testId: string;
  readonly userId: string;
  readonly queueCap: number;
  readonly batchSize: number;
  private readonly fetchImpl: FetchLike;
  private queue: { imageId: string; event: EventEnvelope }[] = [];
  private flushing: Promise<void> | null = null;
  private flushScheduled = false;
  /** events discarded because the retry queue overflowed */
  droppedCount = 0;

  constructor(options: ApiClientOptions) {
    this.baseUrl = options.baseUrl.replace(/\/+$/, "");
    this.testId = options.testId;
    this.userId = options.userId;
    this.queueCap = options.queueCap ?? 1000;
    this.batchSize = options.batchSize ?? 100;
    this.fetchImpl = options.fetchImpl ?? fetch.bind(globalThis);
  }

  get pendingCount(): number {
    return this.queue.length;
  }

  private async post(path: string, body: unknown): Promise<Response> {
    return this.fetchImpl(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  async registerImage(imageId: string, width: number, height: number): Promise<void> {
    const response = await this.fetchImpl(
      `${this.baseUrl}/api/v1/images/${encodeURIComponent(imageId)}`,
      {
        method: "PUT",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ width, height }),
      },
    );
    if (!response.ok) throw new ApiError(response.status, await response.text());
  }

  /** Queue one event for the image's stream; flushes asynchronously. */
  enqueueEvent(imageId: string, event: EventEnvelope): void {
    this.queue.push({ imageId, event });
    while (this.queue.length > this.queueCap) {
      this.queue.shift();
      this.droppedCount += 1;
    }
    if (!this.flushScheduled) {
      // deferred one microtask so a synchronous burst becomes one batch
      this.flushScheduled = true;
      queueMicrotask(() => {
        this.flushScheduled = false;
        void this.flush().catch(() => {
          /* kept in queue; a later flush retries */
        });
      });
    }
  }

  /** Drain the queue in order. Resolves when everything queued is posted. */
  flush(): Promise<void> {
    if (!this.flushing) {
      this.flushing = this.drain().finally(() => {
        this.flushing = null;
      });
    }
    return this.flushing;
  }

  private async drain(): Promise<void> {
    while (this.queue.length > 0) {
      const imageId = this.queue[0].imageId;
      let n = 0;
      while (
        n < this.queue.length &&
        n < this.batchSize &&
        this.queue[n].imageId === imageId
      ) {
        n += 1;
      }
      const batch = this.queue.slice(0, n);
      // a thrown network error leaves the batch queued for the next flush
      const response = await this.post(
        `/api/v1/tests/${encodeURIComponent(this.testId)}/images/${encodeURIComponent(
          imageId,
        )}/users/${encodeURIComponent(this.userId)}/events`,
        batch.map((item) => item.event),
      );
      if (!response.ok) {
        // the server refused the batch outright; keeping it would wedge the
        // queue forever, so drop it and surface the count
        this.queue.splice(0, n);
        this.droppedCount += n;
        throw new ApiError(response.status, await response.text());
      }
      this.queue.splice(0, n);
    }
  }

  /** Post one phase-2 marks submission (replaces any earlier submission). */
  async submitMarks(imageId: string, rects: Rect[]): Promise<number> {
    const response = await this.post(
      `/api/v1/tests/${encodeURIComponent(this.testId)}/images/${encodeURIComponent(
        imageId,
      )}/users/${encodeURIComponent(this.userId)}/marks`,
      rects,
    );
    if (!response.ok) throw new ApiError(response.status, await response.text());
    const payload = (await response.json()) as { count: number };
    return payload.count;
  }
}
