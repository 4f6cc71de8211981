import type { EventEnvelope, ImageInfo } from "../src/types.js";

/** Deterministic clock + timer wheel for driving debounce logic in tests. */
export class FakeClock {
  now = 0;
  private timers: { at: number; cb: () => void; id: number }[] = [];
  private seq = 0;

  setTimer = (cb: () => void, ms: number): unknown => {
    const id = ++this.seq;
    this.timers.push({ at: this.now + ms, cb, id });
    return id;
  };

  clearTimer = (handle: unknown): void => {
    this.timers = this.timers.filter((t) => t.id !== handle);
  };

  advance(ms: number): void {
    const target = this.now + ms;
    for (;;) {
      const due = this.timers
        .filter((t) => t.at <= target)
        .sort((a, b) => a.at - b.at || a.id - b.id)[0];
      if (!due) break;
      this.timers = this.timers.filter((t) => t.id !== due.id);
      this.now = due.at;
      due.cb();
    }
    this.now = target;
  }
}

/**
 * The server's validation rules, replicated so offline suites can assert a
 * corpus would be accepted verbatim: bbox present iff not session_end, with
 * positive area inside the image; timestamps non-negative and non-decreasing.
 */
export function serverWouldReject(
  events: EventEnvelope[],
  image: ImageInfo,
): string | null {
  let tail = -Infinity;
  for (const event of events) {
    if (event.t < 0 || !Number.isInteger(event.t)) return `bad t ${event.t}`;
    if (event.t < tail) return `t ${event.t} precedes tail ${tail}`;
    tail = event.t;
    if (event.kind === "session_end") {
      if (event.x0 !== undefined) return "session_end with bbox";
      continue;
    }
    const { x0, y0, x1, y1 } = event;
    if (x0 === undefined || y0 === undefined || x1 === undefined || y1 === undefined) {
      return "missing bbox";
    }
    if (![x0, y0, x1, y1].every(Number.isInteger)) return "non-integer bbox";
    const cx0 = Math.max(0, Math.min(x0, image.width));
    const cy0 = Math.max(0, Math.min(y0, image.height));
    const cx1 = Math.max(0, Math.min(x1, image.width));
    const cy1 = Math.max(0, Math.min(y1, image.height));
    if (cx0 >= cx1 || cy0 >= cy1) return `zero-area bbox [${x0},${y0},${x1},${y1}]`;
  }
  return null;
}

/** fetch stub that records every request and answers from a handler. */
export function recordingFetch(
  handler: (url: string, init?: RequestInit) => { status: number; body?: unknown },
): {
  fetchImpl: (url: string, init?: RequestInit) => Promise<Response>;
  calls: { url: string; body: unknown }[];
} {
  const calls: { url: string; body: unknown }[] = [];
  return {
    calls,
    fetchImpl: async (url, init) => {
      const body = init?.body ? JSON.parse(init.body as string) : undefined;
      calls.push({ url, body });
      const result = handler(url, init);
      return new Response(JSON.stringify(result.body ?? {}), {
        status: result.status,
        headers: { "content-type": "application/json" },
      });
    },
  };
}
