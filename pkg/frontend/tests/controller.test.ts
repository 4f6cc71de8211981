import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/client.js";
import {
  BROWSE_INSTRUCTION,
  MARK_INSTRUCTION,
  TestController,
} from "../src/controller.js";
import type { StorageLike } from "../src/controller.js";
import type { EventEnvelope, ImageInfo, ScreenView } from "../src/types.js";
import { FakeClock, recordingFetch, serverWouldReject } from "./util.js";

const IMAGES: ImageInfo[] = [
  { imageId: "imgA", width: 1000, height: 800 },
  { imageId: "imgB", width: 640, height: 480 },
];

function fullView(image: ImageInfo, scale = 0.5): ScreenView {
  return {
    scale,
    offsetX: 0,
    offsetY: 0,
    viewWidth: image.width * scale,
    viewHeight: image.height * scale,
  };
}

class MapStorage implements StorageLike {
  private map = new Map<string, string>();
  getItem(key: string) {
    return this.map.get(key) ?? null;
  }
  setItem(key: string, value: string) {
    this.map.set(key, value);
  }
  removeItem(key: string) {
    this.map.delete(key);
  }
}

function harness(storage?: StorageLike) {
  const streams = new Map<string, EventEnvelope[]>();
  const marks = new Map<string, unknown[]>();
  const { fetchImpl } = recordingFetch((url, init) => {
    const eventMatch = url.match(/images\/([^/]+)\/users\/[^/]+\/events$/);
    const markMatch = url.match(/images\/([^/]+)\/users\/[^/]+\/marks$/);
    const body = JSON.parse((init?.body as string) ?? "null");
    if (eventMatch) {
      const list = streams.get(eventMatch[1]) ?? [];
      streams.set(eventMatch[1], list.concat(body));
      return { status: 201, body: { seqs: body.map((_: unknown, i: number) => i) } };
    }
    if (markMatch) {
      marks.set(markMatch[1], body);
      return { status: 201, body: { count: body.length } };
    }
    return { status: 404, body: { error: "no route" } };
  });
  const client = new ApiClient({
    baseUrl: "http://srv",
    testId: "t1",
    userId: "u1",
    fetchImpl,
  });
  const clock = new FakeClock();
  const controller = new TestController({
    client,
    images: IMAGES,
    storage,
    setTimer: clock.setTimer,
    clearTimer: clock.clearTimer,
  });
  return { clock, controller, streams, marks };
}

async function browseImage(
  h: ReturnType<typeof harness>,
  interact: boolean,
): Promise<void> {
  const image = h.controller.currentImage!;
  h.controller.beginImage(fullView(image), h.clock.now);
  if (interact) {
    h.clock.advance(200);
    h.controller.viewportChanged(
      { ...fullView(image), scale: 1.5, offsetX: -40, offsetY: -30 },
      h.clock.now,
    );
    h.clock.advance(150); // let the debounce settle
  }
  h.clock.advance(50);
  await h.controller.next(h.clock.now);
}

describe("two-phase protocol", () => {
  it("produces per-image streams plus one marks submission per image", async () => {
    const h = harness();
    expect(h.controller.phase).toBe("browse");
    expect(h.controller.instruction).toBe(BROWSE_INSTRUCTION);
    await browseImage(h, true);
    expect(h.controller.currentImage?.imageId).toBe("imgB");
    await browseImage(h, true);

    expect(h.controller.phase).toBe("mark");
    expect(h.controller.instruction).toBe(MARK_INSTRUCTION);
    for (const image of IMAGES) {
      expect(h.controller.currentImage?.imageId).toBe(image.imageId);
      h.controller.beginImage(fullView(image), h.clock.now);
      h.controller.drawMark(10, 10, 60, 40);
      h.clock.advance(100);
      await h.controller.next(h.clock.now);
    }
    expect(h.controller.phase).toBe("done");

    for (const image of IMAGES) {
      const stream = h.streams.get(image.imageId)!;
      expect(stream[0]).toMatchObject({ t: 0, x0: 0, y0: 0 });
      expect(stream[stream.length - 1].kind).toBe("session_end");
      expect(stream.filter((e) => e.kind === "session_end")).toHaveLength(1);
      expect(serverWouldReject(stream, image)).toBeNull();
      expect(h.marks.get(image.imageId)).toEqual([{ x0: 10, y0: 10, x1: 60, y1: 40 }]);
    }
  });

  it("skipping interaction leaves initial viewport + session_end only", async () => {
    const h = harness();
    await browseImage(h, false);
    const stream = h.streams.get("imgA")!;
    expect(stream.map((e) => e.kind)).toEqual(["pan", "session_end"]);
  });

  it("undo removes the last rectangle before submission", async () => {
    const h = harness();
    await browseImage(h, false);
    await browseImage(h, false);
    h.controller.beginImage(fullView(IMAGES[0]), h.clock.now);
    h.controller.drawMark(0, 0, 10, 10);
    h.controller.drawMark(20, 20, 40, 40);
    expect(h.controller.pendingMarks).toHaveLength(2);
    expect(h.controller.undoMark()).toBe(true);
    await h.controller.next(h.clock.now);
    expect(h.marks.get("imgA")).toEqual([{ x0: 0, y0: 0, x1: 10, y1: 10 }]);
  });

  it("submits nothing when no rectangles were drawn", async () => {
    const h = harness();
    await browseImage(h, false);
    await browseImage(h, false);
    h.controller.beginImage(fullView(IMAGES[0]), h.clock.now);
    await h.controller.next(h.clock.now);
    expect(h.marks.has("imgA")).toBe(false);
  });

  it("marking-phase navigation is not recorded as events", async () => {
    const h = harness();
    await browseImage(h, false);
    await browseImage(h, false);
    const before = h.streams.get("imgA")!.length;
    h.controller.beginImage(fullView(IMAGES[0]), h.clock.now);
    h.controller.viewportChanged(fullView(IMAGES[0], 2), h.clock.now);
    h.clock.advance(500);
    expect(h.streams.get("imgA")!.length).toBe(before);
  });
});

describe("resume", () => {
  it("reload resumes at the interrupted image with a continuous clock", async () => {
    const storage = new MapStorage();
    const first = harness(storage);
    await browseImage(first, true);
    // interact with image 2, then abandon without Next
    const imgB = first.controller.currentImage!;
    first.controller.beginImage(fullView(imgB), first.clock.now);
    first.clock.advance(300);
    first.controller.viewportChanged(
      { ...fullView(imgB), offsetX: -25 },
      first.clock.now,
    );
    first.clock.advance(150);
    await new Promise((resolve) => setTimeout(resolve, 0)); // drain queued posts

    const second = harness(storage);
    expect(second.controller.phase).toBe("browse");
    expect(second.controller.currentImage?.imageId).toBe("imgB");
    await browseImage(second, true);
    for (const image of IMAGES) {
      second.controller.beginImage(fullView(image), second.clock.now);
      await second.controller.next(second.clock.now);
    }
    expect(second.controller.phase).toBe("done");

    const merged = [...first.streams.get("imgB")!, ...second.streams.get("imgB")!];
    expect(serverWouldReject(merged, imgB)).toBeNull(); // timestamps stay ordered
  });

  it("completed tests clear their saved progress", async () => {
    const storage = new MapStorage();
    const h = harness(storage);
    for (let i = 0; i < 4; i++) {
      h.controller.beginImage(fullView(h.controller.currentImage!), h.clock.now);
      h.clock.advance(10);
      await h.controller.next(h.clock.now);
    }
    expect(h.controller.phase).toBe("done");
    expect(storage.getItem("interest-miner:t1:u1")).toBeNull();
  });
});
