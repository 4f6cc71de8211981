import { describe, expect, it } from "vitest";

import { scriptedGestureRun } from "./corpus.js";
import { serverWouldReject } from "./util.js";

describe("scripted gesture fuzzing", () => {
  it("every emitted stream passes server-side validation (120 runs)", () => {
    for (let seed = 1; seed <= 120; seed++) {
      const { image, events } = scriptedGestureRun(seed);
      expect(serverWouldReject(events, image), `seed ${seed}`).toBeNull();
      expect(events[events.length - 1].kind).toBe("session_end");
    }
  });

  it("streams are deterministic for a given seed", () => {
    expect(scriptedGestureRun(7)).toEqual(scriptedGestureRun(7));
  });

  it("the corpus exercises both zoom and pan classification", () => {
    const kinds = new Set<string>();
    for (let seed = 1; seed <= 120; seed++) {
      for (const event of scriptedGestureRun(seed).events) kinds.add(event.kind);
    }
    expect(kinds).toEqual(new Set(["zoom", "pan", "session_end"]));
  });
});
