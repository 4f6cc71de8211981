export { ApiClient, ApiError } from "./client.js";
export type { ApiClientOptions, FetchLike } from "./client.js";
export { ViewportTracker } from "./tracker.js";
export type { TrackerOptions } from "./tracker.js";
export { MarkPad } from "./marks.js";
export {
  BROWSE_INSTRUCTION,
  MARK_INSTRUCTION,
  TestController,
} from "./controller.js";
export type { StorageLike, TestControllerOptions, TestPhase } from "./controller.js";
export { bindViewer, fitView } from "./dom.js";
export { clampRect, visibleRect } from "./types.js";
export type { EventEnvelope, EventKind, ImageInfo, Rect, ScreenView } from "./types.js";
