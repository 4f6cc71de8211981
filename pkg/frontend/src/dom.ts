/**
 * Minimal DOM binding for the standalone test page: wheel zooms around the
 * cursor, dragging pans (browse phase) or draws a rectangle (mark phase).
 * Host pages with their own zoom widget skip this module and feed
 * TestController.viewportChanged from their controller hooks instead.
 */

import { TestController } from "./controller.js";
import type { ImageInfo, ScreenView } from "./types.js";

export interface ViewerBinding {
  /** current view transform */
  view: ScreenView;
  destroy(): void;
}

export function fitView(image: ImageInfo, container: HTMLElement): ScreenView {
  const viewWidth = container.clientWidth;
  const viewHeight = container.clientHeight;
  // deliberately small initial display so the user has to zoom in
  const scale = Math.min(viewWidth / image.width, viewHeight / image.height);
  return {
    scale,
    offsetX: (viewWidth - image.width * scale) / 2,
    offsetY: (viewHeight - image.height * scale) / 2,
    viewWidth,
    viewHeight,
  };
}

export function bindViewer(
  controller: TestController,
  container: HTMLElement,
  img: HTMLImageElement,
  minScale = 0.05,
  maxScale = 40,
): ViewerBinding {
  const image = controller.currentImage;
  if (!image) throw new Error("nothing to show");
  let view = fitView(image, container);
  let dragging = false;
  let markStart: { x: number; y: number } | null = null;

  const apply = () => {
    img.style.transform = `translate(${view.offsetX}px, ${view.offsetY}px) scale(${view.scale})`;
  };
  const report = () => controller.viewportChanged(view, performance.now());
  const toImage = (clientX: number, clientY: number) => {
    const box = container.getBoundingClientRect();
    return {
      x: (clientX - box.left - view.offsetX) / view.scale,
      y: (clientY - box.top - view.offsetY) / view.scale,
    };
  };

  const onWheel = (event: WheelEvent) => {
    event.preventDefault();
    const factor = event.deltaY < 0 ? 1.2 : 1 / 1.2;
    const next = Math.min(maxScale, Math.max(minScale, view.scale * factor));
    const box = container.getBoundingClientRect();
    const px = event.clientX - box.left;
    const py = event.clientY - box.top;
    view = {
      ...view,
      scale: next,
      offsetX: px - ((px - view.offsetX) / view.scale) * next,
      offsetY: py - ((py - view.offsetY) / view.scale) * next,
    };
    apply();
    report();
  };

  const onPointerDown = (event: PointerEvent) => {
    container.setPointerCapture(event.pointerId);
    if (controller.phase === "mark") {
      const p = toImage(event.clientX, event.clientY);
      markStart = p;
    } else {
      dragging = true;
    }
  };

  const onPointerMove = (event: PointerEvent) => {
    if (!dragging) return;
    view = {
      ...view,
      offsetX: view.offsetX + event.movementX,
      offsetY: view.offsetY + event.movementY,
    };
    apply();
    report();
  };

  const onPointerUp = (event: PointerEvent) => {
    if (markStart) {
      const p = toImage(event.clientX, event.clientY);
      controller.drawMark(markStart.x, markStart.y, p.x, p.y);
      markStart = null;
    }
    dragging = false;
  };

  container.addEventListener("wheel", onWheel, { passive: false });
  container.addEventListener("pointerdown", onPointerDown);
  container.addEventListener("pointermove", onPointerMove);
  container.addEventListener("pointerup", onPointerUp);
  apply();

  return {
    get view() {
      return view;
    },
    destroy() {
      container.removeEventListener("wheel", onWheel);
      container.removeEventListener("pointerdown", onPointerDown);
      container.removeEventListener("pointermove", onPointerMove);
      container.removeEventListener("pointerup", onPointerUp);
    },
  };
}
