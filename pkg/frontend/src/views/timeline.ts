/** Timeline of a patient's event sequence.
 *
 * Event nodes are spaced equally regardless of the actual gaps; the real
 * times sit above the nodes and the gap labels on the connecting bars.
 * Simultaneous events render as one compound node with one tile per code,
 * shaded by kind (treatments dark, diagnoses light).
 */

import { clear, el, formatDays } from "../dom.js";
import type { SequencePayload } from "../types.js";

export interface TimelineOptions {
  onCodeClick?: (stepIndex: number, code: string) => void;
  onGapClick?: (stepIndex: number, gapDays: number) => void;
  highlightedCode?: string | null;
  editedKeys?: Set<string>; // "timestamp:code" pairs introduced by edits
}

export function renderTimeline(
  container: HTMLElement,
  sequence: SequencePayload,
  options: TimelineOptions = {},
): void {
  clear(container);
  container.classList.add("timeline");
  const track = el("div", { class: "timeline-track" });
  sequence.steps.forEach((step, index) => {
    if (index > 0) {
      const gap = step.timestamp - sequence.steps[index - 1].timestamp;
      const bar = el("div", { class: "duration-bar", "data-gap": String(gap) }, [
        el("span", { class: "duration-label" }, [formatDays(gap)]),
      ]);
      bar.addEventListener("click", () => options.onGapClick?.(index, gap));
      track.append(bar);
    }
    const node = el("div", {
      class: step.codes.length > 1 ? "event-node compound" : "event-node",
      "data-step": String(index),
    });
    node.append(el("span", { class: "time-label" }, [formatDays(step.timestamp)]));
    const tiles = el("div", { class: "tiles" });
    for (const ref of step.codes) {
      const key = `${step.timestamp}:${ref.code}`;
      const classes = ["tile", ref.kind === "treatment" ? "kind-treatment" : "kind-diagnosis"];
      if (options.highlightedCode === ref.code) classes.push("highlight");
      if (options.editedKeys?.has(key)) classes.push("edited");
      const tile = el("div", {
        class: classes.join(" "),
        "data-code": ref.code,
        title: `${ref.display_name} (${ref.code}) at ${formatDays(step.timestamp)}`,
      }, [ref.code]);
      tile.addEventListener("mouseenter", () => tile.classList.add("hover"));
      tile.addEventListener("mouseleave", () => tile.classList.remove("hover"));
      tile.addEventListener("click", () => options.onCodeClick?.(index, ref.code));
      tiles.append(tile);
    }
    node.append(tiles);
    track.append(node);
  });
  container.append(track);
}
