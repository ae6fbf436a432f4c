/** Prediction box: one node per target, in the API's ranked order (most
 * likely leftmost). Color saturation encodes the cohort prevalence the API
 * reports; nothing is recomputed client-side.
 */

import { clear, el } from "../dom.js";
import type { PredictionPayload } from "../types.js";

export interface PredictionBoxOptions {
  onTargetClick?: (code: string) => void;
  highlightedCode?: string | null;
}

export function renderPredictionBox(
  container: HTMLElement,
  prediction: PredictionPayload,
  options: PredictionBoxOptions = {},
): void {
  clear(container);
  container.classList.add("prediction-box");
  for (const target of prediction.ranked) {
    const classes = ["target-node"];
    if (options.highlightedCode === target.code) classes.push("highlight");
    const node = el("div", {
      class: classes.join(" "),
      "data-code": target.code,
      "data-probability": String(target.probability),
      style: `background-color: rgba(70, 110, 180, ${target.prevalence.toFixed(4)})`,
      title: target.display_name,
    }, [
      el("span", { class: "target-code" }, [target.code]),
      el("span", { class: "target-probability" }, [target.probability.toFixed(4)]),
    ]);
    node.addEventListener("click", () => options.onTargetClick?.(target.code));
    container.append(node);
  }
}
