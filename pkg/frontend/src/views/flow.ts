/** Similar patients as (a) individual history/outcome sequences and (b) an
 * aggregated flow of stage-binned outcome events. Node height encodes the
 * patient count; connection glyph height encodes transition count and its
 * stroke width the mean duration. Clicking a node highlights the
 * progression paths through it.
 */

import { clear, el, formatDays, svgEl } from "../dom.js";
import type { AggregatePayload, FlowPayload, SplitPayload } from "../types.js";

export function renderIndividualSequences(container: HTMLElement, splits: SplitPayload[]): void {
  clear(container);
  container.classList.add("individual-sequences");
  for (const split of splits) {
    const row = el("div", { class: "sequence-row", "data-patient": split.patient_id });
    row.append(el("span", { class: "row-patient" }, [split.patient_id]));
    const history = el("span", { class: "row-history" });
    for (const step of split.history) {
      history.append(el("span", { class: "mini-step" }, [step.codes.join("+")]));
    }
    const outcome = el("span", { class: "row-outcome" });
    for (const step of split.outcome) {
      outcome.append(el("span", { class: "mini-step outcome" }, [step.codes.join("+")]));
    }
    row.append(history, el("span", { class: "split-divider" }, ["|"]), outcome);
    container.append(row);
  }
}

const STAGE_WIDTH = 150;
const NODE_UNIT = 14;

export function renderFlow(container: HTMLElement, flow: FlowPayload): void {
  clear(container);
  container.classList.add("flow-view");
  if (!flow.nodes.length) {
    container.append(el("p", { class: "flow-empty" }, ["No outcome events to aggregate."]));
    return;
  }
  const perStage = new Map<number, typeof flow.nodes[number][]>();
  for (const node of flow.nodes) {
    const bucket = perStage.get(node.stage) ?? [];
    bucket.push(node);
    perStage.set(node.stage, bucket);
  }
  const positions = new Map<string, { x: number; y: number; h: number }>();
  let maxY = 0;
  for (const stage of flow.stages) {
    let y = 10;
    for (const node of perStage.get(stage) ?? []) {
      const h = NODE_UNIT + node.patient_count * 4;
      positions.set(`${node.stage}:${node.code}`, { x: stage * STAGE_WIDTH + 10, y, h });
      y += h + 12;
    }
    maxY = Math.max(maxY, y);
  }
  const svg = svgEl("svg", {
    width: String(flow.stages.length * STAGE_WIDTH + 40),
    height: String(maxY + 10),
    class: "flow-svg",
  });

  for (const edge of flow.edges) {
    const from = positions.get(`${edge.source.stage}:${edge.source.code}`);
    const to = positions.get(`${edge.target.stage}:${edge.target.code}`);
    if (!from || !to) continue;
    const path = svgEl("path", {
      class: "flow-edge",
      d: `M ${from.x + 90} ${from.y + from.h / 2} C ${from.x + 120} ${from.y + from.h / 2}, ` +
        `${to.x - 30} ${to.y + to.h / 2}, ${to.x} ${to.y + to.h / 2}`,
      fill: "none",
      "stroke-width": String(Math.max(1, edge.mean_duration_days / 4)),
      "data-count": String(edge.patient_count),
      "data-duration": String(edge.mean_duration_days),
      "data-source": `${edge.source.stage}:${edge.source.code}`,
      "data-target": `${edge.target.stage}:${edge.target.code}`,
    });
    path.append(svgEl("title"));
    svg.append(path);
  }

  for (const node of flow.nodes) {
    const pos = positions.get(`${node.stage}:${node.code}`)!;
    const group = svgEl("g", {
      class: "flow-node",
      "data-node": `${node.stage}:${node.code}`,
      "data-count": String(node.patient_count),
    });
    group.append(svgEl("rect", {
      x: String(pos.x), y: String(pos.y), width: "24", height: String(pos.h),
      class: "flow-count-rect",
    }));
    const countText = svgEl("text", {
      x: String(pos.x + 12), y: String(pos.y + pos.h / 2 + 4),
      class: "flow-count", "text-anchor": "middle",
    });
    countText.textContent = String(node.patient_count);
    group.append(countText);
    group.append(svgEl("rect", {
      x: String(pos.x + 24), y: String(pos.y), width: "66", height: String(pos.h),
      class: "flow-name-rect",
    }));
    const nameText = svgEl("text", {
      x: String(pos.x + 57), y: String(pos.y + pos.h / 2 + 4),
      class: "flow-name", "text-anchor": "middle",
    });
    nameText.textContent = node.code;
    group.append(nameText);
    group.addEventListener("click", () => highlightPaths(svg, `${node.stage}:${node.code}`));
    svg.append(group);
  }
  container.append(svg as unknown as HTMLElement);
}

/** Click-to-highlight: mark the node and every edge chain through it. */
export function highlightPaths(svg: SVGElement, nodeKey: string): void {
  for (const element of Array.from(svg.querySelectorAll(".highlight"))) {
    element.classList.remove("highlight");
  }
  const reachable = new Set([nodeKey]);
  let grew = true;
  while (grew) {
    grew = false;
    for (const edge of Array.from(svg.querySelectorAll(".flow-edge"))) {
      const source = edge.getAttribute("data-source")!;
      const target = edge.getAttribute("data-target")!;
      if ((reachable.has(source) || reachable.has(target)) && !edge.classList.contains("highlight")) {
        edge.classList.add("highlight");
        if (!reachable.has(source)) { reachable.add(source); grew = true; }
        if (!reachable.has(target)) { reachable.add(target); grew = true; }
      }
    }
  }
  for (const key of reachable) {
    svg.querySelector(`[data-node="${key}"]`)?.classList.add("highlight");
  }
}

export function renderAggregateView(container: HTMLElement, payload: AggregatePayload): void {
  clear(container);
  const individual = el("div", { class: "panel-individual" });
  const aggregated = el("div", { class: "panel-aggregated" });
  renderIndividualSequences(individual, payload.splits);
  renderFlow(aggregated, payload.flow);
  container.append(individual, aggregated);
}
