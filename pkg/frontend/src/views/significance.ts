/** Significance matrix: treatment-group rows x disease columns. Each cell
 * plots the with-treatment and without-treatment mean occurrence
 * probabilities with their 95% intervals; significant cells are visually
 * distinguished (white background) and insufficient cells disabled.
 */

import { clear, el, svgEl } from "../dom.js";
import type { GroupStatsPayload, SignificanceCellPayload, SignificancePayload } from "../types.js";

const CELL_W = 84;
const CELL_H = 60;

function statsColumn(svg: SVGElement, x: number, stats: GroupStatsPayload | null, cls: string): void {
  if (!stats || stats.mean === null) return;
  const scaleY = (v: number) => CELL_H - 8 - v * (CELL_H - 16);
  const y = scaleY(stats.mean);
  const half = stats.ci95 ?? 0;
  const line = svgEl("line", {
    class: `ci-line ${cls}`,
    x1: String(x), x2: String(x),
    y1: String(scaleY(Math.min(1, stats.mean + half))),
    y2: String(scaleY(Math.max(0, stats.mean - half))),
  });
  const dot = svgEl("circle", {
    class: `mean-dot ${cls}`,
    cx: String(x), cy: String(y), r: "3",
    "data-mean": String(stats.mean),
    "data-ci95": String(stats.ci95),
    "data-n": String(stats.n),
  });
  svg.append(line, dot);
}

export function renderSignificanceCell(cell: SignificanceCellPayload): HTMLElement {
  const classes = ["significance-cell"];
  if (cell.insufficient) classes.push("insufficient");
  else if (cell.significant) classes.push("significant");
  const wrapper = el("div", {
    class: classes.join(" "),
    "data-target": cell.target,
    "data-group": cell.treatment_group.join("+"),
    "data-p": cell.p_value === null ? "" : String(cell.p_value),
  });
  if (cell.insufficient) {
    wrapper.append(el("span", { class: "cell-note" }, ["insufficient"]));
    return wrapper;
  }
  const svg = svgEl("svg", { width: String(CELL_W), height: String(CELL_H) });
  statsColumn(svg, CELL_W / 3, cell.with, "with");
  statsColumn(svg, (2 * CELL_W) / 3, cell.without, "without");
  wrapper.append(svg as unknown as HTMLElement);
  return wrapper;
}

export function renderSignificanceMatrix(
  container: HTMLElement,
  payload: SignificancePayload,
): void {
  clear(container);
  container.classList.add("significance-matrix");
  const table = el("table");
  const head = el("tr", {}, [el("th", {}, ["treatment group"])]);
  for (const target of payload.targets) {
    head.append(el("th", {}, [target]));
  }
  table.append(el("thead", {}, [head]));
  const body = el("tbody");
  payload.cells.forEach((row, i) => {
    const tr = el("tr", {}, [el("th", { class: "group-label" }, [payload.groups[i].join(", ")])]);
    for (const cell of row) {
      tr.append(el("td", {}, [renderSignificanceCell(cell)]));
    }
    body.append(tr);
  });
  table.append(body);
  container.append(table);
}
