/** Similarity views: brushable distance histogram, key-event query form,
 * and the similar-patient list feeding the aggregate selection.
 */

import { clear, el, svgEl } from "../dom.js";
import type { HistogramPayload, KeyEventQuery, SimilarPayload } from "../types.js";

export interface HistogramOptions {
  onBrush?: (range: [number, number]) => void;
  width?: number;
  height?: number;
}

export function renderHistogram(
  container: HTMLElement,
  histogram: HistogramPayload,
  options: HistogramOptions = {},
): void {
  clear(container);
  container.classList.add("similarity-histogram");
  const width = options.width ?? 320;
  const height = options.height ?? 90;
  const svg = svgEl("svg", {
    width: String(width),
    height: String(height),
    "data-min": String(histogram.bin_edges[0] ?? 0),
    "data-max": String(histogram.bin_edges[histogram.bin_edges.length - 1] ?? 0),
  });
  const maxCount = Math.max(1, ...histogram.counts);
  const barWidth = histogram.counts.length ? width / histogram.counts.length : width;
  histogram.counts.forEach((count, i) => {
    const barHeight = (count / maxCount) * (height - 12);
    const bar = svgEl("rect", {
      class: "hist-bar",
      x: String(i * barWidth),
      y: String(height - barHeight),
      width: String(Math.max(1, barWidth - 1)),
      height: String(barHeight),
      "data-count": String(count),
      "data-lo": String(histogram.bin_edges[i]),
      "data-hi": String(histogram.bin_edges[i + 1]),
    });
    svg.append(bar);
  });

  // drag across bars to brush a distance range
  let anchor: number | null = null;
  const edgeAt = (clientX: number): number => {
    const rect = (svg as unknown as HTMLElement).getBoundingClientRect();
    const frac = Math.min(1, Math.max(0, (clientX - rect.left) / (rect.width || width)));
    const lo = histogram.bin_edges[0] ?? 0;
    const hi = histogram.bin_edges[histogram.bin_edges.length - 1] ?? 0;
    return lo + frac * (hi - lo);
  };
  svg.addEventListener("mousedown", (event) => {
    anchor = edgeAt((event as MouseEvent).clientX);
  });
  svg.addEventListener("mouseup", (event) => {
    if (anchor === null) return;
    const end = edgeAt((event as MouseEvent).clientX);
    const range: [number, number] = [Math.min(anchor, end), Math.max(anchor, end)];
    anchor = null;
    options.onBrush?.(range);
  });
  container.append(svg as unknown as HTMLElement);
}

export function renderQueryForm(
  container: HTMLElement,
  onQuery: (events: KeyEventQuery[]) => void,
): void {
  clear(container);
  container.classList.add("query-form");
  const input = el("input", {
    type: "text",
    class: "query-codes",
    placeholder: "key events, e.g. T00,D05",
  });
  const ordered = el("input", { type: "checkbox", class: "query-ordered" });
  const button = el("button", { class: "query-run" }, ["Query"]);
  button.addEventListener("click", () => {
    const codes = input.value.split(",").map((c) => c.trim()).filter(Boolean);
    const events = codes.map((code, i) => ({
      code,
      after_previous: ordered.checked && i > 0,
    }));
    onQuery(events);
  });
  container.append(
    input,
    el("label", {}, [ordered, "in listed order"]),
    button,
  );
}

export interface PatientListOptions {
  onToggle?: (patientId: string, selected: boolean) => void;
  selected?: Set<string>;
}

export function renderPatientList(
  container: HTMLElement,
  payload: SimilarPayload,
  options: PatientListOptions = {},
): void {
  clear(container);
  container.classList.add("patient-list");
  const table = el("table", {}, [
    el("thead", {}, [el("tr", {}, [
      el("th", {}, [""]),
      el("th", {}, ["patient"]),
      el("th", {}, ["distance"]),
      el("th", {}, ["events"]),
    ])]),
  ]);
  const body = el("tbody");
  for (const patient of payload.patients) {
    const checkbox = el("input", {
      type: "checkbox",
      class: "select-patient",
      "data-patient": patient.patient_id,
    });
    if (options.selected?.has(patient.patient_id)) {
      (checkbox as HTMLInputElement).checked = true;
    }
    checkbox.addEventListener("change", () =>
      options.onToggle?.(patient.patient_id, (checkbox as HTMLInputElement).checked));
    body.append(el("tr", { class: "patient-row", "data-patient": patient.patient_id }, [
      el("td", {}, [checkbox]),
      el("td", { class: "cell-patient" }, [patient.patient_id]),
      el("td", { class: "cell-distance" }, [patient.distance.toFixed(4)]),
      el("td", { class: "cell-events" }, [String(patient.event_count)]),
    ]));
  }
  table.append(body);
  container.append(table);
}
