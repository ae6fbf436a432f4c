/** Workbench wiring: one store, nine coordinated panels, all numbers from
 * the API. The scenario id survives reloads through the URL hash; nothing
 * else is persisted client-side.
 */

import { ApiClient } from "./api.js";
import { clear, el } from "./dom.js";
import { Store } from "./state.js";
import { renderDescription } from "./views/description.js";
import { renderAggregateView } from "./views/flow.js";
import { OutcomeEditor, renderScenarioComparison } from "./views/outcomeEditor.js";
import { renderPredictionBox } from "./views/predictionBox.js";
import { renderHistogram, renderPatientList, renderQueryForm } from "./views/similarity.js";
import { renderSignificanceMatrix } from "./views/significance.js";
import { renderTimeline } from "./views/timeline.js";
import type { KeyEventQuery } from "./types.js";

function panel(id: string, title: string): HTMLElement {
  const box = el("section", { id, class: "panel" });
  box.append(el("h2", {}, [title]));
  const body = el("div", { class: "panel-body" });
  box.append(body);
  return box;
}

export function bootWorkbench(root: HTMLElement, api: ApiClient): void {
  const store = new Store();

  const panels = {
    profile: panel("profile-view", "Patient"),
    prediction: panel("prediction-view", "History & prediction"),
    description: panel("description-view", "Disease description"),
    similarity: panel("similarity-view", "Patient similarity"),
    query: panel("query-view", "Key-event query"),
    patients: panel("patient-list-view", "Similar patients"),
    similar: panel("similar-view", "Individual & aggregated"),
    outcome: panel("outcome-view", "Outcome analysis"),
    significance: panel("significance-view", "Treatment significance"),
  };
  clear(root);
  for (const p of Object.values(panels)) root.append(p);
  const body = (p: HTMLElement) => p.querySelector(".panel-body") as HTMLElement;

  const editorHost = el("div", { class: "editor-host" });
  const comparisonHost = el("div", { class: "comparison-host" });
  body(panels.outcome).append(editorHost, comparisonHost);
  const editorView = new OutcomeEditor(api, editorHost, () => void refreshComparison());

  let keyEvents: KeyEventQuery[] | undefined;

  async function loadPatient(patientId: string): Promise<void> {
    store.set({ focalPatientId: patientId, selectedSimilar: [], brushRange: null });
    const ticket = store.nextRequest("patient");
    const [detail, prediction] = await Promise.all([
      api.getPatient(patientId),
      api.predict(patientId),
    ]);
    if (!store.isCurrent("patient", ticket)) return;
    const pane = body(panels.prediction);
    clear(pane);
    const timeline = el("div", { class: "focal-timeline" });
    renderTimeline(timeline, detail.patient, {
      highlightedCode: store.get().highlightedCode,
      onCodeClick: (_step, code) => void showDescription(code),
    });
    const box = el("div");
    renderPredictionBox(box, prediction, {
      onTargetClick: (code) => void showDescription(code),
      highlightedCode: store.get().highlightedCode,
    });
    pane.append(timeline, box);
    body(panels.profile).textContent =
      `${patientId} — ${detail.patient.steps.length} steps, labels: ${detail.labels.join(", ") || "none"}`;
    await refreshSimilar();
  }

  async function showDescription(code: string): Promise<void> {
    store.set({ highlightedCode: code });
    renderDescription(body(panels.description), await api.disease(code));
  }

  async function refreshSimilar(): Promise<void> {
    const { focalPatientId, brushRange } = store.get();
    if (!focalPatientId) return;
    const ticket = store.nextRequest("similar");
    const payload = await api.similar(focalPatientId, 20, brushRange ?? undefined, keyEvents);
    if (!store.isCurrent("similar", ticket)) return;
    renderHistogram(body(panels.similarity), payload.histogram, {
      onBrush: (range) => {
        store.set({ brushRange: range });
        void refreshSimilar();
      },
    });
    renderPatientList(body(panels.patients), payload, {
      selected: new Set(store.get().selectedSimilar),
      onToggle: (pid, selected) => {
        const current = new Set(store.get().selectedSimilar);
        if (selected) current.add(pid);
        else current.delete(pid);
        store.set({ selectedSimilar: [...current].sort() });
        void refreshAggregate();
      },
    });
  }

  async function refreshAggregate(): Promise<void> {
    const { focalPatientId, selectedSimilar } = store.get();
    const pane = body(panels.similar);
    if (!focalPatientId || selectedSimilar.length === 0) {
      clear(pane);
      pane.append(el("p", { class: "flow-empty" }, ["Select similar patients to aggregate."]));
      return;
    }
    const ticket = store.nextRequest("aggregate");
    const payload = await api.aggregate(focalPatientId, selectedSimilar, 3);
    if (!store.isCurrent("aggregate", ticket)) return;
    renderAggregateView(pane, payload);
  }

  async function openScenario(): Promise<void> {
    const { focalPatientId } = store.get();
    if (!focalPatientId) return;
    const { scenario } = await api.createScenario(focalPatientId);
    store.set({ activeScenarioId: scenario.scenario_id });
    window.location.hash = `scenario=${scenario.scenario_id}`;
    editorView.open(scenario);
    await refreshComparison();
  }

  async function refreshComparison(): Promise<void> {
    const { focalPatientId } = store.get();
    if (!focalPatientId) return;
    const listing = await api.listScenarios(focalPatientId);
    renderScenarioComparison(comparisonHost, listing.scenarios);
  }

  async function refreshSignificance(): Promise<void> {
    const { focalPatientId } = store.get();
    if (!focalPatientId) return;
    const payload = await api.significance(focalPatientId);
    renderSignificanceMatrix(body(panels.significance), payload);
  }

  renderQueryForm(body(panels.query), (events) => {
    keyEvents = events.length ? events : undefined;
    void refreshSimilar();
  });

  const scenarioButton = el("button", { class: "open-scenario" }, ["New scenario from focal patient"]);
  scenarioButton.addEventListener("click", () => void openScenario());
  const significanceButton = el("button", { class: "load-significance" }, ["Compute significance"]);
  significanceButton.addEventListener("click", () => void refreshSignificance());
  body(panels.profile).append(el("div", {}, [scenarioButton, significanceButton]));

  void (async () => {
    const listing = await api.listPatients(1, 10);
    const selector = el("select", { class: "patient-selector" });
    for (const p of listing.patients) {
      selector.append(el("option", { value: p.patient_id }, [p.patient_id]));
    }
    selector.addEventListener("change", () =>
      void loadPatient((selector as HTMLSelectElement).value));
    body(panels.profile).prepend(selector);
    if (listing.patients.length) {
      await loadPatient(listing.patients[0].patient_id);
    }
  })();
}

declare global {
  interface Window {
    __seqriskBooted?: boolean;
  }
}

if (typeof document !== "undefined" && document.getElementById("workbench-root")) {
  window.__seqriskBooted = true;
  bootWorkbench(document.getElementById("workbench-root") as HTMLElement, new ApiClient(""));
}
