/** What-if outcome editor.
 *
 * The four gestures (add, remove, move, adjust duration) each post exactly
 * one edit to the active scenario; the server replies with the re-predicted
 * scenario, which is rendered as-is. Edited events are annotated in the
 * highlight color. Undo posts the inverse of the last edit, computed from
 * the pre-edit sequence kept on the client's scenario stack.
 */

import { clear, el } from "../dom.js";
import type { ApiClient } from "../api.js";
import type { EditOpPayload, ScenarioPayload, SequencePayload } from "../types.js";
import { renderTimeline } from "./timeline.js";
import { renderPredictionBox } from "./predictionBox.js";

export class OutcomeEditor {
  private history: ScenarioPayload[] = [];
  private selected: { stepIndex: number; code: string } | null = null;

  constructor(
    private api: ApiClient,
    private container: HTMLElement,
    private onUpdate?: (scenario: ScenarioPayload) => void,
  ) {}

  get scenario(): ScenarioPayload | null {
    return this.history[this.history.length - 1] ?? null;
  }

  open(scenario: ScenarioPayload): void {
    this.history = [scenario];
    this.selected = null;
    this.render();
  }

  /** Identify events introduced by edits, for the annotation color. */
  private editedKeys(scenario: ScenarioPayload): Set<string> {
    const keys = new Set<string>();
    for (const op of scenario.edits) {
      if (op.kind === "add") keys.add(`${op.timestamp}:${op.code}`);
      if (op.kind === "move") keys.add(`${op.to_timestamp}:${op.code}`);
    }
    return keys;
  }

  private async apply(op: EditOpPayload): Promise<void> {
    const current = this.scenario;
    if (!current) return;
    const { scenario } = await this.api.editScenario(current.scenario_id, op);
    this.history.push(scenario);
    this.selected = null;
    this.render();
    this.onUpdate?.(scenario);
  }

  async addEvent(code: string, timestamp: number): Promise<void> {
    await this.apply({ kind: "add", code, timestamp });
  }

  async removeEvent(stepIndex: number, code: string): Promise<void> {
    await this.apply({ kind: "remove", step_index: stepIndex, code });
  }

  async moveEvent(fromStep: number, code: string, toTimestamp: number): Promise<void> {
    await this.apply({ kind: "move", from_step: fromStep, code, to_timestamp: toTimestamp });
  }

  async adjustDuration(stepIndex: number, newGapDays: number): Promise<void> {
    await this.apply({ kind: "adjust_duration", step_index: stepIndex, new_gap_days: newGapDays });
  }

  /** Inverse of the last edit, derived from the sequence it was applied to. */
  inverseOfLast(): EditOpPayload | null {
    if (this.history.length < 2) return null;
    const current = this.history[this.history.length - 1];
    const before = this.history[this.history.length - 2].edited_sequence;
    const op = current.edits[current.edits.length - 1];
    switch (op.kind) {
      case "add": {
        const stepIndex = current.edited_sequence.steps.findIndex(
          (s) => s.timestamp === op.timestamp && s.codes.some((c) => c.code === op.code));
        return { kind: "remove", step_index: stepIndex, code: op.code };
      }
      case "remove": {
        const timestamp = before.steps[op.step_index].timestamp;
        return { kind: "add", code: op.code, timestamp };
      }
      case "move": {
        const fromStep = current.edited_sequence.steps.findIndex(
          (s) => s.timestamp === op.to_timestamp && s.codes.some((c) => c.code === op.code));
        const originalTime = before.steps[op.from_step].timestamp;
        return { kind: "move", from_step: fromStep, code: op.code, to_timestamp: originalTime };
      }
      case "adjust_duration": {
        const oldGap = before.steps[op.step_index].timestamp
          - before.steps[op.step_index - 1].timestamp;
        return { kind: "adjust_duration", step_index: op.step_index, new_gap_days: oldGap };
      }
    }
  }

  async undo(): Promise<void> {
    const inverse = this.inverseOfLast();
    const current = this.scenario;
    if (!inverse || !current) return;
    const { scenario } = await this.api.editScenario(current.scenario_id, inverse);
    this.history.pop();
    // the server-applied inverse must land back on the retained snapshot
    this.history[this.history.length - 1] = scenario;
    this.selected = null;
    this.render();
    this.onUpdate?.(scenario);
  }

  render(): void {
    const scenario = this.scenario;
    clear(this.container);
    this.container.classList.add("outcome-editor");
    if (!scenario) {
      this.container.append(el("p", { class: "editor-empty" }, ["No active scenario."]));
      return;
    }
    const sequencePane = el("div", { class: "editor-sequence" });
    renderTimeline(sequencePane, scenario.edited_sequence, {
      editedKeys: this.editedKeys(scenario),
      onCodeClick: (stepIndex, code) => {
        this.selected = { stepIndex, code };
        this.render();
      },
    });
    const predictionPane = el("div", { class: "editor-prediction" });
    renderPredictionBox(predictionPane, scenario.prediction);

    const controls = el("div", { class: "editor-controls" });
    const codeInput = el("input", { type: "text", class: "ctl-code", placeholder: "code" });
    const timeInput = el("input", { type: "number", class: "ctl-time", placeholder: "timestamp", step: "0.25" });
    const addButton = el("button", { class: "ctl-add" }, ["Add event"]);
    addButton.addEventListener("click", () => {
      void this.addEvent((codeInput as HTMLInputElement).value.trim(),
                         Number((timeInput as HTMLInputElement).value));
    });
    const removeButton = el("button", { class: "ctl-remove" }, ["Remove selected"]);
    removeButton.addEventListener("click", () => {
      if (this.selected) void this.removeEvent(this.selected.stepIndex, this.selected.code);
    });
    const moveTime = el("input", { type: "number", class: "ctl-move-time", placeholder: "new timestamp", step: "0.25" });
    const moveButton = el("button", { class: "ctl-move" }, ["Move selected"]);
    moveButton.addEventListener("click", () => {
      if (this.selected) {
        void this.moveEvent(this.selected.stepIndex, this.selected.code,
                            Number((moveTime as HTMLInputElement).value));
      }
    });
    const gapStep = el("input", { type: "number", class: "ctl-gap-step", placeholder: "step #", step: "1" });
    const gapValue = el("input", { type: "number", class: "ctl-gap-days", placeholder: "gap days", step: "0.25" });
    const gapButton = el("button", { class: "ctl-gap" }, ["Adjust duration"]);
    gapButton.addEventListener("click", () => {
      void this.adjustDuration(Number((gapStep as HTMLInputElement).value),
                               Number((gapValue as HTMLInputElement).value));
    });
    const undoButton = el("button", { class: "ctl-undo" }, ["Undo"]);
    undoButton.addEventListener("click", () => void this.undo());

    const selectedLabel = this.selected
      ? `selected: ${this.selected.code} @ step ${this.selected.stepIndex}`
      : "selected: none";
    controls.append(
      el("div", { class: "ctl-row" }, [codeInput, timeInput, addButton]),
      el("div", { class: "ctl-row" }, [el("span", { class: "ctl-selected" }, [selectedLabel]),
                                       removeButton, moveTime, moveButton]),
      el("div", { class: "ctl-row" }, [gapStep, gapValue, gapButton, undoButton]),
    );
    this.container.append(sequencePane, predictionPane, controls);
  }
}

/** Cross-scenario comparison strip with coordinated highlighting: the same
 * predicted code is marked in every scenario's box on hover. */
export function renderScenarioComparison(
  container: HTMLElement,
  scenarios: ScenarioPayload[],
): void {
  clear(container);
  container.classList.add("scenario-comparison");
  for (const scenario of scenarios) {
    const pane = el("div", { class: "comparison-pane", "data-scenario": scenario.scenario_id });
    pane.append(el("h4", {}, [scenario.label || scenario.scenario_id.slice(0, 8)]));
    const box = el("div");
    renderPredictionBox(box, scenario.prediction, {
      onTargetClick: (code) => {
        for (const node of Array.from(container.querySelectorAll(".target-node"))) {
          node.classList.toggle("link-highlight",
            node.getAttribute("data-code") === code);
        }
      },
    });
    pane.append(box);
    container.append(pane);
  }
}
