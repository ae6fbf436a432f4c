/** Gesture contract: each of the four edit gestures posts exactly one
 * request with the correct EditOp payload, and undo restores the displayed
 * prediction box to the base values. */

import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { OutcomeEditor } from "../src/views/outcomeEditor.js";
import type { EditOpPayload, ScenarioPayload } from "../src/types.js";
import { mockFetch, predictionPayload, scenarioPayload, sequencePayload } from "./helpers.js";

let container: HTMLElement;

beforeEach(() => {
  document.body.innerHTML = "";
  container = document.createElement("div");
  document.body.append(container);
});

function editRoute(responses: ScenarioPayload[]) {
  let i = 0;
  return () => ({ scenario: responses[Math.min(i++, responses.length - 1)] });
}

function editorWith(responses: ScenarioPayload[]) {
  const { calls } = mockFetch({
    "POST /api/scenarios/scn-1/edits": editRoute(responses),
  });
  const editor = new OutcomeEditor(new ApiClient(""), container);
  editor.open(scenarioPayload());
  return { editor, calls };
}

function editCalls(calls: { method: string; path: string; body: unknown }[]) {
  return calls.filter((c) => c.path.includes("/edits"));
}

describe("edit gestures emit the correct EditOp payloads", () => {
  it("add gesture posts one add op", async () => {
    const { editor, calls } = editorWith([scenarioPayload()]);
    (container.querySelector(".ctl-code") as HTMLInputElement).value = "T03";
    (container.querySelector(".ctl-time") as HTMLInputElement).value = "2.25";
    (container.querySelector(".ctl-add") as HTMLButtonElement).click();
    await Promise.resolve();
    const posted = editCalls(calls);
    expect(posted).toHaveLength(1);
    expect(posted[0].body).toEqual({ kind: "add", code: "T03", timestamp: 2.25 });
  });

  it("remove gesture posts one remove op for the selected tile", async () => {
    const { editor, calls } = editorWith([scenarioPayload()]);
    (container.querySelector('[data-code="D05"]') as HTMLElement).click();
    (container.querySelector(".ctl-remove") as HTMLButtonElement).click();
    await Promise.resolve();
    const posted = editCalls(calls);
    expect(posted).toHaveLength(1);
    expect(posted[0].body).toEqual({ kind: "remove", step_index: 1, code: "D05" });
  });

  it("move gesture posts one move op", async () => {
    const { editor, calls } = editorWith([scenarioPayload()]);
    (container.querySelector('[data-code="T00"]') as HTMLElement).click();
    (container.querySelector(".ctl-move-time") as HTMLInputElement).value = "8.5";
    (container.querySelector(".ctl-move") as HTMLButtonElement).click();
    await Promise.resolve();
    const posted = editCalls(calls);
    expect(posted).toHaveLength(1);
    expect(posted[0].body).toEqual({
      kind: "move", from_step: 0, code: "T00", to_timestamp: 8.5,
    });
  });

  it("adjust-duration gesture posts one adjust_duration op", async () => {
    const { editor, calls } = editorWith([scenarioPayload()]);
    (container.querySelector(".ctl-gap-step") as HTMLInputElement).value = "1";
    (container.querySelector(".ctl-gap-days") as HTMLInputElement).value = "6.5";
    (container.querySelector(".ctl-gap") as HTMLButtonElement).click();
    await Promise.resolve();
    const posted = editCalls(calls);
    expect(posted).toHaveLength(1);
    expect(posted[0].body).toEqual({
      kind: "adjust_duration", step_index: 1, new_gap_days: 6.5,
    });
  });
});

describe("undo", () => {
  it("returns the displayed prediction box to the base values", async () => {
    const basePrediction = predictionPayload({ D00: 0.8123, D01: 0.3141 });
    const base = scenarioPayload(sequencePayload(), basePrediction);

    const editedSequence = sequencePayload();
    editedSequence.steps = [
      ...editedSequence.steps.slice(0, 1),
      { timestamp: 2.25, codes: [{ code: "T03", kind: "treatment", display_name: "Treat 3" }] },
      ...editedSequence.steps.slice(1),
    ];
    const edited = scenarioPayload(
      editedSequence,
      predictionPayload({ D00: 0.55, D01: 0.44 }),
      [{ kind: "add", code: "T03", timestamp: 2.25 }],
    );
    const reverted = scenarioPayload(sequencePayload(), basePrediction, [
      { kind: "add", code: "T03", timestamp: 2.25 },
      { kind: "remove", step_index: 1, code: "T03" },
    ]);

    const { calls } = mockFetch({
      "POST /api/scenarios/scn-1/edits": editRoute([edited, reverted]),
    });
    const editor = new OutcomeEditor(new ApiClient(""), container);
    editor.open(base);

    await editor.addEvent("T03", 2.25);
    const shownAfterEdit = [...container.querySelectorAll(".target-node")].map(
      (n) => n.getAttribute("data-probability"));
    expect(shownAfterEdit).toEqual(["0.55", "0.44"]);
    // the added event carries the edit annotation
    expect(container.querySelector(".tile.edited")).not.toBeNull();

    const inverse = editor.inverseOfLast();
    expect(inverse).toEqual({ kind: "remove", step_index: 1, code: "T03" });
    await editor.undo();

    const shownAfterUndo = [...container.querySelectorAll(".target-node")].map(
      (n) => n.getAttribute("data-probability"));
    expect(shownAfterUndo).toEqual(["0.8123", "0.3141"]);
    expect(editCalls(calls)).toHaveLength(2);
  });

  it("computes inverses for remove, move, and adjust-duration edits", () => {
    const base = scenarioPayload();
    const editor = new OutcomeEditor(new ApiClient(""), container);

    // remove -> add back at the original timestamp
    const afterRemove = scenarioPayload(
      { ...sequencePayload(), steps: sequencePayload().steps.filter((_, i) => i !== 0) },
      predictionPayload(),
      [{ kind: "remove", step_index: 0, code: "T00" }],
    );
    editor.open(base);
    (editor as unknown as { history: ScenarioPayload[] }).history.push(afterRemove);
    expect(editor.inverseOfLast()).toEqual({ kind: "add", code: "T00", timestamp: 1.5 });

    // adjust_duration -> restore the previous gap (4.0 - 1.5 = 2.5)
    const shifted = sequencePayload();
    shifted.steps = shifted.steps.map((s, i) =>
      i >= 1 ? { ...s, timestamp: s.timestamp + 4.0 } : s);
    const afterGap = scenarioPayload(shifted, predictionPayload(),
      [{ kind: "adjust_duration", step_index: 1, new_gap_days: 6.5 }]);
    editor.open(base);
    (editor as unknown as { history: ScenarioPayload[] }).history.push(afterGap);
    expect(editor.inverseOfLast()).toEqual(
      { kind: "adjust_duration", step_index: 1, new_gap_days: 2.5 });

    // move -> move back to the original timestamp
    const moved = sequencePayload();
    moved.steps = [
      moved.steps[1], { ...moved.steps[2] },
      { timestamp: 12.0, codes: [{ code: "T00", kind: "treatment", display_name: "Treat 0" }] },
    ].sort((a, b) => a.timestamp - b.timestamp);
    const afterMove = scenarioPayload(moved, predictionPayload(),
      [{ kind: "move", from_step: 0, code: "T00", to_timestamp: 12.0 }]);
    editor.open(base);
    (editor as unknown as { history: ScenarioPayload[] }).history.push(afterMove);
    const inverse = editor.inverseOfLast() as Extract<EditOpPayload, { kind: "move" }>;
    expect(inverse.kind).toBe("move");
    expect(inverse.code).toBe("T00");
    expect(inverse.to_timestamp).toBe(1.5);
  });
});
