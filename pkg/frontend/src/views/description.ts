/** Disease description panel: the six reference sections, verbatim. */

import { clear, el } from "../dom.js";
import type { DiseasePayload } from "../types.js";

const SECTION_ORDER = ["description", "symptoms", "causes", "diagnosis", "treatments", "prognosis"];

export function renderDescription(container: HTMLElement, payload: DiseasePayload): void {
  clear(container);
  container.classList.add("description-panel");
  const disease = payload.disease;
  container.append(el("h3", {}, [`${disease.name} (${disease.code})`]));
  if (!disease.found) {
    container.append(el("p", { class: "not-found" }, ["No reference entry for this code."]));
    return;
  }
  for (const key of SECTION_ORDER) {
    container.append(el("h4", {}, [key]));
    container.append(el("p", { class: `section-${key}` }, [disease.sections[key] ?? ""]));
  }
}
