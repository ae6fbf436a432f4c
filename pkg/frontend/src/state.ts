/** Shared view state: every coordinated view re-renders on any change.
 *
 * In-flight requests carry a per-view sequence number; a response older
 * than the latest request for that view is discarded.
 */

export interface ViewState {
  focalPatientId: string | null;
  selectedTargets: string[];
  brushRange: [number, number] | null;
  selectedSimilar: string[];
  activeScenarioId: string | null;
  highlightedCode: string | null;
}

export type Listener = (state: ViewState) => void;

export class Store {
  private state: ViewState = {
    focalPatientId: null,
    selectedTargets: [],
    brushRange: null,
    selectedSimilar: [],
    activeScenarioId: null,
    highlightedCode: null,
  };

  private listeners: Listener[] = [];
  private sequences: Map<string, number> = new Map();

  get(): ViewState {
    return { ...this.state };
  }

  set(patch: Partial<ViewState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) {
      listener(this.get());
    }
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  /** Next request ticket for a view; pair with isCurrent to drop stale responses. */
  nextRequest(view: string): number {
    const seq = (this.sequences.get(view) ?? 0) + 1;
    this.sequences.set(view, seq);
    return seq;
  }

  isCurrent(view: string, ticket: number): boolean {
    return this.sequences.get(view) === ticket;
  }
}
