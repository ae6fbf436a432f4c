"""Event vectorization, DTW alignment, similar-patient retrieval, flow graphs.

Sequences are compared step-by-step through the Euclidean distance between
the mean event vectors of each step's code set, aligned by classic dynamic
time warping. Retrieved patients can be split into a history section (the
part aligned to the focal patient's past) and an outcome section, which is
binned into stages and aggregated into a flow graph of (stage, event) nodes
with transition counts and mean durations.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .data import DataError, EventSequence, EventVocabulary, Step
from .model import RetainModel

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class EventVectorTable:
    """One vector per code; provenance records where the vectors came from."""

    vectors: dict[str, np.ndarray]
    provenance: str  # "reused_embedding" | "trained_standalone"

    def __getitem__(self, code: str) -> np.ndarray:
        try:
            return self.vectors[code]
        except KeyError:
            raise DataError(f"no event vector for code {code!r}") from None

    def __contains__(self, code: str) -> bool:
        return code in self.vectors


def event_vectors(model: RetainModel | None = None,
                  corpus: Sequence[EventSequence] | None = None,
                  mode: str = "reused", dim: int = 32, seed: int = 0,
                  epochs: int = 40, learning_rate: float = 0.05,
                  negatives: int = 5) -> EventVectorTable:
    """Per-code vectors, either reused from a trained model's embedding
    columns or trained standalone with skip-gram over step-adjacent events
    (window of +/-2 steps)."""
    if mode == "reused":
        if model is None:
            raise DataError("reused mode needs a trained model")
        vecs = {code: model.W_emb.values[:, j].copy()
                for j, code in enumerate(model.vocabulary.codes())}
        return EventVectorTable(vecs, "reused_embedding")
    if mode == "standalone":
        if not corpus:
            raise DataError("standalone mode needs a non-empty corpus")
        return _train_skipgram(corpus, dim, seed, epochs, learning_rate, negatives)
    raise DataError(f"unknown event-vector mode {mode!r}")


def _train_skipgram(corpus: Sequence[EventSequence], dim: int, seed: int,
                    epochs: int, lr: float, negatives: int) -> EventVectorTable:
    codes = sorted({code for seq in corpus for step in seq.steps for code in step.codes})
    if not codes:
        raise DataError("standalone mode needs a corpus with at least one event")
    index = {c: i for i, c in enumerate(codes)}
    pairs = []
    for seq in corpus:
        placed = [(i, code) for i, step in enumerate(seq.steps) for code in sorted(step.codes)]
        for a in range(len(placed)):
            for b in range(len(placed)):
                if a == b:
                    continue
                if abs(placed[a][0] - placed[b][0]) <= 2:
                    pairs.append((index[placed[a][1]], index[placed[b][1]]))
    if not pairs:
        raise DataError("standalone mode found no co-occurring events")

    rng = np.random.default_rng(seed)
    n = len(codes)
    w_in = rng.normal(0.0, 0.1, size=(n, dim))
    w_out = rng.normal(0.0, 0.1, size=(n, dim))
    pairs = np.array(pairs)
    for _ in range(epochs):
        rng.shuffle(pairs)
        for center, context in pairs:
            targets = [(context, 1.0)]
            targets += [(int(t), 0.0) for t in rng.integers(0, n, size=negatives)]
            v = w_in[center]
            grad_v = np.zeros(dim)
            for t, label in targets:
                u = w_out[t]
                p = 1.0 / (1.0 + np.exp(-float(v @ u)))
                g = p - label
                grad_v += g * u
                w_out[t] -= lr * g * v
            w_in[center] -= lr * grad_v
    return EventVectorTable({c: w_in[i].copy() for c, i in index.items()}, "trained_standalone")


def _step_vector(codes: Iterable[str], vectors: EventVectorTable) -> np.ndarray:
    """Mean of the member event vectors (permutation-invariant, bounded)."""
    stacked = [vectors[c] for c in sorted(codes)]
    if not stacked:
        raise DataError("cannot vectorize an empty step")
    return np.mean(stacked, axis=0)


def step_cost(step_a, step_b, vectors: EventVectorTable) -> float:
    """Euclidean distance between the two steps' mean event vectors."""
    codes_a = step_a.codes if isinstance(step_a, Step) else step_a
    codes_b = step_b.codes if isinstance(step_b, Step) else step_b
    if frozenset(codes_a) == frozenset(codes_b):
        return 0.0
    return float(np.linalg.norm(_step_vector(codes_a, vectors) - _step_vector(codes_b, vectors)))


@dataclass(frozen=True)
class AlignmentResult:
    distance: float
    path: tuple[tuple[int, int], ...]


def align(seq_a: EventSequence, seq_b: EventSequence, vectors: EventVectorTable,
          band: int | None = None) -> AlignmentResult:
    """Classic DTW: D(i,j) = cost(i,j) + min(D(i-1,j-1), D(i-1,j), D(i,j-1)).

    The path is recovered by backtracking with ties broken diagonal, then up
    (advance in seq_a), then left. ``band`` optionally restricts |i - j| to a
    Sakoe-Chiba band for long sequences.
    """
    na, nb = len(seq_a.steps), len(seq_b.steps)
    if na == 0 or nb == 0:
        raise DataError("align: both sequences must be non-empty")
    # step vectors hoisted out of the pair loop; the arithmetic per pair is
    # exactly step_cost's
    va = [_step_vector(s.codes, vectors) for s in seq_a.steps]
    vb = [_step_vector(s.codes, vectors) for s in seq_b.steps]
    cost = np.empty((na, nb))
    for i in range(na):
        for j in range(nb):
            if band is not None and abs(i - j) > band:
                cost[i, j] = np.inf
            elif seq_a.steps[i].codes == seq_b.steps[j].codes:
                cost[i, j] = 0.0
            else:
                cost[i, j] = float(np.linalg.norm(va[i] - vb[j]))

    acc = np.full((na + 1, nb + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, na + 1):
        for j in range(1, nb + 1):
            best = min(acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1])
            acc[i, j] = cost[i - 1, j - 1] + best

    path = [(na - 1, nb - 1)]
    i, j = na, nb
    while (i, j) != (1, 1):
        candidates = ((acc[i - 1, j - 1], (i - 1, j - 1)),
                      (acc[i - 1, j], (i - 1, j)),
                      (acc[i, j - 1], (i, j - 1)))
        best = min(c[0] for c in candidates)
        for value, (pi, pj) in candidates:
            if value == best:
                i, j = pi, pj
                break
        path.append((i - 1, j - 1))
    path.reverse()
    return AlignmentResult(float(acc[na, nb]), tuple(path))


@dataclass(frozen=True, eq=False)
class DistanceHistogram:
    bin_edges: np.ndarray
    counts: np.ndarray

    def to_dict(self) -> dict:
        return {"bin_edges": self.bin_edges.tolist(), "counts": self.counts.tolist()}


def similar_patients(focal: EventSequence, cohort: Sequence[EventSequence],
                     vectors: EventVectorTable, k: int, n_bins: int = 20
                     ) -> tuple[list[tuple[EventSequence, float]], DistanceHistogram]:
    """Every cohort sequence scored by DTW distance to the focal history.

    Returns the k nearest (ascending distance, ties by patient_id) plus an
    equal-width histogram over all distances for the brushing interaction.
    """
    if k < 1:
        raise DataError(f"k must be >= 1, got {k}")
    if not cohort:
        return [], DistanceHistogram(np.zeros(n_bins + 1), np.zeros(n_bins, dtype=int))
    scored = [(seq, align(seq, focal, vectors).distance) for seq in cohort]
    scored.sort(key=lambda pair: (pair[1], pair[0].patient_id))
    distances = np.array([dist for _, dist in scored])
    counts, edges = np.histogram(distances, bins=n_bins)
    return scored[:k], DistanceHistogram(edges, counts)


@dataclass(frozen=True)
class KeyEvent:
    """A required code; ``after_previous`` pins it strictly after the
    previous key event in the query list."""

    code: str
    after_previous: bool = False


def query_by_key_events(cohort: Sequence[EventSequence],
                        required: Sequence[KeyEvent | str],
                        vocabulary: EventVocabulary | None = None) -> list[EventSequence]:
    """Patients containing every required code, respecting order constraints.

    An empty query is the identity. A required code that appears in no
    patient (or is missing from the vocabulary, when one is provided) yields
    an empty result with a warning.
    """
    query = [KeyEvent(item) if isinstance(item, str) else item for item in required]
    if not query:
        return list(cohort)
    if vocabulary is not None:
        unknown = [q.code for q in query if q.code not in vocabulary]
        if unknown:
            logger.warning("key-event query names unknown code(s) %s", unknown)
            return []

    def matches(seq: EventSequence) -> bool:
        cursor = -1
        for item in query:
            positions = [i for i, step in enumerate(seq.steps) if item.code in step.codes]
            if not positions:
                return False
            if item.after_previous:
                later = [i for i in positions if i > cursor]
                if not later:
                    return False
                cursor = later[0]
            else:
                cursor = max(cursor, positions[0])
        return True

    result = [seq for seq in cohort if matches(seq)]
    if not result:
        logger.warning("key-event query matched no patients")
    return result


@dataclass(frozen=True)
class SequenceSplit:
    """A similar patient's sequence cut at the step aligned with the focal
    patient's final (most recent) step."""

    patient_id: str
    split_index: int
    history: tuple[Step, ...]
    outcome: tuple[Step, ...]


@dataclass(frozen=True)
class FlowNode:
    stage: int
    code: str
    patient_count: int


@dataclass(frozen=True)
class FlowEdge:
    source: tuple[int, str]
    target: tuple[int, str]
    patient_count: int
    mean_duration_days: float


@dataclass(frozen=True)
class FlowGraph:
    stages: tuple[int, ...]
    nodes: tuple[FlowNode, ...]
    edges: tuple[FlowEdge, ...]

    def to_dict(self) -> dict:
        return {
            "stages": list(self.stages),
            "nodes": [{"stage": n.stage, "code": n.code, "patient_count": n.patient_count}
                      for n in self.nodes],
            "edges": [{
                "source": {"stage": e.source[0], "code": e.source[1]},
                "target": {"stage": e.target[0], "code": e.target[1]},
                "patient_count": e.patient_count,
                "mean_duration_days": e.mean_duration_days,
            } for e in self.edges],
        }


def split_and_aggregate(similar: Sequence[EventSequence], focal: EventSequence,
                        vectors: EventVectorTable, n_stages: int
                        ) -> tuple[list[SequenceSplit], FlowGraph]:
    """Split each similar sequence into history/outcome and build the flow.

    The split point is the first step of the similar sequence that the DTW
    path aligns with the focal sequence's final step. Outcome events form a
    chain (step order, codes sorted within a step) cut into ``n_stages``
    near-equal segments; each occupied segment contributes the patient's
    first event of that segment as their node for the stage, so every
    non-terminal node's count equals the sum of its outgoing edge counts.
    """
    if n_stages < 1:
        raise DataError(f"n_stages must be >= 1, got {n_stages}")
    splits = []
    for seq in similar:
        path = align(seq, focal, vectors).path
        j_last = len(focal.steps) - 1
        split_idx = min(i for i, j in path if j == j_last)
        splits.append(SequenceSplit(
            patient_id=seq.patient_id,
            split_index=split_idx,
            history=seq.steps[:split_idx + 1],
            outcome=seq.steps[split_idx + 1:],
        ))

    node_patients: dict[tuple[int, str], int] = {}
    edge_stats: dict[tuple[tuple[int, str], tuple[int, str]], list[float]] = {}
    for split in splits:
        chain = [(step.timestamp, code) for step in split.outcome for code in sorted(step.codes)]
        if not chain:
            continue
        segments = _segment(len(chain), n_stages)
        journey = []
        for stage, (start, end) in enumerate(segments):
            if start == end:
                continue
            t, code = chain[start]
            journey.append((stage, code, t))
        for stage, code, _ in journey:
            node_patients[(stage, code)] = node_patients.get((stage, code), 0) + 1
        for (s1, c1, t1), (s2, c2, t2) in zip(journey, journey[1:]):
            edge_stats.setdefault(((s1, c1), (s2, c2)), []).append(t2 - t1)

    nodes = tuple(FlowNode(stage, code, count)
                  for (stage, code), count in sorted(node_patients.items()))
    edges = tuple(FlowEdge(src, dst, len(durations), float(np.mean(durations)))
                  for (src, dst), durations in sorted(edge_stats.items()))
    return splits, FlowGraph(tuple(range(n_stages)), nodes, edges)


def _segment(n_items: int, n_stages: int) -> list[tuple[int, int]]:
    """Cut ``n_items`` chain positions into ``n_stages`` contiguous spans.

    With fewer items than stages the first ``n_items`` stages get one item
    each; otherwise spans differ in size by at most one (equal occupancy).
    """
    if n_items <= n_stages:
        return [(i, i + 1) if i < n_items else (n_items, n_items) for i in range(n_stages)]
    base, extra = divmod(n_items, n_stages)
    spans = []
    start = 0
    for i in range(n_stages):
        size = base + (1 if i < extra else 0)
        spans.append((start, start + size))
        start += size
    return spans
