"""Counterfactual editing of patient histories and treatment significance.

A scenario is an edit log over a base sequence: replaying the log reproduces
the edited sequence and, because prediction is deterministic, the prediction
too. The base sequence is never mutated; every edit returns a new scenario
with a freshly computed prediction.
"""

from __future__ import annotations

import itertools
import logging
import uuid
from dataclasses import dataclass, replace
from typing import Mapping, Sequence, Union

import numpy as np

from .data import DataError, EventSequence, Step, TrainingSample
from .model import PredictionResult, RetainModel, predict_sequence, score_sequences
from .similarity import EventVectorTable
from .stats import mean_ci95, welch_t_test

logger = logging.getLogger(__name__)

SIGNIFICANCE_ALPHA = 0.05

MODE_PREDICTED = "predicted"
MODE_OBSERVED = "observed"


class EditError(ValueError):
    """An edit operation violated its precondition."""


@dataclass(frozen=True)
class AddEvent:
    code: str
    timestamp: float
    kind = "add"


@dataclass(frozen=True)
class RemoveEvent:
    step_index: int
    code: str
    kind = "remove"


@dataclass(frozen=True)
class MoveEvent:
    from_step: int
    code: str
    to_timestamp: float
    kind = "move"


@dataclass(frozen=True)
class AdjustDuration:
    """Set the gap before ``step_index`` to ``new_gap_days``; the step and
    everything after it shift rigidly so all other gaps are preserved."""

    step_index: int
    new_gap_days: float
    kind = "adjust_duration"


EditOp = Union[AddEvent, RemoveEvent, MoveEvent, AdjustDuration]


def edit_to_dict(op: EditOp) -> dict:
    if isinstance(op, AddEvent):
        return {"kind": "add", "code": op.code, "timestamp": op.timestamp}
    if isinstance(op, RemoveEvent):
        return {"kind": "remove", "step_index": op.step_index, "code": op.code}
    if isinstance(op, MoveEvent):
        return {"kind": "move", "from_step": op.from_step, "code": op.code,
                "to_timestamp": op.to_timestamp}
    if isinstance(op, AdjustDuration):
        return {"kind": "adjust_duration", "step_index": op.step_index,
                "new_gap_days": op.new_gap_days}
    raise EditError(f"unknown edit op {op!r}")


def edit_from_dict(payload: Mapping) -> EditOp:
    kind = payload.get("kind")
    try:
        if kind == "add":
            return AddEvent(str(payload["code"]), float(payload["timestamp"]))
        if kind == "remove":
            return RemoveEvent(int(payload["step_index"]), str(payload["code"]))
        if kind == "move":
            return MoveEvent(int(payload["from_step"]), str(payload["code"]),
                             float(payload["to_timestamp"]))
        if kind == "adjust_duration":
            return AdjustDuration(int(payload["step_index"]), float(payload["new_gap_days"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise EditError(f"malformed {kind!r} edit payload: {exc}") from exc
    raise EditError(f"unknown edit kind {kind!r}")


def _insert(seq: EventSequence, code: str, timestamp: float) -> EventSequence:
    if timestamp >= seq.prediction_time:
        raise EditError(
            f"cannot place an event at t={timestamp}: prediction time is {seq.prediction_time}")
    steps = list(seq.steps)
    for i, step in enumerate(steps):
        if step.timestamp == timestamp:
            # collision merges into the existing step
            steps[i] = Step(timestamp, step.codes | {code})
            return replace(seq, steps=tuple(steps))
    steps.append(Step(timestamp, frozenset({code})))
    steps.sort(key=lambda s: s.timestamp)
    return replace(seq, steps=tuple(steps))


def _remove(seq: EventSequence, step_index: int, code: str) -> EventSequence:
    if not (0 <= step_index < len(seq.steps)):
        raise EditError(f"step index {step_index} out of range (sequence has {len(seq.steps)} steps)")
    step = seq.steps[step_index]
    if code not in step.codes:
        raise EditError(f"code {code!r} is not present at step {step_index}")
    remaining = step.codes - {code}
    steps = list(seq.steps)
    if remaining:
        steps[step_index] = Step(step.timestamp, remaining)
    else:
        del steps[step_index]
    return replace(seq, steps=tuple(steps))


def apply_op(seq: EventSequence, op: EditOp) -> EventSequence:
    """Apply one edit, returning a new sequence; the input is untouched."""
    if isinstance(op, AddEvent):
        return _insert(seq, op.code, op.timestamp)
    if isinstance(op, RemoveEvent):
        return _remove(seq, op.step_index, op.code)
    if isinstance(op, MoveEvent):
        if not (0 <= op.from_step < len(seq.steps)):
            raise EditError(f"step index {op.from_step} out of range")
        if op.code not in seq.steps[op.from_step].codes:
            raise EditError(f"code {op.code!r} is not present at step {op.from_step}")
        return _insert(_remove(seq, op.from_step, op.code), op.code, op.to_timestamp)
    if isinstance(op, AdjustDuration):
        if op.step_index < 1 or op.step_index >= len(seq.steps):
            raise EditError(
                f"adjust_duration needs 1 <= step_index < {len(seq.steps)}, got {op.step_index}")
        if op.new_gap_days <= 0:
            raise EditError(f"gap must be positive, got {op.new_gap_days}")
        old_gap = seq.steps[op.step_index].timestamp - seq.steps[op.step_index - 1].timestamp
        delta = op.new_gap_days - old_gap
        steps = list(seq.steps)
        for i in range(op.step_index, len(steps)):
            shifted = steps[i].timestamp + delta
            if shifted >= seq.prediction_time:
                raise EditError(
                    f"gap change would push step {i} to t={shifted}, at or past the "
                    f"prediction time {seq.prediction_time}")
            steps[i] = Step(shifted, steps[i].codes)
        return replace(seq, steps=tuple(steps))
    raise EditError(f"unknown edit op {op!r}")


@dataclass(frozen=True, eq=False)
class Scenario:
    scenario_id: str
    base_patient_id: str
    edits: tuple[EditOp, ...]
    edited_sequence: EventSequence
    prediction: PredictionResult
    label: str = ""


class ScenarioEngine:
    """Creates scenarios and recomputes predictions synchronously per edit."""

    def __init__(self, model: RetainModel):
        self.model = model

    def create(self, base_sequence: EventSequence, scenario_id: str | None = None,
               label: str = "") -> Scenario:
        if not base_sequence.steps:
            raise EditError("cannot build a scenario over an empty history")
        return Scenario(
            scenario_id=scenario_id or uuid.uuid4().hex,
            base_patient_id=base_sequence.patient_id,
            edits=(),
            edited_sequence=base_sequence,
            prediction=predict_sequence(self.model, base_sequence),
            label=label,
        )

    def apply_edit(self, scenario: Scenario, op: EditOp) -> Scenario:
        edited = apply_op(scenario.edited_sequence, op)
        if not edited.steps:
            raise EditError("edit would leave the history empty")
        return replace(
            scenario,
            edits=scenario.edits + (op,),
            edited_sequence=edited,
            prediction=predict_sequence(self.model, edited),
        )

    def replay(self, base_sequence: EventSequence, edits: Sequence[EditOp],
               scenario_id: str | None = None, label: str = "") -> Scenario:
        scenario = self.create(base_sequence, scenario_id, label)
        for op in edits:
            scenario = self.apply_edit(scenario, op)
        return scenario


@dataclass(frozen=True)
class ComparisonRow:
    target: str
    probabilities: tuple[float, ...]
    deltas: tuple[float, ...]
    ranks: tuple[int, ...]


def compare_scenarios(scenarios: Sequence[Scenario]) -> list[ComparisonRow]:
    """Per-target probabilities, delta against the first scenario (the base),
    and the 1-based prediction-box rank within each scenario."""
    if not scenarios:
        raise EditError("compare_scenarios needs at least one scenario")
    targets = scenarios[0].prediction.target_codes
    for s in scenarios[1:]:
        if s.prediction.target_codes != targets:
            raise EditError("scenarios under comparison must share the target set")
    ranks_per_scenario = []
    for s in scenarios:
        ordered = s.prediction.ranked_targets()
        ranks_per_scenario.append({code: i + 1 for i, code in enumerate(ordered)})
    rows = []
    base = scenarios[0].prediction.probabilities
    for target in targets:
        probs = tuple(s.prediction.probabilities[target] for s in scenarios)
        rows.append(ComparisonRow(
            target=target,
            probabilities=probs,
            deltas=tuple(p - base[target] for p in probs),
            ranks=tuple(r[target] for r in ranks_per_scenario),
        ))
    return rows


@dataclass(frozen=True)
class GroupStats:
    n: int
    mean: float
    ci95: float


@dataclass(frozen=True)
class SignificanceCell:
    treatment_group: tuple[str, ...]
    target: str
    with_stats: GroupStats | None
    without_stats: GroupStats | None
    p_value: float | None
    significant: bool
    insufficient: bool


def significance_matrix(cohort: Sequence[TrainingSample], groups: Sequence[Sequence[str]],
                        targets: Sequence[str], model: RetainModel,
                        mode: str = MODE_PREDICTED) -> list[list[SignificanceCell]]:
    """Treatment-group x target grid of with/without comparisons.

    Patients split on whether any event of the group appears in their
    history. Values are the model's predicted probabilities (default) or the
    observed 0/1 outcome labels. Cells test with Welch's two-sided t-test at
    alpha=0.05; a side with fewer than two patients marks the cell
    insufficient.
    """
    if not cohort:
        raise DataError("significance_matrix needs a non-empty cohort")
    if mode not in (MODE_PREDICTED, MODE_OBSERVED):
        raise DataError(f"unknown significance mode {mode!r}")
    target_idx = []
    for t in targets:
        if t not in model.target_codes:
            raise DataError(f"target {t!r} is not predicted by the model")
        target_idx.append(model.target_codes.index(t))

    if mode == MODE_PREDICTED:
        values = score_sequences(model, [s.history for s in cohort])
    else:
        values = np.zeros((len(cohort), model.n_targets))
        for i, sample in enumerate(cohort):
            for j, code in enumerate(model.target_codes):
                values[i, j] = 1.0 if code in sample.labels else 0.0

    histories = [s.history.all_codes() for s in cohort]
    matrix = []
    for group in groups:
        group_codes = frozenset(group)
        with_idx = [i for i, codes in enumerate(histories) if codes & group_codes]
        without_idx = [i for i in range(len(cohort)) if i not in set(with_idx)]
        row = []
        for t, j in zip(targets, target_idx):
            with_vals = values[with_idx, j]
            without_vals = values[without_idx, j]
            if len(with_vals) < 2 or len(without_vals) < 2:
                row.append(SignificanceCell(
                    tuple(sorted(group_codes)), t,
                    _group_stats(with_vals), _group_stats(without_vals),
                    p_value=None, significant=False, insufficient=True,
                ))
                continue
            test = welch_t_test(with_vals, without_vals)
            row.append(SignificanceCell(
                tuple(sorted(group_codes)), t,
                _group_stats(with_vals), _group_stats(without_vals),
                p_value=test.p_value,
                significant=test.p_value < SIGNIFICANCE_ALPHA,
                insufficient=False,
            ))
        matrix.append(row)
    return matrix


def _group_stats(values: np.ndarray) -> GroupStats | None:
    if len(values) == 0:
        return None
    if len(values) == 1:
        return GroupStats(1, float(values[0]), float("nan"))
    mean, half = mean_ci95(values)
    return GroupStats(len(values), mean, half)


def cluster_treatments(codes: Sequence[str], vectors: EventVectorTable,
                       n_groups: int) -> list[tuple[str, ...]]:
    """Average-linkage agglomerative clustering of treatment codes.

    Distances are Euclidean between event vectors; merges break ties by the
    lexicographically smallest member code, so the outcome is deterministic.
    """
    codes = sorted(set(codes))
    if not codes:
        raise DataError("cluster_treatments needs at least one code")
    if not (1 <= n_groups <= len(codes)):
        raise DataError(f"n_groups must be in [1, {len(codes)}], got {n_groups}")
    clusters: list[list[str]] = [[c] for c in codes]
    while len(clusters) > n_groups:
        best = None
        for a, b in itertools.combinations(range(len(clusters)), 2):
            dist = float(np.mean([
                np.linalg.norm(vectors[x] - vectors[y])
                for x in clusters[a] for y in clusters[b]
            ]))
            key = (dist, clusters[a][0], clusters[b][0])
            if best is None or key < best[0]:
                best = (key, a, b)
        _, a, b = best
        merged = sorted(clusters[a] + clusters[b])
        clusters = [c for i, c in enumerate(clusters) if i not in (a, b)] + [merged]
        clusters.sort(key=lambda c: c[0])
    return [tuple(c) for c in clusters]
