"""Synthetic patient cohorts with planted causal structure.

Each causal rule plants a trigger event (and optionally a protective
treatment) into patient histories and draws the target diagnosis label with
probability p_with_trigger when the trigger is present and the protective
event absent, p_base without the trigger, and the midpoint of the excess
risk when both are present. Prodrome entries additionally plant an early
symptom event whose rate depends on whether the target label fired, which
gives learners a graded signal while leaving every rule's conditional
probabilities untouched.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Mapping, Sequence

import numpy as np

from .data import (
    KIND_DIAGNOSIS,
    KIND_TREATMENT,
    DataError,
    EventSequence,
    EventVocabulary,
    Step,
    TrainingSample,
    VocabEntry,
    count_occurrences,
)


def diagnosis_code(i: int) -> str:
    return f"D{i:02d}"


def treatment_code(i: int) -> str:
    return f"T{i:02d}"


@dataclass(frozen=True)
class CausalRule:
    trigger_code: str
    protective_code: str | None
    target_code: str
    p_with_trigger: float
    p_base: float


@dataclass(frozen=True)
class Prodrome:
    """Early-symptom signal: plant ``symptom_code`` into the history at
    ``p_given_label`` when ``disease_code`` ends up in the labels, else at
    ``p_given_no_label``."""

    disease_code: str
    symptom_code: str
    p_given_label: float
    p_given_no_label: float


@dataclass(frozen=True)
class SyntheticCohortSpec:
    n_patients: int
    n_diagnoses: int
    n_treatments: int
    rules: tuple[CausalRule, ...] = ()
    rng_seed: int = 0
    prodromes: tuple[Prodrome, ...] = ()
    background_label_rate: float = 0.05
    trigger_rate: float = 0.5
    protective_rate: float = 0.5
    min_steps: int = 3
    max_steps: int = 8
    max_codes_per_step: int = 3
    window_days: float = 183.0

    @property
    def vocab_sizes(self) -> tuple[int, int]:
        return (self.n_diagnoses, self.n_treatments)

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(payload: Mapping) -> "SyntheticCohortSpec":
        rules = tuple(CausalRule(**dict(r)) for r in payload.get("rules", ()))
        prodromes = tuple(Prodrome(**dict(p)) for p in payload.get("prodromes", ()))
        rest = {k: v for k, v in payload.items() if k not in ("rules", "prodromes")}
        return SyntheticCohortSpec(rules=rules, prodromes=prodromes, **rest)


def _build_vocabulary(spec: SyntheticCohortSpec) -> EventVocabulary:
    entries = [
        VocabEntry(diagnosis_code(i), KIND_DIAGNOSIS, f"Synthetic diagnosis {i:02d}")
        for i in range(spec.n_diagnoses)
    ]
    entries += [
        VocabEntry(treatment_code(i), KIND_TREATMENT, f"Synthetic treatment {i:02d}")
        for i in range(spec.n_treatments)
    ]
    return EventVocabulary(tuple(entries))


def _validate(spec: SyntheticCohortSpec, vocabulary: EventVocabulary):
    if spec.n_patients < 0:
        raise DataError("n_patients must be non-negative")
    if spec.n_diagnoses < 1 or spec.n_treatments < 0:
        raise DataError("vocab sizes must allow at least one diagnosis")
    if not (1 <= spec.min_steps <= spec.max_steps):
        raise DataError("need 1 <= min_steps <= max_steps")
    if spec.max_codes_per_step < 1 or spec.window_days <= 0:
        raise DataError("max_codes_per_step and window_days must be positive")
    for p in (spec.background_label_rate, spec.trigger_rate, spec.protective_rate):
        if not (0.0 <= p <= 1.0):
            raise DataError(f"probability {p} outside [0, 1]")
    for rule in spec.rules:
        for p in (rule.p_with_trigger, rule.p_base):
            if not (0.0 <= p <= 1.0):
                raise DataError(f"rule probability {p} outside [0, 1]")
        for code in (rule.trigger_code, rule.protective_code, rule.target_code):
            if code is not None and code not in vocabulary:
                raise DataError(f"rule references code {code!r} outside the generated vocabulary")
        if vocabulary.kind_of(rule.target_code) != KIND_DIAGNOSIS:
            raise DataError(f"rule target {rule.target_code!r} must be a diagnosis")
    for pro in spec.prodromes:
        for p in (pro.p_given_label, pro.p_given_no_label):
            if not (0.0 <= p <= 1.0):
                raise DataError(f"prodrome probability {p} outside [0, 1]")
        for code in (pro.disease_code, pro.symptom_code):
            if code not in vocabulary:
                raise DataError(f"prodrome references code {code!r} outside the generated vocabulary")


def generate_synthetic(spec: SyntheticCohortSpec) -> tuple[EventVocabulary, list[TrainingSample]]:
    """Deterministically generate a cohort realizing the planted rules.

    Triggers and protective events are planted independently of each other,
    so the with/without-protective populations share the same trigger rate
    (the protective effect is not confounded). Labels for a target governed
    by several rules combine by noisy-OR, which reduces to the stated
    conditional probabilities in the single-rule case.
    """
    vocabulary = _build_vocabulary(spec)
    _validate(spec, vocabulary)
    rng = np.random.default_rng(spec.rng_seed)

    special = set()
    for rule in spec.rules:
        special.add(rule.trigger_code)
        special.add(rule.target_code)
        if rule.protective_code:
            special.add(rule.protective_code)
    for pro in spec.prodromes:
        special.add(pro.symptom_code)

    background_pool = sorted(set(vocabulary.codes()) - special)
    rule_targets = {r.target_code for r in spec.rules}
    symptom_codes = {p.symptom_code for p in spec.prodromes}
    label_pool = sorted(set(vocabulary.diagnosis_codes()) - rule_targets - symptom_codes)
    if not background_pool:
        raise DataError("every code is referenced by a rule; nothing left for background events")

    # quarter-day tick grid keeps timestamps strictly increasing
    ticks = np.arange(1, int(spec.window_days * 4))

    samples: list[TrainingSample] = []
    for k in range(spec.n_patients):
        patient_id = f"P{k:05d}"
        n_steps = int(rng.integers(spec.min_steps, spec.max_steps + 1))
        times = np.sort(rng.choice(ticks, size=n_steps, replace=False)) * 0.25
        step_codes: list[set[str]] = []
        for _ in range(n_steps):
            n_codes = int(rng.integers(1, spec.max_codes_per_step + 1))
            step_codes.append(set(rng.choice(background_pool, size=n_codes, replace=False)))

        rule_state = []
        for rule in spec.rules:
            has_trigger = bool(rng.random() < spec.trigger_rate)
            if has_trigger:
                step_codes[int(rng.integers(n_steps))].add(rule.trigger_code)
            has_protective = False
            if rule.protective_code is not None:
                has_protective = bool(rng.random() < spec.protective_rate)
                if has_protective:
                    step_codes[int(rng.integers(n_steps))].add(rule.protective_code)
            rule_state.append((rule, has_trigger, has_protective))

        labels = set()
        by_target: dict[str, float] = {}
        for rule, has_trigger, has_protective in rule_state:
            if not has_trigger:
                p = rule.p_base
            elif has_protective:
                p = rule.p_base + (rule.p_with_trigger - rule.p_base) / 2.0
            else:
                p = rule.p_with_trigger
            miss = by_target.get(rule.target_code, 1.0)
            by_target[rule.target_code] = miss * (1.0 - p)
        for target, miss in by_target.items():
            if rng.random() < 1.0 - miss:
                labels.add(target)
        for code in label_pool:
            if rng.random() < spec.background_label_rate:
                labels.add(code)
        for pro in spec.prodromes:
            p = pro.p_given_label if pro.disease_code in labels else pro.p_given_no_label
            if rng.random() < p:
                step_codes[int(rng.integers(n_steps))].add(pro.symptom_code)

        steps = tuple(Step(float(t), frozenset(codes)) for t, codes in zip(times, step_codes))
        history = EventSequence(patient_id, steps, prediction_time=float(spec.window_days))
        samples.append(TrainingSample(history, frozenset(labels)))

    vocabulary = vocabulary.with_train_counts(count_occurrences(samples))
    return vocabulary, samples


def demo_cohort_spec(n_patients: int = 5000, seed: int = 7) -> SyntheticCohortSpec:
    """A planted-structure cohort suitable for end-to-end exercises.

    T00 raises the risk of D00 (0.9 against a 0.1 base rate) and T01 is
    protective against that excess risk; T02 raises D01. D05/D06 are
    prodromal symptoms of D00.
    """
    return SyntheticCohortSpec(
        n_patients=n_patients,
        n_diagnoses=8,
        n_treatments=8,
        rules=(
            CausalRule("T00", "T01", "D00", 0.9, 0.1),
            CausalRule("T02", None, "D01", 0.8, 0.2),
        ),
        prodromes=(
            Prodrome("D00", "D05", 0.85, 0.02),
            Prodrome("D00", "D06", 0.60, 0.08),
        ),
        background_label_rate=0.1,
        rng_seed=seed,
    )
