import numpy as np
import pytest

from seqrisk.data import (
    KIND_DIAGNOSIS,
    KIND_TREATMENT,
    EventSequence,
    EventVocabulary,
    Step,
    VocabEntry,
)


def make_vocab(n_diag=4, n_treat=4, counts=None):
    entries = [VocabEntry(f"D{i}", KIND_DIAGNOSIS, f"Diag {i}", (counts or {}).get(f"D{i}", 0))
               for i in range(n_diag)]
    entries += [VocabEntry(f"T{i}", KIND_TREATMENT, f"Treat {i}", (counts or {}).get(f"T{i}", 0))
                for i in range(n_treat)]
    return EventVocabulary(tuple(entries))


def make_sequence(patient_id, step_specs, prediction_time=None):
    """step_specs: [(timestamp, codes iterable), ...]"""
    steps = tuple(Step(float(t), frozenset(codes)) for t, codes in step_specs)
    if prediction_time is None:
        prediction_time = steps[-1].timestamp if steps else 0.0
    return EventSequence(patient_id, steps, float(prediction_time))


def random_sequence(rng, vocabulary, patient_id="P0", n_steps=None, prediction_time=100.0):
    n_steps = n_steps or int(rng.integers(1, 6))
    times = np.sort(rng.choice(np.arange(1, 200), size=n_steps, replace=False)) * 0.5
    codes = list(vocabulary.codes())
    steps = []
    for t in times:
        size = int(rng.integers(1, min(3, len(codes)) + 1))
        chosen = rng.choice(codes, size=size, replace=False)
        steps.append((float(t), set(chosen)))
    return make_sequence(patient_id, steps, prediction_time=prediction_time)


@pytest.fixture
def vocab():
    return make_vocab()
