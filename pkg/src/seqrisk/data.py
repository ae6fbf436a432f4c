"""Event-sequence data model: vocabularies, patient histories, training windows.

Timestamps are real-valued days relative to a per-dataset epoch. Events that
share a timestamp collapse into one step (one multi-hot input vector). The
training window convention is closed on the left edge and open at the
admission itself, so the admission's diagnoses are labels, never inputs.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator, Mapping, Sequence

import numpy as np

logger = logging.getLogger(__name__)

KIND_DIAGNOSIS = "diagnosis"
KIND_TREATMENT = "treatment"
EVENT_KINDS = (KIND_DIAGNOSIS, KIND_TREATMENT)

DAYS_PER_YEAR = 365.0
DEFAULT_WINDOW_DAYS = 183.0  # "six months"

RAW_EVENT_FIELDS = ("patient_id", "code", "kind", "timestamp")


class DataError(ValueError):
    """Raised when inputs violate the data contracts."""


@dataclass(frozen=True)
class VocabEntry:
    code: str
    kind: str
    display_name: str
    train_count: int = 0


@dataclass(frozen=True)
class EventVocabulary:
    """The universe of event codes; entry order defines the dense index."""

    entries: tuple[VocabEntry, ...]
    _index: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        index = {}
        for i, entry in enumerate(self.entries):
            if entry.kind not in EVENT_KINDS:
                raise DataError(f"unknown event kind {entry.kind!r} for code {entry.code!r}")
            if entry.code in index:
                raise DataError(f"duplicate vocabulary code {entry.code!r}")
            if entry.train_count < 0:
                raise DataError(f"negative train_count for code {entry.code!r}")
            index[entry.code] = i
        object.__setattr__(self, "_index", index)

    @property
    def size(self) -> int:
        return len(self.entries)

    def __contains__(self, code: str) -> bool:
        return code in self._index

    def index(self, code: str) -> int:
        try:
            return self._index[code]
        except KeyError:
            raise DataError(f"code {code!r} is not in the vocabulary") from None

    def entry(self, code: str) -> VocabEntry:
        return self.entries[self.index(code)]

    def codes(self) -> tuple[str, ...]:
        return tuple(e.code for e in self.entries)

    def kind_of(self, code: str) -> str:
        return self.entry(code).kind

    def diagnosis_codes(self) -> tuple[str, ...]:
        return tuple(e.code for e in self.entries if e.kind == KIND_DIAGNOSIS)

    def treatment_codes(self) -> tuple[str, ...]:
        return tuple(e.code for e in self.entries if e.kind == KIND_TREATMENT)

    def with_train_counts(self, counts: Mapping[str, int]) -> "EventVocabulary":
        return EventVocabulary(tuple(
            VocabEntry(e.code, e.kind, e.display_name, int(counts.get(e.code, 0)))
            for e in self.entries
        ))

    def checksum(self) -> str:
        """Identity hash over (code, kind, display_name) in index order.

        Counts are excluded: they vary with the training split while the
        code table, which fixes the dense indexing, does not.
        """
        payload = json.dumps(
            [[e.code, e.kind, e.display_name] for e in self.entries],
            separators=(",", ":"),
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class MedicalEvent:
    code: str
    timestamp: float


@dataclass(frozen=True)
class Step:
    """All events sharing one timestamp; rendered as one compound node."""

    timestamp: float
    codes: frozenset[str]


@dataclass(frozen=True)
class EventSequence:
    patient_id: str
    steps: tuple[Step, ...]
    prediction_time: float

    def __post_init__(self):
        if not math.isfinite(self.prediction_time):
            raise DataError(f"{self.patient_id}: non-finite prediction_time")
        previous = None
        for step in self.steps:
            if not math.isfinite(step.timestamp):
                raise DataError(f"{self.patient_id}: non-finite step timestamp")
            if not step.codes:
                raise DataError(f"{self.patient_id}: empty step at t={step.timestamp}")
            if previous is not None and step.timestamp <= previous:
                raise DataError(f"{self.patient_id}: step timestamps must strictly increase")
            if step.timestamp > self.prediction_time:
                raise DataError(f"{self.patient_id}: step at t={step.timestamp} is after prediction_time")
            previous = step.timestamp

    def __len__(self) -> int:
        return len(self.steps)

    def all_codes(self) -> frozenset[str]:
        out = set()
        for step in self.steps:
            out |= step.codes
        return frozenset(out)

    def event_count(self) -> int:
        return sum(len(step.codes) for step in self.steps)

    def span_days(self) -> float:
        if not self.steps:
            return 0.0
        return self.steps[-1].timestamp - self.steps[0].timestamp


@dataclass(frozen=True)
class TrainingSample:
    """One prediction point: the windowed history plus the admission labels."""

    history: EventSequence
    labels: frozenset[str]


# -- ingestion ----------------------------------------------------------------


def read_events_file(path) -> Iterator[dict]:
    """Yield raw event rows from a delimited text file with a header.

    Both tab- and comma-separated files are accepted; the header row must
    name exactly the fields patient_id, code, kind, timestamp. Each yielded
    dict carries its 1-based line number under ``_line``.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        first = fh.readline()
        if not first:
            raise DataError(f"{path}: empty events file")
        delimiter = "\t" if "\t" in first else ","
        header = [h.strip() for h in first.rstrip("\n").split(delimiter)]
        if sorted(header) != sorted(RAW_EVENT_FIELDS):
            raise DataError(f"{path}: header must name fields {RAW_EVENT_FIELDS}, got {header}")
        reader = csv.DictReader(fh, fieldnames=header, delimiter=delimiter)
        for line_no, row in enumerate(reader, start=2):
            row["_line"] = line_no
            yield row


def ingest(rows: Iterable, on_bad_row: Callable[[int, str], None] | None = None
           ) -> tuple[EventVocabulary, list[EventSequence]]:
    """Turn raw event rows into per-patient sequences plus their vocabulary.

    Rows may be mappings or (patient_id, code, kind, timestamp) tuples.
    Malformed rows are reported through ``on_bad_row(line, reason)`` (default:
    a log warning) and skipped; ingestion continues. Zero valid rows is a
    hard error. Steps group events with identical timestamps and are sorted
    ascending; each sequence's prediction_time is its last timestamp.
    """
    if on_bad_row is None:
        on_bad_row = lambda line, reason: logger.warning("skipping row %d: %s", line, reason)

    per_patient: dict[str, dict[float, set[str]]] = {}
    kinds: dict[str, str] = {}
    n_valid = 0
    for position, row in enumerate(rows, start=1):
        if isinstance(row, Mapping):
            line = int(row.get("_line", position))
            fields = {k: row.get(k) for k in RAW_EVENT_FIELDS}
        else:
            line = position
            if len(row) != 4:
                on_bad_row(line, f"expected 4 fields, got {len(row)}")
                continue
            fields = dict(zip(RAW_EVENT_FIELDS, row))
        patient_id = str(fields["patient_id"] or "").strip()
        code = str(fields["code"] or "").strip()
        kind = str(fields["kind"] or "").strip()
        if not patient_id or not code:
            on_bad_row(line, "missing patient_id or code")
            continue
        if kind not in EVENT_KINDS:
            on_bad_row(line, f"unknown kind {kind!r}")
            continue
        try:
            timestamp = float(fields["timestamp"])
        except (TypeError, ValueError):
            on_bad_row(line, f"unparseable timestamp {fields['timestamp']!r}")
            continue
        if not math.isfinite(timestamp):
            on_bad_row(line, "non-finite timestamp")
            continue
        if kinds.setdefault(code, kind) != kind:
            on_bad_row(line, f"kind conflict for code {code!r}")
            continue
        per_patient.setdefault(patient_id, {}).setdefault(timestamp, set()).add(code)
        n_valid += 1

    if n_valid == 0:
        raise DataError("no valid event rows ingested")

    sequences = []
    for patient_id in sorted(per_patient):
        by_time = per_patient[patient_id]
        steps = tuple(Step(t, frozenset(by_time[t])) for t in sorted(by_time))
        sequences.append(EventSequence(patient_id, steps, prediction_time=steps[-1].timestamp))

    counts: dict[str, int] = {}
    for seq in sequences:
        for step in seq.steps:
            for code in step.codes:
                counts[code] = counts.get(code, 0) + 1
    entries = tuple(
        VocabEntry(code, kinds[code], code, counts[code]) for code in sorted(counts)
    )
    return EventVocabulary(entries), sequences


def clean(sequences: Sequence[EventSequence], vocabulary: EventVocabulary,
          min_count: int) -> tuple[EventVocabulary, list[EventSequence]]:
    """Drop codes occurring fewer than ``min_count`` times across all steps.

    Steps left empty are deleted and sequences left empty are dropped; dense
    indices are recomputed. Idempotent for a fixed ``min_count``.
    """
    if min_count < 1:
        raise DataError(f"min_count must be >= 1, got {min_count}")
    counts: dict[str, int] = {code: 0 for code in vocabulary.codes()}
    for seq in sequences:
        for step in seq.steps:
            for code in step.codes:
                if code in counts:
                    counts[code] += 1
    keep = {code for code, n in counts.items() if n >= min_count}
    if not keep:
        raise DataError(f"cleaning with min_count={min_count} removed every code")

    new_vocab = EventVocabulary(tuple(
        VocabEntry(e.code, e.kind, e.display_name, counts[e.code])
        for e in vocabulary.entries if e.code in keep
    ))
    cleaned = []
    for seq in sequences:
        steps = []
        for step in seq.steps:
            codes = step.codes & keep
            if codes:
                steps.append(Step(step.timestamp, frozenset(codes)))
        if steps:
            cleaned.append(EventSequence(seq.patient_id, tuple(steps), seq.prediction_time))
    return new_vocab, cleaned


def window(sequences: Sequence[EventSequence], vocabulary: EventVocabulary,
           window_days: float, admission_codes: Iterable[str]) -> list[TrainingSample]:
    """Cut one training sample per (patient, admission event).

    The input is every step in [t_adm - window_days, t_adm); the labels are
    the diagnosis-kind codes recorded at the admission step itself. Patients
    may contribute several, possibly overlapping, samples. A vocabulary is
    required to tell diagnosis labels from treatments at the admission.
    """
    if window_days <= 0:
        raise DataError(f"window_days must be positive, got {window_days}")
    admission_codes = frozenset(admission_codes)
    samples = []
    for seq in sequences:
        for step in seq.steps:
            if not (step.codes & admission_codes):
                continue
            t_adm = step.timestamp
            input_steps = tuple(
                s for s in seq.steps
                if t_adm - window_days <= s.timestamp < t_adm
            )
            labels = frozenset(
                code for code in step.codes
                if code in vocabulary and vocabulary.kind_of(code) == KIND_DIAGNOSIS
            )
            samples.append(TrainingSample(
                EventSequence(seq.patient_id, input_steps, prediction_time=t_adm),
                labels,
            ))
    return samples


# -- encoding -----------------------------------------------------------------


def encode(sequence: EventSequence, vocabulary: EventVocabulary) -> tuple[np.ndarray, np.ndarray]:
    """Multi-hot input matrix (T, V) plus per-step duration scalars (T,).

    Durations are (prediction_time - timestamp) / 365 so they sit on the same
    order of magnitude as unit-scale embeddings.
    """
    T, V = len(sequence.steps), vocabulary.size
    x = np.zeros((T, V), dtype=np.float64)
    d = np.zeros(T, dtype=np.float64)
    for i, step in enumerate(sequence.steps):
        for code in step.codes:
            x[i, vocabulary.index(code)] = 1.0
        d[i] = (sequence.prediction_time - step.timestamp) / DAYS_PER_YEAR
    return x, d


def decode(x_row: np.ndarray, vocabulary: EventVocabulary) -> frozenset[str]:
    """Recover the code set of one multi-hot row (encode round-trip)."""
    if x_row.shape != (vocabulary.size,):
        raise DataError(f"decode: expected shape ({vocabulary.size},), got {x_row.shape}")
    codes = vocabulary.codes()
    return frozenset(codes[i] for i in np.flatnonzero(x_row))


def count_occurrences(samples: Iterable[TrainingSample]) -> dict[str, int]:
    """Occurrences of each code across samples' input steps and labels."""
    counts: dict[str, int] = {}
    for sample in samples:
        for step in sample.history.steps:
            for code in step.codes:
                counts[code] = counts.get(code, 0) + 1
        for code in sample.labels:
            counts[code] = counts.get(code, 0) + 1
    return counts


# -- file formats ---------------------------------------------------------------

# Cohort files hold one JSON record per training sample; the vocabulary lives
# in a sidecar file (same path + ".vocab"), one JSON record per code.


def vocabulary_path_for(cohort_path) -> Path:
    return Path(str(cohort_path) + ".vocab")


def write_vocabulary(path, vocabulary: EventVocabulary):
    with Path(path).open("w", encoding="utf-8") as fh:
        for e in vocabulary.entries:
            fh.write(json.dumps({
                "code": e.code, "kind": e.kind,
                "display_name": e.display_name, "train_count": e.train_count,
            }) + "\n")


def load_vocabulary(path) -> EventVocabulary:
    entries = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            entries.append(VocabEntry(rec["code"], rec["kind"],
                                      rec["display_name"], int(rec["train_count"])))
    return EventVocabulary(tuple(entries))


def sample_to_record(sample: TrainingSample) -> dict:
    return {
        "patient_id": sample.history.patient_id,
        "steps": [[s.timestamp, sorted(s.codes)] for s in sample.history.steps],
        "prediction_time": sample.history.prediction_time,
        "labels": sorted(sample.labels),
    }


def sample_from_record(rec: Mapping) -> TrainingSample:
    steps = tuple(Step(float(t), frozenset(codes)) for t, codes in rec["steps"])
    seq = EventSequence(rec["patient_id"], steps, float(rec["prediction_time"]))
    return TrainingSample(seq, frozenset(rec["labels"]))


def write_cohort(path, vocabulary: EventVocabulary, samples: Sequence[TrainingSample]):
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for sample in samples:
            fh.write(json.dumps(sample_to_record(sample)) + "\n")
    write_vocabulary(vocabulary_path_for(path), vocabulary)


def load_cohort(path) -> tuple[EventVocabulary, list[TrainingSample]]:
    path = Path(path)
    vocabulary = load_vocabulary(vocabulary_path_for(path))
    samples = []
    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                samples.append(sample_from_record(json.loads(line)))
    return vocabulary, samples
