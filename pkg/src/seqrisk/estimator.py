"""Scikit-learn-style wrapper so the model composes with the ecosystem.

``X`` is a list of EventSequence histories and ``y`` a list of label
collections (diagnosis codes observed at each prediction point). The
vocabulary is configuration, not learned state: sequences must already be
coded against it.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .data import EventSequence, EventVocabulary, TrainingSample
from .model import HEAD_SIGMOID, score_sequences
from .training import ModelConfig, TrainSchedule, fit


class SequenceRiskClassifier(BaseEstimator):
    """Multi-label risk classifier over coded event sequences.

    Parameters mirror the training configuration; ``get_params`` /
    ``set_params`` come from BaseEstimator so grid search and cloning work.
    """

    def __init__(self, vocabulary: EventVocabulary | None = None,
                 targets: Sequence[str] | None = None,
                 embed_dim: int = 64, hidden_dim: int = 64,
                 reverse_time: bool = True, head: str = HEAD_SIGMOID,
                 epochs: int = 30, batch_size: int = 64,
                 learning_rate: float = 0.01, seed: int = 0):
        self.vocabulary = vocabulary
        self.targets = targets
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        self.reverse_time = reverse_time
        self.head = head
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.seed = seed

    def fit(self, X: Sequence[EventSequence], y: Sequence[Iterable[str]]):
        if self.vocabulary is None:
            raise ValueError("SequenceRiskClassifier needs a vocabulary")
        if len(X) != len(y):
            raise ValueError(f"X has {len(X)} sequences but y has {len(y)} label sets")
        samples = [TrainingSample(seq, frozenset(labels)) for seq, labels in zip(X, y)]
        targets = self.targets
        if targets is None:
            diagnoses = set(self.vocabulary.diagnosis_codes())
            targets = sorted({code for labels in y for code in labels if code in diagnoses})
        if not targets:
            raise ValueError("no target codes: pass targets= or label the samples")
        config = ModelConfig(self.embed_dim, self.hidden_dim, self.reverse_time, self.head)
        schedule = TrainSchedule(self.epochs, self.batch_size, self.learning_rate, self.seed)
        self.model_, _ = fit(samples, self.vocabulary, targets, config, schedule)
        self.target_codes_ = self.model_.target_codes
        return self

    def predict_proba(self, X: Sequence[EventSequence]) -> np.ndarray:
        self._check_fitted()
        return score_sequences(self.model_, list(X))

    def predict(self, X: Sequence[EventSequence]) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(int)

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise ValueError("this SequenceRiskClassifier instance is not fitted yet")
