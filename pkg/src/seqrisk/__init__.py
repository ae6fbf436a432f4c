"""seqrisk: multi-disease risk prediction over coded medical event histories.

The engine predicts per-disease occurrence probabilities from a patient's
event sequence with a dual-attention recurrent model, attributes each
prediction to individual historical events, retrieves similar patients by
DTW alignment, and supports what-if editing of care plans with significance
analysis. A FastAPI service and a CLI expose the engine; an sklearn-style
estimator wrapper makes it pipeline-friendly.
"""

from .data import (
    EventSequence,
    EventVocabulary,
    MedicalEvent,
    Step,
    TrainingSample,
    VocabEntry,
    clean,
    encode,
    ingest,
    window,
)
from .estimator import SequenceRiskClassifier
from .model import PredictionResult, RetainModel, forward, influence, load, predict_sequence, save
from .synth import CausalRule, Prodrome, SyntheticCohortSpec, demo_cohort_spec, generate_synthetic
from .training import EvalReport, ModelConfig, TrainSchedule, baseline_single_target, evaluate, train

__version__ = "0.1.0"

__all__ = [
    "CausalRule",
    "EvalReport",
    "EventSequence",
    "EventVocabulary",
    "MedicalEvent",
    "ModelConfig",
    "PredictionResult",
    "Prodrome",
    "RetainModel",
    "SequenceRiskClassifier",
    "Step",
    "SyntheticCohortSpec",
    "TrainSchedule",
    "TrainingSample",
    "VocabEntry",
    "baseline_single_target",
    "clean",
    "demo_cohort_spec",
    "encode",
    "evaluate",
    "forward",
    "generate_synthetic",
    "influence",
    "ingest",
    "load",
    "predict_sequence",
    "save",
    "train",
    "window",
]
