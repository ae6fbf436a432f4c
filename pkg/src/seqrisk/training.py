"""Weighted multi-label loss, training protocol, and evaluation reports.

The loss is per-label binary cross-entropy in which only the positive term
is weighted by b_w[l] = 1 / ln(max(n_l, 2)), n_l being the occurrence count
of target l in the training samples, so rare targets weigh more. Each sample
carries exactly one prediction point (its admission), and the train/test
split is at patient granularity.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import autodiff as ad
from . import metrics
from .autodiff import NonFiniteError, Tensor
from .data import EventVocabulary, TrainingSample, count_occurrences, encode
from .model import HEAD_SIGMOID, ModelError, RetainModel, prepare_batch
from .optim import Adam, NonFiniteGradientError

logger = logging.getLogger(__name__)

PROB_EPS = 1e-12


class TrainingDivergedError(RuntimeError):
    """Loss or gradients went non-finite during training."""


@dataclass(frozen=True)
class ModelConfig:
    embed_dim: int = 64
    hidden_dim: int = 64
    reverse_time: bool = True
    head: str = HEAD_SIGMOID


@dataclass(frozen=True)
class TrainSchedule:
    epochs: int = 30
    batch_size: int = 64
    learning_rate: float = 0.01
    seed: int = 0


def loss_weights(samples: Sequence[TrainingSample], target_codes: Sequence[str]) -> np.ndarray:
    """b_w[l] = 1 / ln(max(n_l, 2)); the clamp keeps never-seen targets finite."""
    counts = count_occurrences(samples)
    return np.array([1.0 / np.log(max(counts.get(code, 0), 2)) for code in target_codes])


def loss(predictions: Tensor, labels: np.ndarray, b_w: np.ndarray) -> Tensor:
    """The weighted BCE loss, mean over the batch.

    ``predictions`` are probabilities (B, L); they are clamped into
    [1e-12, 1 - 1e-12] before the logs.
    """
    labels = np.asarray(labels, dtype=np.float64)
    if predictions.values.shape != labels.shape:
        raise ModelError(
            f"loss: prediction shape {predictions.values.shape} != labels shape {labels.shape}")
    if predictions.values.shape[1] != b_w.shape[0]:
        raise ModelError(f"loss: {predictions.values.shape[1]} targets but {b_w.shape[0]} weights")
    p = ad.clip(predictions, PROB_EPS, 1.0 - PROB_EPS)
    y = Tensor(labels, op="labels")
    weighted_pos = ad.mul(Tensor(labels * b_w, op="weights"), ad.log(p))
    neg = ad.mul(ad.sub(1.0, y), ad.log(ad.sub(1.0, p)))
    per_sample = ad.tsum(ad.add(weighted_pos, neg), axis=1)
    n = labels.shape[0]
    return ad.mul(ad.tsum(per_sample), -1.0 / n)


@dataclass(frozen=True, eq=False)
class EvalReport:
    """The five comparison metrics plus per-target breakdown."""

    nll: float
    auc: float | None
    precision: float
    recall_at: dict[int, float | None]
    per_target: dict[str, dict]
    n_samples: int
    bootstrap_std: dict[str, float | None] = field(default_factory=dict)

    def metric_rows(self) -> list[tuple[str, float | None, float | None]]:
        rows = [
            ("Neg Log Likelihood", self.nll, self.bootstrap_std.get("nll")),
            ("AUC", self.auc, self.bootstrap_std.get("auc")),
            ("Precision", self.precision, self.bootstrap_std.get("precision")),
        ]
        for k in sorted(self.recall_at):
            rows.append((f"Recall@{k}", self.recall_at[k], self.bootstrap_std.get(f"recall@{k}")))
        return rows

    def to_dict(self) -> dict:
        return {
            "nll": self.nll,
            "auc": self.auc,
            "precision": self.precision,
            "recall_at": {str(k): v for k, v in self.recall_at.items()},
            "per_target": self.per_target,
            "n_samples": self.n_samples,
            "bootstrap_std": self.bootstrap_std,
        }


def _label_matrix(samples: Sequence[TrainingSample], target_codes: Sequence[str]) -> np.ndarray:
    y = np.zeros((len(samples), len(target_codes)))
    index = {code: j for j, code in enumerate(target_codes)}
    for i, sample in enumerate(samples):
        for code in sample.labels:
            j = index.get(code)
            if j is not None:
                y[i, j] = 1.0
    return y


def _usable(samples: Sequence[TrainingSample]) -> list[TrainingSample]:
    usable = [s for s in samples if len(s.history.steps) > 0]
    skipped = len(samples) - len(usable)
    if skipped:
        logger.warning("skipping %d sample(s) with an empty input window", skipped)
    return usable


def evaluate(model: RetainModel, samples: Sequence[TrainingSample],
             ks: tuple[int, ...] = (2, 4), n_bootstrap: int = 100,
             bootstrap_seed: int = 0) -> EvalReport:
    """Score a test set and compute the five comparison metrics.

    AUC is rank-based per target and macro-averaged; targets with a single
    class in the test set are excluded with a warning. Precision is
    micro-averaged at threshold 0.5. Recall@k divides by min(|labels|, k).
    The +/- column is a bootstrap std over ``n_bootstrap`` resamples.
    """
    samples = _usable(samples)
    if not samples:
        raise ModelError("evaluate: empty test set")
    scores = _score_samples(model, samples)
    y = _label_matrix(samples, model.target_codes)

    per_target = {}
    for j, code in enumerate(model.target_codes):
        per_target[code] = {
            "auc": metrics.auc_binary(scores[:, j], y[:, j]),
            "positives": int(y[:, j].sum()),
        }
    recall = {k: metrics.recall_at_k(scores, y, k) for k in ks}
    std = {}
    if n_bootstrap > 0:
        std["nll"] = metrics.bootstrap_std(metrics.nll, scores, y, n_bootstrap, bootstrap_seed)
        std["auc"] = metrics.bootstrap_std(metrics.macro_auc, scores, y, n_bootstrap, bootstrap_seed)
        std["precision"] = metrics.bootstrap_std(metrics.precision_micro, scores, y,
                                                 n_bootstrap, bootstrap_seed)
        for k in ks:
            std[f"recall@{k}"] = metrics.bootstrap_std(
                lambda s, l, k=k: metrics.recall_at_k(s, l, k), scores, y,
                n_bootstrap, bootstrap_seed)
    return EvalReport(
        nll=metrics.nll(scores, y),
        auc=metrics.macro_auc(scores, y),
        precision=metrics.precision_micro(scores, y),
        recall_at=recall,
        per_target=per_target,
        n_samples=len(samples),
        bootstrap_std=std,
    )


def _score_samples(model: RetainModel, samples: Sequence[TrainingSample],
                   batch_size: int = 256) -> np.ndarray:
    out = np.zeros((len(samples), model.n_targets))
    for start in range(0, len(samples), batch_size):
        chunk = samples[start:start + batch_size]
        encoded = [encode(s.history, model.vocabulary) for s in chunk]
        x, d, mask, _ = prepare_batch(encoded, model.reverse_time)
        _, probs, _, _, _ = model.forward_graph(x, d, mask)
        out[start:start + len(chunk)] = probs.values
    return out


def split_by_patient(samples: Sequence[TrainingSample], split_ratio: float, seed: int
                     ) -> tuple[list[TrainingSample], list[TrainingSample]]:
    """Seeded patient-granularity split; no patient lands in both sets."""
    if not (0.0 < split_ratio < 1.0):
        raise ValueError(f"split_ratio must be in (0, 1), got {split_ratio}")
    patients = sorted({s.history.patient_id for s in samples})
    rng = np.random.default_rng(seed)
    rng.shuffle(patients)
    n_train = int(round(len(patients) * split_ratio))
    train_ids = set(patients[:n_train])
    train = [s for s in samples if s.history.patient_id in train_ids]
    test = [s for s in samples if s.history.patient_id not in train_ids]
    return train, test


@dataclass(frozen=True, eq=False)
class TrainResult:
    model: RetainModel
    epoch_reports: list[EvalReport]
    final_report: EvalReport | None
    train_patient_ids: frozenset[str]
    test_patient_ids: frozenset[str]


def fit(samples: Sequence[TrainingSample], vocabulary: EventVocabulary,
        target_codes: Sequence[str], config: ModelConfig = ModelConfig(),
        schedule: TrainSchedule = TrainSchedule(),
        eval_samples: Sequence[TrainingSample] | None = None,
        stop_auc: float | None = None, stop_target: str | None = None
        ) -> tuple[RetainModel, list[EvalReport]]:
    """Mini-batch adaptive-moment descent on the weighted loss.

    Deterministic given the schedule seed. When ``eval_samples`` is given,
    they are scored after every epoch (without bootstrap); training stops
    early once ``stop_target`` reaches ``stop_auc`` there.
    """
    samples = _usable(samples)
    if not samples:
        raise ModelError("fit: no usable training samples")
    model = RetainModel(
        vocabulary, target_codes,
        embed_dim=config.embed_dim, hidden_dim=config.hidden_dim,
        reverse_time=config.reverse_time, head=config.head, seed=schedule.seed,
    )
    b_w = loss_weights(samples, model.target_codes)
    encoded = [encode(s.history, vocabulary) for s in samples]
    y_all = _label_matrix(samples, model.target_codes)

    optimizer = Adam(model.parameters(), lr=schedule.learning_rate)
    rng = np.random.default_rng(schedule.seed)
    reports: list[EvalReport] = []
    order = np.arange(len(samples))
    for epoch in range(schedule.epochs):
        rng.shuffle(order)
        for batch_no, start in enumerate(range(0, len(order), schedule.batch_size)):
            idx = order[start:start + schedule.batch_size]
            batch = [encoded[i] for i in idx]
            x, d, mask, _ = prepare_batch(batch, model.reverse_time)
            try:
                _, probs, _, _, _ = model.forward_graph(x, d, mask)
                batch_loss = loss(probs, y_all[idx], b_w)
                optimizer.zero_grad()
                batch_loss.backward()
                optimizer.step()
            except (NonFiniteError, NonFiniteGradientError) as exc:
                raise TrainingDivergedError(
                    f"training diverged at epoch {epoch}, batch {batch_no}: {exc}") from exc
        if eval_samples is not None:
            report = evaluate(model, eval_samples, n_bootstrap=0)
            reports.append(report)
            if stop_auc is not None:
                code = stop_target or model.target_codes[0]
                auc = report.per_target.get(code, {}).get("auc")
                if auc is not None and auc >= stop_auc:
                    logger.info("early stop at epoch %d: AUC(%s)=%.4f", epoch, code, auc)
                    break
    return model, reports


def train(samples: Sequence[TrainingSample], vocabulary: EventVocabulary,
          target_codes: Sequence[str], config: ModelConfig = ModelConfig(),
          schedule: TrainSchedule = TrainSchedule(), split_ratio: float = 0.7,
          stop_auc: float | None = None, stop_target: str | None = None,
          n_bootstrap: int = 100) -> TrainResult:
    """The full protocol: patient-level split, fit, per-epoch test metrics."""
    train_samples, test_samples = split_by_patient(samples, split_ratio, schedule.seed)
    if not train_samples or not test_samples:
        raise ModelError("train: the split left an empty train or test set")
    model, reports = fit(train_samples, vocabulary, target_codes, config, schedule,
                         eval_samples=test_samples, stop_auc=stop_auc, stop_target=stop_target)
    final = evaluate(model, test_samples, n_bootstrap=n_bootstrap)
    return TrainResult(
        model=model,
        epoch_reports=reports,
        final_report=final,
        train_patient_ids=frozenset(s.history.patient_id for s in train_samples),
        test_patient_ids=frozenset(s.history.patient_id for s in test_samples),
    )


def baseline_single_target(samples: Sequence[TrainingSample], vocabulary: EventVocabulary,
                           target: str, config: ModelConfig = ModelConfig(),
                           schedule: TrainSchedule = TrainSchedule(), split_ratio: float = 0.7,
                           stop_auc: float | None = None, n_bootstrap: int = 100) -> TrainResult:
    """One independent single-disease model, same pipeline with L=1."""
    return train(samples, vocabulary, [target], config, schedule, split_ratio,
                 stop_auc=stop_auc, stop_target=target, n_bootstrap=n_bootstrap)


def render_comparison(reports: Mapping[str, EvalReport]) -> str:
    """Fixed-width comparison table: one row per metric, one column per mode."""
    names = list(reports)
    rows = {}
    labels = []
    for name in names:
        for label, value, std in reports[name].metric_rows():
            if label not in rows:
                rows[label] = {}
                labels.append(label)
            rows[label][name] = _format_cell(value, std)
    width = max(18, *(len(n) + 2 for n in names))
    header = f"{'Metric':<20}" + "".join(f"{n:>{width}}" for n in names)
    lines = [header, "-" * len(header)]
    for label in labels:
        lines.append(f"{label:<20}" + "".join(f"{rows[label].get(n, 'n/a'):>{width}}" for n in names))
    return "\n".join(lines)


def comparison_rows(reports: Mapping[str, EvalReport]) -> list[list[str]]:
    """The same table as delimited rows (header row first)."""
    names = list(reports)
    out = [["Metric"] + names]
    labels = []
    cells: dict[str, dict[str, str]] = {}
    for name in names:
        for label, value, std in reports[name].metric_rows():
            if label not in cells:
                cells[label] = {}
                labels.append(label)
            cells[label][name] = _format_cell(value, std)
    for label in labels:
        out.append([label] + [cells[label].get(n, "n/a") for n in names])
    return out


def _format_cell(value: float | None, std: float | None) -> str:
    if value is None:
        return "n/a"
    if std is None:
        return f"{value:.4f}"
    return f"{value:.4f} +/- {std:.4f}"
