import math

import numpy as np
import pytest

from seqrisk.autodiff import Tensor
from seqrisk.data import TrainingSample
from seqrisk.model import save
from seqrisk.synth import CausalRule, Prodrome, SyntheticCohortSpec, generate_synthetic
from seqrisk.training import (
    EvalReport,
    ModelConfig,
    TrainSchedule,
    baseline_single_target,
    comparison_rows,
    evaluate,
    fit,
    loss,
    loss_weights,
    render_comparison,
    split_by_patient,
    train,
)

from conftest import make_sequence, make_vocab


SMALL_CONFIG = ModelConfig(embed_dim=12, hidden_dim=12)


def quick_cohort(n=600, seed=0):
    """High-contrast planted rule so a small model learns in a few epochs."""
    spec = SyntheticCohortSpec(
        n_patients=n, n_diagnoses=5, n_treatments=5,
        rules=(CausalRule("T00", "T01", "D00", 0.95, 0.03),),
        prodromes=(Prodrome("D00", "D03", 0.9, 0.02),),
        background_label_rate=0.1,
        rng_seed=seed,
    )
    return generate_synthetic(spec)


class TestLoss:
    def test_exact_labels_give_near_zero_loss(self):
        pred = Tensor(np.array([[1.0, 0.0]]))
        assert loss(pred, np.array([[1.0, 0.0]]), np.ones(2)).item() <= 1e-10

    def test_log_two_for_half_probability(self):
        pred = Tensor(np.array([[0.5]]))
        value = loss(pred, np.array([[1.0]]), np.ones(1)).item()
        assert value == pytest.approx(math.log(2), rel=1e-12)

    def test_hand_computed_weighted_example(self):
        # b_w weights only the positive term: -(1*ln 0.8 + ln 0.7)
        pred = Tensor(np.array([[0.8, 0.3]]))
        value = loss(pred, np.array([[1.0, 0.0]]), np.array([1.0, 0.5])).item()
        assert value == pytest.approx(-(math.log(0.8) + math.log(0.7)), rel=1e-12)
        assert value == pytest.approx(0.5798, abs=1e-4)

    def test_loss_positive_unless_exact(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            p = rng.uniform(0.01, 0.99, size=(3, 2))
            y = (rng.random((3, 2)) < 0.5).astype(float)
            assert loss(Tensor(p), y, np.ones(2)).item() > 0

    def test_shape_mismatch_is_hard_error(self):
        with pytest.raises(Exception):
            loss(Tensor(np.ones((1, 2))), np.ones((1, 3)), np.ones(2))


class TestLossWeights:
    def test_clamp_keeps_unseen_target_finite(self):
        vocab = make_vocab()
        seq = make_sequence("p", [(1.0, {"T0"})], prediction_time=2.0)
        samples = [TrainingSample(seq, frozenset())]
        b_w = loss_weights(samples, ["D0"])
        assert b_w[0] == pytest.approx(1.0 / math.log(2))

    def test_rarer_targets_weigh_more(self):
        seqs = [TrainingSample(make_sequence(f"p{i}", [(1.0, {"T0"})], 2.0),
                               frozenset({"D0"} if i < 20 else {"D0", "D1"}))
                for i in range(30)]
        b_w = loss_weights(seqs, ["D0", "D1"])
        assert b_w[0] < b_w[1]  # D0 occurs 30 times, D1 only 10


class TestSplit:
    def test_patient_sets_disjoint(self):
        _, samples = quick_cohort(n=100)
        train_set, test_set = split_by_patient(samples, 0.7, seed=1)
        train_ids = {s.history.patient_id for s in train_set}
        test_ids = {s.history.patient_id for s in test_set}
        assert train_ids.isdisjoint(test_ids)
        assert len(train_set) + len(test_set) == len(samples)

    def test_multi_sample_patients_stay_together(self):
        vocab = make_vocab()
        samples = []
        for p in range(10):
            for w in range(3):
                seq = make_sequence(f"p{p}", [(1.0 + w, {"T0"})], prediction_time=5.0 + w)
                samples.append(TrainingSample(seq, frozenset({"D0"})))
        train_set, test_set = split_by_patient(samples, 0.5, seed=0)
        train_ids = {s.history.patient_id for s in train_set}
        test_ids = {s.history.patient_id for s in test_set}
        assert train_ids.isdisjoint(test_ids)


class TestTrainingLoop:
    def test_same_seed_same_parameters(self, tmp_path):
        vocab, samples = quick_cohort(n=120, seed=3)
        schedule = TrainSchedule(epochs=2, batch_size=32, learning_rate=0.01, seed=7)
        r1 = train(samples, vocab, ["D00"], SMALL_CONFIG, schedule, n_bootstrap=0)
        r2 = train(samples, vocab, ["D00"], SMALL_CONFIG, schedule, n_bootstrap=0)
        save(r1.model, tmp_path / "a.json")
        save(r2.model, tmp_path / "b.json")
        assert (tmp_path / "a.json").read_text() == (tmp_path / "b.json").read_text()

    def test_learns_planted_rule(self):
        vocab, samples = quick_cohort(n=600, seed=4)
        schedule = TrainSchedule(epochs=12, batch_size=32, learning_rate=0.02, seed=0)
        result = train(samples, vocab, ["D00"], SMALL_CONFIG, schedule,
                       stop_auc=0.93, stop_target="D00", n_bootstrap=0)
        auc = result.final_report.per_target["D00"]["auc"]
        assert auc >= 0.9

    def test_reports_one_per_epoch_until_stop(self):
        vocab, samples = quick_cohort(n=200, seed=5)
        schedule = TrainSchedule(epochs=3, batch_size=32, learning_rate=0.01, seed=0)
        result = train(samples, vocab, ["D00"], SMALL_CONFIG, schedule, n_bootstrap=0)
        assert len(result.epoch_reports) == 3

    def test_never_positive_target_trains_without_blowup(self):
        vocab = make_vocab()
        samples = [TrainingSample(make_sequence(f"p{i}", [(1.0, {"T0"})], 2.0), frozenset())
                   for i in range(40)]
        model, _ = fit(samples, vocab, ["D0"],
                       ModelConfig(embed_dim=4, hidden_dim=4),
                       TrainSchedule(epochs=2, batch_size=8, learning_rate=0.01, seed=0))
        assert model is not None


class TestEvaluate:
    def test_report_fields_and_ranges(self):
        vocab, samples = quick_cohort(n=150, seed=6)
        model, _ = fit(samples[:100], vocab, ["D00", "D01"],
                       ModelConfig(embed_dim=8, hidden_dim=8),
                       TrainSchedule(epochs=1, batch_size=32, seed=0))
        report = evaluate(model, samples[100:], n_bootstrap=20)
        assert report.nll >= 0
        if report.auc is not None:
            assert 0 <= report.auc <= 1
        assert 0 <= report.precision <= 1
        assert set(report.recall_at) == {2, 4}
        assert report.n_samples == 50
        assert "auc" in report.bootstrap_std

    def test_empty_test_set_rejected(self):
        vocab, samples = quick_cohort(n=10, seed=7)
        model, _ = fit(samples, vocab, ["D00"], ModelConfig(4, 4),
                       TrainSchedule(epochs=1, batch_size=8, seed=0))
        with pytest.raises(Exception):
            evaluate(model, [])


class TestBaselineAndComparison:
    def test_single_target_recall_semantics(self):
        vocab, samples = quick_cohort(n=150, seed=8)
        result = baseline_single_target(
            samples, vocab, "D00", ModelConfig(8, 8),
            TrainSchedule(epochs=1, batch_size=32, seed=0), n_bootstrap=0)
        report = result.final_report
        # with one target, every labeled sample's top-k covers its label
        assert report.recall_at[2] == 1.0
        assert report.recall_at[4] == 1.0

    def test_comparison_table_has_five_metric_rows_per_mode(self):
        report = EvalReport(
            nll=0.3, auc=0.85, precision=0.8, recall_at={2: 0.7, 4: 0.9},
            per_target={}, n_samples=10,
            bootstrap_std={"nll": 0.01, "auc": 0.02, "precision": 0.01,
                           "recall@2": 0.03, "recall@4": 0.02})
        rows = comparison_rows({"single-target": report, "multi-target": report})
        assert rows[0] == ["Metric", "single-target", "multi-target"]
        labels = [r[0] for r in rows[1:]]
        assert labels == ["Neg Log Likelihood", "AUC", "Precision", "Recall@2", "Recall@4"]
        assert all("+/-" in cell for row in rows[1:] for cell in row[1:])
        text = render_comparison({"single-target": report, "multi-target": report})
        assert "Recall@4" in text and "single-target" in text
