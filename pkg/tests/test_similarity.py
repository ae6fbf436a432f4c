import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqrisk.data import DataError
from seqrisk.model import RetainModel
from seqrisk.similarity import (
    EventVectorTable,
    KeyEvent,
    align,
    event_vectors,
    query_by_key_events,
    similar_patients,
    split_and_aggregate,
    step_cost,
)

from conftest import make_sequence, make_vocab
from oracles import brute_force_dtw


@pytest.fixture
def fixed_vectors():
    return EventVectorTable({
        "A": np.array([0.0, 0.0]),
        "B": np.array([3.0, 4.0]),
        "C": np.array([1.0, 1.0]),
        "D": np.array([-2.0, 0.5]),
    }, "fixture")


def cost_matrix(seq_a, seq_b, vectors):
    return np.array([[step_cost(a, b, vectors) for b in seq_b.steps] for a in seq_a.steps])


class TestEventVectors:
    def test_reused_mode_returns_embedding_columns(self):
        vocab = make_vocab(2, 2)
        model = RetainModel(vocab, ["D0"], embed_dim=4, hidden_dim=4, seed=0)
        table = event_vectors(model=model, mode="reused")
        assert table.provenance == "reused_embedding"
        for j, code in enumerate(vocab.codes()):
            assert np.array_equal(table[code], model.W_emb.values[:, j])

    def test_standalone_learns_cooccurrence(self):
        # a and b always share a step; c always sits alone in other patients
        corpus = [make_sequence(f"p{i}", [(1.0, {"a", "b"}), (2.0, {"a", "b"})])
                  for i in range(10)]
        corpus += [make_sequence(f"q{i}", [(1.0, {"c"}), (5.0, {"c"})]) for i in range(10)]
        table = event_vectors(corpus=corpus, mode="standalone", dim=8, seed=0, epochs=10)

        def cosine(u, v):
            return float(u @ v / (np.linalg.norm(u) * np.linalg.norm(v)))

        assert cosine(table["a"], table["b"]) > cosine(table["a"], table["c"])

    def test_standalone_deterministic(self):
        corpus = [make_sequence("p", [(1.0, {"a", "b"}), (3.0, {"b", "c"})])]
        t1 = event_vectors(corpus=corpus, mode="standalone", dim=4, seed=5, epochs=3)
        t2 = event_vectors(corpus=corpus, mode="standalone", dim=4, seed=5, epochs=3)
        for code in t1.vectors:
            assert np.array_equal(t1[code], t2[code])

    def test_empty_corpus_is_hard_error(self):
        with pytest.raises(DataError):
            event_vectors(corpus=[], mode="standalone")

    def test_missing_code_is_hard_error(self, fixed_vectors):
        with pytest.raises(DataError):
            fixed_vectors["Z"]


class TestStepCost:
    def test_identical_sets_cost_zero(self, fixed_vectors):
        assert step_cost({"A", "B"}, {"A", "B"}, fixed_vectors) == 0.0

    def test_singletons_are_vector_distance(self, fixed_vectors):
        assert step_cost({"A"}, {"B"}, fixed_vectors) == pytest.approx(5.0)

    def test_multi_event_steps_use_mean_vectors(self, fixed_vectors):
        # mean({A,B}) = (1.5, 2.0); mean({A,B,C}) = (4/3, 5/3)
        expected = float(np.linalg.norm(np.array([1.5, 2.0]) - np.array([4 / 3, 5 / 3])))
        got = step_cost({"A", "B"}, {"A", "B", "C"}, fixed_vectors)
        assert got == pytest.approx(expected, rel=1e-12)


class TestAlign:
    def test_self_alignment_zero_diagonal(self, fixed_vectors):
        seq = make_sequence("p", [(1, {"A"}), (2, {"B"}), (3, {"C"})])
        result = align(seq, seq, fixed_vectors)
        assert result.distance == 0.0
        assert result.path == ((0, 0), (1, 1), (2, 2))

    def test_one_by_n_forced_path(self, fixed_vectors):
        a = make_sequence("a", [(1, {"A"})])
        b = make_sequence("b", [(1, {"A"}), (2, {"B"}), (3, {"C"})])
        result = align(a, b, fixed_vectors)
        assert result.path == ((0, 0), (0, 1), (0, 2))
        expected = sum(step_cost({"A"}, {c}, fixed_vectors) for c in ("A", "B", "C"))
        assert result.distance == pytest.approx(expected)

    def test_path_moves_are_monotone_unit_steps(self, fixed_vectors):
        rng = np.random.default_rng(1)
        codes = list(fixed_vectors.vectors)
        for _ in range(20):
            a = _random_seq(rng, codes, "a")
            b = _random_seq(rng, codes, "b")
            result = align(a, b, fixed_vectors)
            assert result.path[0] == (0, 0)
            assert result.path[-1] == (len(a.steps) - 1, len(b.steps) - 1)
            for (i1, j1), (i2, j2) in zip(result.path, result.path[1:]):
                assert (i2 - i1, j2 - j1) in ((1, 0), (0, 1), (1, 1))

    def test_matches_brute_force_on_random_pairs(self, fixed_vectors):
        rng = np.random.default_rng(2)
        codes = list(fixed_vectors.vectors)
        for _ in range(30):
            a = _random_seq(rng, codes, "a")
            b = _random_seq(rng, codes, "b")
            result = align(a, b, fixed_vectors)
            expected = brute_force_dtw(cost_matrix(a, b, fixed_vectors))
            assert result.distance == pytest.approx(expected, rel=1e-12)
            path_cost = sum(step_cost(a.steps[i], b.steps[j], fixed_vectors)
                            for i, j in result.path)
            assert path_cost == pytest.approx(result.distance, rel=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(min_value=0, max_value=2 ** 31 - 1))
    def test_symmetric_distance(self, seed):
        rng = np.random.default_rng(seed)
        vectors = EventVectorTable(
            {c: rng.normal(size=3) for c in "ABCD"}, "fixture")
        a = _random_seq(rng, list("ABCD"), "a")
        b = _random_seq(rng, list("ABCD"), "b")
        d_ab = align(a, b, vectors).distance
        d_ba = align(b, a, vectors).distance
        assert d_ab == pytest.approx(d_ba, rel=1e-9)

    def test_empty_sequence_rejected(self, fixed_vectors):
        a = make_sequence("a", [(1, {"A"})])
        empty = make_sequence("b", [])
        with pytest.raises(DataError):
            align(a, empty, fixed_vectors)


def _random_seq(rng, codes, pid, max_len=6):
    n = int(rng.integers(1, max_len + 1))
    times = np.sort(rng.choice(np.arange(1, 60), size=n, replace=False)).astype(float)
    steps = [(t, set(rng.choice(codes, size=int(rng.integers(1, 3)), replace=False)))
             for t in times]
    return make_sequence(pid, steps, prediction_time=100.0)


class TestSimilarPatients:
    def cohort(self, fixed_vectors):
        return [
            make_sequence("p1", [(1, {"A"}), (2, {"B"})]),
            make_sequence("p2", [(1, {"A"}), (2, {"C"})]),
            make_sequence("p3", [(1, {"D"}), (2, {"D"})]),
            make_sequence("p4", [(1, {"A"}), (2, {"B"}), (3, {"C"})]),
            make_sequence("p5", [(1, {"B"})]),
        ]

    def test_focal_in_cohort_ranks_first_with_zero(self, fixed_vectors):
        cohort = self.cohort(fixed_vectors)
        ranked, _ = similar_patients(cohort[0], cohort, fixed_vectors, k=3)
        assert ranked[0][0].patient_id == "p1"
        assert ranked[0][1] == 0.0

    def test_k_larger_than_cohort_returns_everything(self, fixed_vectors):
        cohort = self.cohort(fixed_vectors)
        ranked, _ = similar_patients(cohort[0], cohort, fixed_vectors, k=50)
        assert len(ranked) == 5

    def test_ranking_matches_pairwise_oracle(self, fixed_vectors):
        cohort = self.cohort(fixed_vectors)
        focal = cohort[0]
        ranked, _ = similar_patients(focal, cohort, fixed_vectors, k=5)
        expected = sorted(
            ((seq, brute_force_dtw(cost_matrix(seq, focal, fixed_vectors))) for seq in cohort),
            key=lambda pair: (pair[1], pair[0].patient_id))
        assert [s.patient_id for s, _ in ranked] == [s.patient_id for s, _ in expected]

    def test_histogram_covers_all_distances(self, fixed_vectors):
        cohort = self.cohort(fixed_vectors)
        _, hist = similar_patients(cohort[0], cohort, fixed_vectors, k=2, n_bins=4)
        assert hist.counts.sum() == 5
        assert len(hist.bin_edges) == 5

    def test_empty_cohort_is_empty_result(self, fixed_vectors):
        focal = make_sequence("p", [(1, {"A"})])
        ranked, hist = similar_patients(focal, [], fixed_vectors, k=3)
        assert ranked == []


class TestKeyEventQuery:
    def cohort(self):
        return [
            make_sequence("p1", [(1, {"A"}), (2, {"B"})]),
            make_sequence("p2", [(1, {"B"}), (2, {"A"})]),
            make_sequence("p3", [(1, {"A"})]),
            make_sequence("p4", [(1, {"A", "B"})]),
            make_sequence("p5", [(1, {"C"}), (2, {"A"}), (3, {"B"})]),
        ]

    def test_empty_query_is_identity(self):
        cohort = self.cohort()
        assert query_by_key_events(cohort, []) == cohort

    def test_a_before_b_matches_two_of_five(self):
        cohort = self.cohort()
        result = query_by_key_events(cohort, [KeyEvent("A"), KeyEvent("B", after_previous=True)])
        assert [s.patient_id for s in result] == ["p1", "p5"]

    def test_presence_only_ignores_order(self):
        cohort = self.cohort()
        result = query_by_key_events(cohort, ["A", "B"])
        assert [s.patient_id for s in result] == ["p1", "p2", "p4", "p5"]

    def test_unknown_code_empty_with_warning(self, caplog):
        cohort = self.cohort()
        vocab = make_vocab()
        with caplog.at_level("WARNING"):
            result = query_by_key_events(cohort, ["Z9"], vocabulary=vocab)
        assert result == []
        assert any("Z9" in rec.message for rec in caplog.records)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(min_value=0, max_value=2 ** 31 - 1))
    def test_adding_a_constraint_never_grows_the_result(self, seed):
        rng = np.random.default_rng(seed)
        cohort = [_random_seq(rng, list("ABC"), f"p{i}") for i in range(8)]
        base = query_by_key_events(cohort, ["A"])
        narrowed = query_by_key_events(cohort, ["A", "B"])
        assert set(s.patient_id for s in narrowed) <= set(s.patient_id for s in base)


class TestSplitAndAggregate:
    def test_identical_single_outcomes_one_node_full_count(self, fixed_vectors):
        focal = make_sequence("f", [(1, {"A"}), (2, {"B"})])
        similar = [make_sequence(f"p{i}", [(1, {"A"}), (2, {"B"}), (10, {"C"})])
                   for i in range(4)]
        splits, flow = split_and_aggregate(similar, focal, fixed_vectors, n_stages=3)
        assert all(len(s.outcome) == 1 for s in splits)
        assert len(flow.nodes) == 1
        assert flow.nodes[0].stage == 0
        assert flow.nodes[0].code == "C"
        assert flow.nodes[0].patient_count == 4
        assert flow.edges == ()

    def test_three_patient_hand_tally(self, fixed_vectors):
        focal = make_sequence("f", [(1, {"A"})])
        similar = [
            make_sequence("p1", [(1, {"A"}), (5, {"B"}), (9, {"C"})]),
            make_sequence("p2", [(1, {"A"}), (4, {"B"}), (10, {"D"})]),
            make_sequence("p3", [(1, {"A"}), (6, {"C"}), (8, {"D"})]),
        ]
        splits, flow = split_and_aggregate(similar, focal, fixed_vectors, n_stages=2)
        nodes = {(n.stage, n.code): n.patient_count for n in flow.nodes}
        assert nodes == {(0, "B"): 2, (0, "C"): 1, (1, "C"): 1, (1, "D"): 2}
        edges = {(e.source, e.target): (e.patient_count, e.mean_duration_days)
                 for e in flow.edges}
        assert edges[((0, "B"), (1, "C"))] == (1, 4.0)   # p1: 9 - 5
        assert edges[((0, "B"), (1, "D"))] == (1, 6.0)   # p2: 10 - 4
        assert edges[((0, "C"), (1, "D"))] == (1, 2.0)   # p3: 8 - 6

    def test_single_stage_nodes_only(self, fixed_vectors):
        focal = make_sequence("f", [(1, {"A"})])
        similar = [make_sequence("p1", [(1, {"A"}), (2, {"B"}), (3, {"C"})])]
        _, flow = split_and_aggregate(similar, focal, fixed_vectors, n_stages=1)
        assert flow.edges == ()
        assert {n.code for n in flow.nodes} == {"B"}  # first event of the only segment

    def test_empty_outcomes_contribute_history_only(self, fixed_vectors):
        focal = make_sequence("f", [(1, {"A"}), (2, {"B"}), (3, {"C"})])
        similar = [make_sequence("p1", [(1, {"A"}), (2, {"B"})])]
        splits, flow = split_and_aggregate(similar, focal, fixed_vectors, n_stages=2)
        assert splits[0].outcome == ()
        assert flow.nodes == ()

    def test_flow_conservation_on_long_outcomes(self, fixed_vectors):
        rng = np.random.default_rng(3)
        focal = make_sequence("f", [(1, {"A"})])
        similar = []
        for i in range(12):
            n = int(rng.integers(4, 8))  # >= n_stages so every stage is occupied
            times = np.sort(rng.choice(np.arange(2, 40), size=n, replace=False)).astype(float)
            steps = [(1.0, {"A"})] + [(t, {str(rng.choice(list("BCD")))}) for t in times]
            similar.append(make_sequence(f"p{i}", steps, prediction_time=100.0))
        n_stages = 3
        _, flow = split_and_aggregate(similar, focal, fixed_vectors, n_stages=n_stages)
        per_stage = {}
        for n in flow.nodes:
            per_stage[n.stage] = per_stage.get(n.stage, 0) + n.patient_count
        assert all(v <= 12 for v in per_stage.values())
        node_keys = {(n.stage, n.code) for n in flow.nodes}
        for e in flow.edges:
            assert e.source in node_keys and e.target in node_keys
        # every non-terminal node's count equals its outgoing edge count sum
        outgoing = {}
        for e in flow.edges:
            outgoing[e.source] = outgoing.get(e.source, 0) + e.patient_count
        for n in flow.nodes:
            if n.stage < n_stages - 1:
                assert outgoing.get((n.stage, n.code), 0) == n.patient_count

    def test_flow_graph_serializes(self, fixed_vectors):
        focal = make_sequence("f", [(1, {"A"})])
        similar = [make_sequence("p1", [(1, {"A"}), (2, {"B"}), (3, {"C"})])]
        _, flow = split_and_aggregate(similar, focal, fixed_vectors, n_stages=2)
        payload = flow.to_dict()
        assert payload["stages"] == [0, 1]
        assert all({"stage", "code", "patient_count"} <= set(n) for n in payload["nodes"])
