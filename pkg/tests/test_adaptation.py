import random

import pytest
import torch
from torch.nn.utils import parameters_to_vector

from ecpe_uda.adaptation import (
    CandidatePair,
    build_candidates,
    candidate_to_example,
    cd_self_train,
    construct_pseudo_set,
    emotion_self_train,
    sample_source_negatives,
)
from ecpe_uda.config import RunConfig, synthetic_run_config
from ecpe_uda.corpus import (
    Document,
    build_vocab,
    default_synthetic_spec,
    generate_synthetic,
)
from ecpe_uda.emotion_model import EmotionExtractor
from ecpe_uda.errors import AdaptationError, ConfigError
from ecpe_uda.pair_model import PairVAE


def doc_with_clauses(n, doc_id="d0"):
    return Document(doc_id, "x", [[f"w{i}"] for i in range(n)])


def scored(doc_id, probs, e_idx=0):
    return [
        CandidatePair(doc_id, e_idx, c_idx, "fear", relation_probability=p)
        for c_idx, p in enumerate(probs)
    ]


class TestBuildCandidates:
    def test_cross_product_includes_self_pair(self):
        doc = doc_with_clauses(4)
        cands = build_candidates(doc, [(1, "fear"), (3, "anger")])
        assert len(cands) == 8
        keys = {c.key for c in cands}
        assert ("d0", 1, 1) in keys and ("d0", 3, 3) in keys

    def test_no_emotions_no_candidates(self):
        assert build_candidates(doc_with_clauses(3), []) == []


class TestConstructPseudoSet:
    def test_argmax_positive_and_sampled_negative(self):
        rng = random.Random(0)
        pseudo = construct_pseudo_set({"d0": scored("d0", [0.1, 0.9, 0.3])}, rng)
        assert [c.candidate_clause_index for c in pseudo.positives] == [1]
        assert len(pseudo.negatives) == 1
        assert pseudo.negatives[0].candidate_clause_index != 1

    def test_tie_broken_by_lowest_candidate_index(self):
        rng = random.Random(0)
        pseudo = construct_pseudo_set({"d0": scored("d0", [0.7, 0.7, 0.2])}, rng)
        assert pseudo.positives[0].candidate_clause_index == 0

    def test_single_candidate_document_positive_only(self):
        rng = random.Random(0)
        pseudo = construct_pseudo_set({"d0": scored("d0", [0.5])}, rng)
        assert len(pseudo.positives) == 1
        assert pseudo.negatives == []

    def test_negative_choice_follows_rng(self):
        probs = [0.1, 0.9, 0.3, 0.2]
        a = construct_pseudo_set({"d0": scored("d0", probs)}, random.Random(1))
        b = construct_pseudo_set({"d0": scored("d0", probs)}, random.Random(1))
        assert a.negatives[0].key == b.negatives[0].key

    def test_empty_candidate_list_rejected(self):
        with pytest.raises(AdaptationError):
            construct_pseudo_set({"d0": []}, random.Random(0))

    def test_documents_processed_in_sorted_order(self):
        rng = random.Random(0)
        pseudo = construct_pseudo_set(
            {"b": scored("b", [0.9, 0.1]), "a": scored("a", [0.1, 0.9])}, rng)
        assert [c.doc_id for c in pseudo.positives] == ["a", "b"]


class TestSampleSourceNegatives:
    def test_never_picks_a_gold_cause(self):
        doc = Document("d0", "x", [[f"w{i}"] for i in range(5)],
                       gold_pairs=[(3, 1, "fear"), (3, 2, "fear")])
        for seed in range(20):
            for neg in sample_source_negatives(doc, random.Random(seed)):
                assert neg.candidate_clause_index not in (1, 2)

    def test_skips_when_no_eligible_clause(self):
        doc = Document("d0", "x", [["a"], ["b"]],
                       gold_pairs=[(1, 0, "fear"), (1, 1, "fear")])
        assert sample_source_negatives(doc, random.Random(0)) == []

    def test_one_negative_per_gold_pair(self):
        doc = Document("d0", "x", [[f"w{i}"] for i in range(6)],
                       gold_pairs=[(3, 1, "fear"), (5, 4, "anger")])
        negs = sample_source_negatives(doc, random.Random(0))
        assert len(negs) == 2
        assert [n.emotion_clause_index for n in negs] == [3, 5]


class TestCandidateToExample:
    def test_labels_follow_polarity(self):
        doc = doc_with_clauses(3)
        vocab = build_vocab([doc])
        cand = CandidatePair("d0", 2, 0, "anger")
        pos = candidate_to_example(cand, doc, vocab, positive=True)
        neg = candidate_to_example(cand, doc, vocab, positive=False)
        assert (pos.y_event, pos.y_relation) == (1.0, 1.0)
        assert (neg.y_event, neg.y_relation) == (0.0, 0.0)
        assert pos.y_emotion == neg.y_emotion != 0


def small_target_setup(seed=0, n_docs=24):
    spec = default_synthetic_spec(source_docs=n_docs, target_docs=n_docs,
                                  seed=seed)
    docs = generate_synthetic(spec)
    target = [d for d in docs if d.domain == "finance"]
    vocab = build_vocab(docs)
    torch.manual_seed(seed)
    config = synthetic_run_config(seed=seed).with_overrides(
        pair_epochs=1, hidden_dim=16)
    model = PairVAE.from_config(len(vocab), config)
    docs_with_emotions = [
        (d, [(i, cat) for i, cat in enumerate(d.gold_emotions) if cat])
        for d in target
    ]
    return model, docs_with_emotions, vocab, config


class TestCdSelfTrain:
    def test_record_per_iteration_and_first_iteration_all_changed(self):
        model, dwe, vocab, config = small_target_setup()
        records = cd_self_train(model, dwe, vocab, config, seed=0, max_iter=3)
        assert len(records) == 3
        assert records[0].changed_positive_fraction == 1.0
        assert records[0].changed_example_fraction == 1.0
        for rec in records:
            assert rec.n_positives == len(dwe)
            assert rec.n_negatives == len(dwe)

    def test_log_sink_receives_lines(self):
        model, dwe, vocab, config = small_target_setup()
        lines = []
        cd_self_train(model, dwe, vocab, config, seed=0, max_iter=2,
                      log_sink=lambda rec: lines.append(rec.to_line()))
        assert len(lines) == 2
        assert '"iteration": 0' in lines[0]

    def test_deterministic_given_seed(self):
        def run():
            model, dwe, vocab, config = small_target_setup(seed=3)
            cd_self_train(model, dwe, vocab, config, seed=7, max_iter=3)
            return parameters_to_vector(model.parameters())

        assert torch.equal(run(), run())

    def test_zero_iterations_touch_nothing(self):
        model, dwe, vocab, config = small_target_setup()
        before = parameters_to_vector(model.parameters()).clone()
        records = cd_self_train(model, dwe, vocab, config, seed=0, max_iter=0)
        assert records == []
        assert torch.equal(before, parameters_to_vector(model.parameters()))

    def test_no_candidates_rejected(self):
        model, _dwe, vocab, config = small_target_setup()
        with pytest.raises(AdaptationError):
            cd_self_train(model, [], vocab, config, seed=0, max_iter=1)

    def test_negative_sets_vary_across_iterations(self):
        model, dwe, vocab, config = small_target_setup(n_docs=25)
        neg_sets = []
        original = construct_pseudo_set

        def spy(scored_by_doc, rng, iteration=0, seed=0):
            pseudo = original(scored_by_doc, rng, iteration=iteration, seed=seed)
            neg_sets.append(frozenset(c.key for c in pseudo.negatives))
            return pseudo

        import ecpe_uda.adaptation as adaptation_module
        adaptation_module.construct_pseudo_set = spy
        try:
            cd_self_train(model, dwe, vocab, config, seed=0, max_iter=10)
        finally:
            adaptation_module.construct_pseudo_set = original
        assert len(set(neg_sets)) > 1


class TestEmotionSelfTrain:
    def _setup(self, seed=0):
        spec = default_synthetic_spec(source_docs=30, target_docs=15, seed=seed)
        docs = generate_synthetic(spec)
        source = [d for d in docs if d.domain == "society"]
        target = [d for d in docs if d.domain == "finance"]
        vocab = build_vocab(docs)
        config = synthetic_run_config(seed=seed).with_overrides(
            emotion_self_train_max_iters=3, self_train_epochs=1)
        torch.manual_seed(seed)
        model = EmotionExtractor.from_config(vocab, config)
        return model, source, target, config

    def test_pseudo_docs_have_single_labeled_clause(self):
        model, source, target, config = self._setup()
        pseudo = emotion_self_train(model, source, target, config)
        target_ids = {d.doc_id for d in target}
        for doc_id, doc in pseudo.items():
            assert doc_id in target_ids
            assert sum(1 for e in doc.gold_emotions if e) == 1

    def test_threshold_one_sided(self):
        # a threshold no prediction can clear keeps the pseudo set empty
        model, source, target, config = self._setup()
        pseudo = emotion_self_train(model, source, target, config,
                                    threshold=0.999999)
        assert pseudo == {}

    def test_originals_never_mutated(self):
        model, source, target, config = self._setup()
        before = [d.to_json() for d in target]
        emotion_self_train(model, source, target, config)
        assert [d.to_json() for d in target] == before

    def test_empty_source_rejected(self):
        model, _source, target, config = self._setup()
        with pytest.raises(ConfigError):
            emotion_self_train(model, [], target, config)

    def test_bad_threshold_rejected(self):
        model, source, target, config = self._setup()
        with pytest.raises(ConfigError):
            emotion_self_train(model, source, target, config, threshold=1.5)
