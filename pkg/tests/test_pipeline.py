import pytest
import torch
from torch.nn.utils import parameters_to_vector

from ecpe_uda.config import synthetic_run_config
from ecpe_uda.corpus import default_synthetic_spec, generate_synthetic
from ecpe_uda.errors import ConfigError
from ecpe_uda.pipeline import (
    adapt,
    build_source_examples,
    evaluate_bundle,
    run_pipeline,
    split_by_domain,
    train_source,
)
from ecpe_uda.corpus import build_vocab


def small_corpus(seed=0):
    spec = default_synthetic_spec(source_docs=24, target_docs=12, seed=seed)
    return generate_synthetic(spec)


def fast_config(seed=0, **overrides):
    config = synthetic_run_config(seed=seed).with_overrides(
        emotion_epochs=25, pair_epochs=3, emotion_self_train_max_iters=2,
        cd_iterations=3, hidden_dim=24, lstm_hidden=16)
    return config.with_overrides(**overrides) if overrides else config


class TestSplitByDomain:
    def test_partitions_preserving_order(self):
        docs = small_corpus()
        by = split_by_domain(docs)
        assert set(by) == {"society", "finance"}
        assert [d.doc_id for d in by["society"]] == \
            [d.doc_id for d in docs if d.domain == "society"]


class TestBuildSourceExamples:
    def test_positive_and_negative_counts(self):
        docs = small_corpus()
        by = split_by_domain(docs)
        vocab = build_vocab(docs)
        examples = build_source_examples(by["society"], vocab, seed=0,
                                         negatives_per_pair=2)
        n_gold = sum(len(d.gold_pairs) for d in by["society"])
        positives = [e for e in examples if e.y_relation == 1.0]
        negatives = [e for e in examples if e.y_relation == 0.0]
        assert len(positives) == n_gold
        assert len(negatives) == 2 * n_gold


class TestTrainSource:
    def test_unknown_source_domain_rejected(self):
        with pytest.raises(ConfigError):
            train_source(fast_config(), small_corpus(), "weather")

    def test_bundle_carries_vocab_over_all_domains(self):
        docs = small_corpus()
        bundle = train_source(fast_config(), docs, "society")
        spec = default_synthetic_spec(source_docs=24, target_docs=12)
        finance_cause_token = spec.cause_lexicons["finance"][0][0]
        assert finance_cause_token in bundle.vocab


class TestAdapt:
    def test_max_iter_zero_leaves_parameters_untouched(self):
        docs = small_corpus()
        bundle = train_source(fast_config(), docs, "society")
        pair_before = parameters_to_vector(bundle.pair_model.parameters()).clone()
        emo_before = parameters_to_vector(
            bundle.emotion_model.parameters()).clone()
        records = adapt(bundle, docs, max_iter=0)
        assert records == []
        assert bundle.adapted is False
        assert torch.equal(
            pair_before, parameters_to_vector(bundle.pair_model.parameters()))
        assert torch.equal(
            emo_before, parameters_to_vector(bundle.emotion_model.parameters()))

    def test_adaptation_marks_bundle_and_logs(self):
        docs = small_corpus()
        bundle = train_source(fast_config(), docs, "society")
        records = adapt(bundle, docs, max_iter=2)
        assert bundle.adapted is True
        assert [r.iteration for r in records] == [0, 1]

    def test_gold_emotions_skip_emotion_self_training(self):
        docs = small_corpus()
        bundle = train_source(fast_config(), docs, "society")
        emo_before = parameters_to_vector(
            bundle.emotion_model.parameters()).clone()
        adapt(bundle, docs, max_iter=1, use_gold_emotions=True)
        assert torch.equal(
            emo_before, parameters_to_vector(bundle.emotion_model.parameters()))


class TestEvaluateBundle:
    def test_report_layout(self):
        docs = small_corpus()
        bundle = train_source(fast_config(), docs, "society")
        reports = evaluate_bundle(bundle, docs)
        tasks = [(r.task, r.target) for r in reports]
        assert ("EE", "finance") in tasks
        assert ("EE", "weighted-average") in tasks
        assert ("ECPE", "finance") in tasks
        assert ("ECPE", "weighted-average") in tasks

    def test_no_target_domain_rejected(self):
        docs = small_corpus()
        bundle = train_source(fast_config(), docs, "society")
        source_only = [d for d in docs if d.domain == "society"]
        with pytest.raises(ConfigError):
            evaluate_bundle(bundle, source_only)


class TestRunPipeline:
    def test_result_exposes_f1_lookup(self):
        docs = small_corpus()
        result = run_pipeline(fast_config(), docs, "society",
                              skip_self_training=True)
        assert 0.0 <= result.f1("ee") <= 1.0
        assert 0.0 <= result.f1("ecpe") <= 1.0
        with pytest.raises(KeyError):
            result.f1("ecpe", target="mars")

    def test_skip_self_training_produces_no_records(self):
        docs = small_corpus()
        result = run_pipeline(fast_config(), docs, "society",
                              skip_self_training=True)
        assert result.records == []

    def test_deterministic_given_seed(self):
        docs = small_corpus()

        def run():
            result = run_pipeline(fast_config(), docs, "society")
            return (
                parameters_to_vector(result.bundle.pair_model.parameters()),
                [r.row() for r in result.reports],
            )

        params_a, rows_a = run()
        params_b, rows_b = run()
        assert torch.equal(params_a, params_b)
        assert rows_a == rows_b
