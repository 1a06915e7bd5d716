"""End-to-end driver: source training, target adaptation, evaluation."""

from __future__ import annotations

import copy
import random
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import torch

from .adaptation import (
    IterationRecord,
    candidate_to_example,
    cd_self_train,
    emotion_self_train,
    sample_source_negatives,
)
from .checkpoint import Bundle
from .config import RunConfig
from .corpus import Document, Vocabulary, build_vocab, emotion_to_index
from .emotion_model import EmotionExtractor, predict_document_emotions
from .errors import ConfigError
from .evaluation import (
    MetricsReport,
    predict_pairs,
    score_ecpe,
    score_ee,
    weighted_average,
)
from .pair_model import PairExample, PairVAE


def set_all_seeds(seed: int) -> None:
    random.seed(seed)
    torch.manual_seed(seed)


def split_by_domain(docs: Sequence[Document]) -> dict[str, list[Document]]:
    out: dict[str, list[Document]] = {}
    for doc in docs:
        out.setdefault(doc.domain, []).append(doc)
    return out


def build_source_examples(
    docs: Sequence[Document], vocab: Vocabulary, seed: int,
    negatives_per_pair: int = 1,
) -> list[PairExample]:
    """Gold positives plus randomly sampled negatives per gold emotion
    clause (an emotion clause paired with a non-cause clause)."""
    rng = random.Random(seed)
    examples = []
    for doc in docs:
        for e_idx, c_idx, category in doc.gold_pairs:
            examples.append(
                PairExample.build(
                    doc.clauses[e_idx], doc.clauses[c_idx], vocab,
                    y_emotion=emotion_to_index(category),
                    y_event=1.0, y_relation=1.0,
                )
            )
        for _ in range(negatives_per_pair):
            for neg in sample_source_negatives(doc, rng):
                examples.append(
                    candidate_to_example(neg, doc, vocab, positive=False))
    return examples


def train_pair_source(
    model: PairVAE,
    examples: Sequence[PairExample],
    config: RunConfig,
) -> None:
    optimizer = torch.optim.Adam(model.parameters(), lr=config.pair_lr)
    rng = random.Random(config.seed)
    gen = torch.Generator().manual_seed(config.seed)
    order = list(examples)
    for _ in range(config.pair_epochs):
        rng.shuffle(order)
        for start in range(0, len(order), config.pair_batch_size):
            model.train_step(order[start:start + config.pair_batch_size],
                             optimizer, generator=gen)


def train_emotion_source(
    model: EmotionExtractor,
    docs: Sequence[Document],
    config: RunConfig,
) -> None:
    optimizer = torch.optim.Adam(model.parameters(), lr=config.emotion_lr)
    for _ in range(config.emotion_epochs):
        model.train_epoch(docs, optimizer, batch_size=config.emotion_batch_size)


def predicted_emotions_for(
    model: EmotionExtractor, docs: Sequence[Document]
) -> list[tuple[Document, list[tuple[int, str]]]]:
    out = []
    for doc in docs:
        preds, _ = predict_document_emotions(model, doc)
        out.append((doc, [(i, cat) for i, cat, _p in preds]))
    return out


def gold_emotions_for(
    docs: Sequence[Document],
) -> list[tuple[Document, list[tuple[int, str]]]]:
    out = []
    for doc in docs:
        if doc.gold_emotions is None:
            raise ConfigError(f"document {doc.doc_id!r} lacks gold emotions")
        out.append((doc, [
            (i, cat) for i, cat in enumerate(doc.gold_emotions) if cat
        ]))
    return out


def train_source(
    config: RunConfig,
    docs: Sequence[Document],
    source_domain: str,
) -> Bundle:
    """Train the emotion model and the pair model on the source domain.

    The vocabulary covers every document handed in (target text is
    unlabeled but available in the adaptation setting)."""
    set_all_seeds(config.seed)
    by_domain = split_by_domain(docs)
    if source_domain not in by_domain:
        raise ConfigError(f"source domain {source_domain!r} not in corpus")
    source_docs = by_domain[source_domain]
    vocab = build_vocab(docs)

    emotion_model = EmotionExtractor.from_config(vocab, config)
    train_emotion_source(emotion_model, source_docs, config)

    pair_model = PairVAE.from_config(len(vocab), config)
    examples = build_source_examples(source_docs, vocab, config.seed,
                                     negatives_per_pair=config.source_negatives)
    train_pair_source(pair_model, examples, config)

    return Bundle(pair_model, emotion_model, vocab, config, source_domain)


def adapt(
    bundle: Bundle,
    target_docs: Sequence[Document],
    config: Optional[RunConfig] = None,
    max_iter: Optional[int] = None,
    use_gold_emotions: bool = False,
    log_sink: Optional[Callable[[IterationRecord], None]] = None,
) -> list[IterationRecord]:
    """Adapt the bundle's models to the target documents in place.

    The emotion extractor is self-trained first, then the pair model runs
    the from-scratch relation self-training. ``max_iter=0`` disables the
    whole adaptation and leaves every parameter untouched.
    """
    config = config or bundle.run_config
    set_all_seeds(config.seed)
    iterations = config.cd_iterations if max_iter is None else max_iter
    if iterations == 0:
        return []

    source_domain_docs = [d for d in target_docs if d.domain == bundle.source_domain]
    target_only = [d for d in target_docs if d.domain != bundle.source_domain]
    if not target_only:
        target_only = list(target_docs)

    if use_gold_emotions:
        docs_with_emotions = gold_emotions_for(target_only)
    else:
        # emotion self-training needs labeled source documents in the
        # corpus; without them the frozen extractor is used as-is
        if source_domain_docs:
            emotion_self_train(
                bundle.emotion_model,
                source_docs=source_domain_docs,
                target_docs=target_only,
                config=config,
            )
        docs_with_emotions = predicted_emotions_for(
            bundle.emotion_model, target_only)
    docs_with_emotions = [
        (doc, emotions) for doc, emotions in docs_with_emotions if emotions
    ]
    records = cd_self_train(
        bundle.pair_model, docs_with_emotions, bundle.vocab, config,
        seed=config.seed, max_iter=iterations, log_sink=log_sink,
    )
    bundle.adapted = True
    return records


def evaluate_bundle(
    bundle: Bundle,
    docs: Sequence[Document],
    use_gold_emotions: bool = False,
) -> list[MetricsReport]:
    """Per-target EE and ECPE reports plus weighted-average rows."""
    config = bundle.run_config
    by_domain = split_by_domain(docs)
    targets = sorted(d for d in by_domain if d != bundle.source_domain)
    if not targets:
        raise ConfigError("no target domains in the evaluation corpus")

    ee_reports, ecpe_reports = [], []
    for target in targets:
        target_docs = by_domain[target]
        if use_gold_emotions:
            docs_with_emotions = gold_emotions_for(target_docs)
        else:
            docs_with_emotions = predicted_emotions_for(
                bundle.emotion_model, target_docs)

        ee_pred = [
            (doc.doc_id, i, cat)
            for doc, emotions in docs_with_emotions
            for i, cat in emotions
        ]
        ee_gold = [
            (doc.doc_id, i, cat)
            for doc in target_docs if doc.gold_emotions
            for i, cat in enumerate(doc.gold_emotions) if cat
        ]
        ee_reports.append(score_ee(ee_pred, ee_gold,
                                   source=bundle.source_domain, target=target))

        predictions = predict_pairs(
            bundle.pair_model,
            [(d, e) for d, e in docs_with_emotions if e],
            bundle.vocab,
            threshold=config.relation_threshold,
        )
        gold = [
            (doc.doc_id, e_idx, c_idx, cat)
            for doc in target_docs
            for e_idx, c_idx, cat in doc.gold_pairs
        ]
        ecpe_reports.append(score_ecpe(predictions, gold,
                                       source=bundle.source_domain,
                                       target=target))

    reports = list(ee_reports) + [weighted_average(ee_reports)]
    reports += list(ecpe_reports) + [weighted_average(ecpe_reports)]
    return reports


@dataclass
class PipelineResult:
    bundle: Bundle
    reports: list[MetricsReport]
    records: list[IterationRecord] = field(default_factory=list)

    def f1(self, task: str, target: str = "weighted-average") -> float:
        for rep in self.reports:
            if (rep.task.lower() == task.lower() and rep.target == target
                    and rep.case == "all"):
                return rep.f1
        raise KeyError(f"no report for {task}/{target}")


def run_pipeline(
    config: RunConfig,
    docs: Sequence[Document],
    source_domain: str,
    skip_self_training: bool = False,
    use_gold_emotions: bool = False,
    log_sink: Optional[Callable[[IterationRecord], None]] = None,
) -> PipelineResult:
    """source-train -> (emotion self-train -> relation self-train) -> evaluate."""
    bundle = train_source(config, docs, source_domain)
    records: list[IterationRecord] = []
    if not skip_self_training:
        records = adapt(bundle, list(docs), config,
                        use_gold_emotions=use_gold_emotions, log_sink=log_sink)
    reports = evaluate_bundle(bundle, docs, use_gold_emotions=use_gold_emotions)
    return PipelineResult(bundle=bundle, reports=reports, records=records)
