"""Self-training loops: threshold-based emotion self-training and the
from-scratch pseudo-label loop for relation identification."""

from __future__ import annotations

import copy
import logging
import random
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import torch

from .config import RunConfig
from .corpus import EMOTION_CLASSES, Document, Vocabulary, emotion_to_index
from .emotion_model import EmotionExtractor, predict_document_emotions
from .errors import AdaptationError, ConfigError
from .pair_model import PairExample, PairVAE

log = logging.getLogger(__name__)


@dataclass
class CandidatePair:
    """One (emotion clause, candidate clause) pairing within a document."""

    doc_id: str
    emotion_clause_index: int
    candidate_clause_index: int
    emotion_category: str
    relation_probability: Optional[float] = None

    @property
    def key(self) -> tuple:
        return (self.doc_id, self.emotion_clause_index,
                self.candidate_clause_index)


@dataclass
class PseudoLabelSet:
    """Per-iteration pseudo-labeled training set, rebuilt from scratch."""

    iteration: int
    positives: list[CandidatePair]
    negatives: list[CandidatePair]
    seed: int


@dataclass
class IterationRecord:
    """One line of the self-training change log."""

    iteration: int
    n_positives: int
    n_negatives: int
    changed_positive_fraction: float
    changed_example_fraction: float

    def to_line(self) -> str:
        return (
            f'{{"iteration": {self.iteration}, '
            f'"positives": {self.n_positives}, '
            f'"negatives": {self.n_negatives}, '
            f'"changed_positive_fraction": {self.changed_positive_fraction:.6f}, '
            f'"changed_example_fraction": {self.changed_example_fraction:.6f}}}'
        )


def build_candidates(
    doc: Document,
    predicted_emotion_clauses: Sequence[tuple[int, str]],
) -> list[CandidatePair]:
    """Cross product {emotion clause} x {all clauses, including itself}."""
    candidates = []
    for e_idx, category in predicted_emotion_clauses:
        for c_idx in range(len(doc.clauses)):
            candidates.append(CandidatePair(doc.doc_id, e_idx, c_idx, category))
    return candidates


def construct_pseudo_set(
    scored_by_doc: dict[str, list[CandidatePair]],
    rng: random.Random,
    iteration: int = 0,
    seed: int = 0,
) -> PseudoLabelSet:
    """Per document: positive = argmax relation probability (ties broken by
    the lowest candidate clause index), negative = one uniform draw from
    the remaining candidates. Single-candidate documents contribute a
    positive only."""
    positives, negatives = [], []
    for doc_id in sorted(scored_by_doc):
        cands = scored_by_doc[doc_id]
        if not cands:
            raise AdaptationError(f"no candidates for document {doc_id!r}")
        best = min(
            cands,
            key=lambda c: (-c.relation_probability, c.candidate_clause_index,
                           c.emotion_clause_index),
        )
        positives.append(best)
        rest = [c for c in cands if c is not best]
        if rest:
            negatives.append(rng.choice(rest))
    return PseudoLabelSet(iteration=iteration, positives=positives,
                          negatives=negatives, seed=seed)


def sample_source_negatives(
    doc: Document, rng: random.Random
) -> list[CandidatePair]:
    """One negative per gold emotion clause: a uniformly drawn pairing with
    a clause that is not a gold cause of that emotion."""
    gold_causes: dict[int, set[int]] = {}
    for e_idx, c_idx, _ in doc.gold_pairs:
        gold_causes.setdefault(e_idx, set()).add(c_idx)
    negatives = []
    for e_idx, c_idx, category in doc.gold_pairs:
        eligible = [
            j for j in range(len(doc.clauses))
            if j not in gold_causes[e_idx]
        ]
        if not eligible:
            log.info("document %s: no eligible non-cause clause for emotion "
                     "clause %d; skipping its negative", doc.doc_id, e_idx)
            continue
        negatives.append(
            CandidatePair(doc.doc_id, e_idx, rng.choice(eligible), category)
        )
    return negatives


def candidate_to_example(
    cand: CandidatePair, doc: Document, vocab: Vocabulary, positive: bool
) -> PairExample:
    return PairExample.build(
        emotion_clause=doc.clauses[cand.emotion_clause_index],
        candidate_clause=doc.clauses[cand.candidate_clause_index],
        vocab=vocab,
        y_emotion=emotion_to_index(cand.emotion_category),
        y_event=1.0 if positive else 0.0,
        y_relation=1.0 if positive else 0.0,
    )


def _fraction_changed(current: Sequence[CandidatePair],
                      previous: Optional[set]) -> float:
    if not current:
        return 0.0
    if previous is None:
        return 1.0
    changed = sum(1 for c in current if c.key not in previous)
    return changed / len(current)


def cd_self_train(
    pair_model: PairVAE,
    docs_with_emotions: Sequence[tuple[Document, list[tuple[int, str]]]],
    vocab: Vocabulary,
    config: RunConfig,
    seed: int,
    max_iter: Optional[int] = None,
    log_sink: Optional[Callable[[IterationRecord], None]] = None,
) -> list[IterationRecord]:
    """From-scratch self-training for relation identification.

    Each iteration scores every candidate with the model as of the start
    of the iteration, rebuilds the pseudo-labeled set (discarding the
    previous one entirely), and fine-tunes for exactly one epoch on it.
    Deterministic given (model state, inputs, seed).
    """
    iterations = config.cd_iterations if max_iter is None else max_iter
    docs_by_id = {doc.doc_id: doc for doc, _ in docs_with_emotions}
    all_candidates: list[CandidatePair] = []
    for doc, emotions in docs_with_emotions:
        all_candidates.extend(build_candidates(doc, emotions))
    if iterations > 0 and not all_candidates:
        raise AdaptationError("no candidate pairs in the target corpus")

    rng = random.Random(seed)
    noise_gen = torch.Generator().manual_seed(seed)
    optimizer = torch.optim.Adam(pair_model.parameters(), lr=config.pair_lr)
    records: list[IterationRecord] = []
    prev_pos: Optional[set] = None
    prev_all: Optional[set] = None

    for it in range(iterations):
        token_ids = [
            vocab.encode(
                ["[CLS]", *docs_by_id[c.doc_id].clauses[c.emotion_clause_index],
                 "[SEP]", *docs_by_id[c.doc_id].clauses[c.candidate_clause_index]]
            )
            for c in all_candidates
        ]
        probs = pair_model.relation_scores(token_ids)
        scored: dict[str, list[CandidatePair]] = {}
        for cand, p in zip(all_candidates, probs.tolist()):
            cand.relation_probability = p
            scored.setdefault(cand.doc_id, []).append(cand)

        pseudo = construct_pseudo_set(scored, rng, iteration=it, seed=seed)

        examples = [
            candidate_to_example(c, docs_by_id[c.doc_id], vocab, positive=True)
            for c in pseudo.positives
        ] + [
            candidate_to_example(c, docs_by_id[c.doc_id], vocab, positive=False)
            for c in pseudo.negatives
        ]
        rng.shuffle(examples)
        for start in range(0, len(examples), config.pair_batch_size):
            pair_model.train_step(
                examples[start:start + config.pair_batch_size],
                optimizer, generator=noise_gen,
            )

        current_all = pseudo.positives + pseudo.negatives
        record = IterationRecord(
            iteration=it,
            n_positives=len(pseudo.positives),
            n_negatives=len(pseudo.negatives),
            changed_positive_fraction=_fraction_changed(pseudo.positives, prev_pos),
            changed_example_fraction=_fraction_changed(current_all, prev_all),
        )
        records.append(record)
        if log_sink is not None:
            log_sink(record)
        prev_pos = {c.key for c in pseudo.positives}
        prev_all = {c.key for c in current_all}
    return records


def emotion_self_train(
    model: EmotionExtractor,
    source_docs: Sequence[Document],
    target_docs: Sequence[Document],
    config: RunConfig,
    threshold: Optional[float] = None,
) -> dict[str, Document]:
    """Threshold-based self-training of the emotion extractor.

    A target document enters the labeled set when its best non-None clause
    probability clears the threshold; exactly that clause receives the
    predicted category, the rest become None. Re-admitted documents
    replace their earlier pseudo-labeled copies. Terminates when the
    labeled set stops growing or the iteration cap is reached. Returns
    the final pseudo-labeled target documents by doc_id.
    """
    if not source_docs:
        raise ConfigError("emotion self-training needs a nonempty source set")
    threshold = config.emotion_threshold if threshold is None else threshold
    if not 0.0 < threshold < 1.0:
        raise ConfigError("confidence threshold must be in (0, 1)")

    optimizer = torch.optim.Adam(model.parameters(), lr=config.emotion_lr)
    pseudo: dict[str, Document] = {}

    def labeled_set() -> list[Document]:
        return list(source_docs) + [
            pseudo[d.doc_id] for d in target_docs if d.doc_id in pseudo
        ]

    for it in range(config.emotion_self_train_max_iters):
        for _ in range(config.self_train_epochs):
            model.train_epoch(labeled_set(), optimizer,
                              batch_size=config.emotion_batch_size)
        grew = False
        for doc in target_docs:
            probs = model.classify_clauses(doc)
            emo_probs = probs[:, 1:]  # drop the None column
            flat_best = torch.argmax(emo_probs)
            clause_idx = int(flat_best // emo_probs.shape[1])
            class_idx = int(flat_best % emo_probs.shape[1]) + 1
            best_p = float(emo_probs[clause_idx, class_idx - 1])
            if best_p < threshold:
                continue
            emotions: list[Optional[str]] = [None] * len(doc.clauses)
            emotions[clause_idx] = EMOTION_CLASSES[class_idx]
            labeled = copy.deepcopy(doc)
            labeled.gold_emotions = emotions
            if doc.doc_id not in pseudo:
                grew = True
            pseudo[doc.doc_id] = labeled
        if not grew:
            break

    # one last pass so the latest pseudo-labels take effect
    if pseudo:
        for _ in range(config.self_train_epochs):
            model.train_epoch(labeled_set(), optimizer,
                              batch_size=config.emotion_batch_size)
    return pseudo
