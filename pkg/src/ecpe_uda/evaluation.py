"""Metrics, weighted aggregation, pair prediction, and embedding export."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import torch

from .adaptation import CandidatePair, build_candidates
from .corpus import Document, Vocabulary
from .errors import DomainError
from .pair_model import PairVAE

CSV_HEADER = [
    "task", "source", "target", "precision", "recall", "f1",
    "n_pred", "n_gold", "n_correct", "case",
]

# Weighted-average rows weight each target by its gold count; the choice
# is recorded here and in the report header comment so readers of the CSV
# can reproduce the aggregation.
WEIGHTING_NOTE = "# weighted-average weights: per-target gold counts"


@dataclass
class MetricsReport:
    task: str                 # "EE" or "ECPE"
    source: str
    target: str
    precision: float
    recall: float
    f1: float
    n_pred: int
    n_gold: int
    n_correct: int
    case: str = "all"         # all | normal | self-chain
    breakdown: dict = field(default_factory=dict)

    @classmethod
    def from_counts(cls, task, source, target, n_pred, n_gold, n_correct,
                    case="all") -> "MetricsReport":
        p = n_correct / n_pred if n_pred else 0.0
        r = n_correct / n_gold if n_gold else 0.0
        f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
        return cls(task, source, target, p, r, f1, n_pred, n_gold, n_correct,
                   case=case)

    def row(self) -> list[str]:
        return [
            self.task, self.source, self.target,
            f"{self.precision:.6f}", f"{self.recall:.6f}", f"{self.f1:.6f}",
            str(self.n_pred), str(self.n_gold), str(self.n_correct), self.case,
        ]


def score_ecpe(
    predicted: Sequence[tuple[str, int, int, str]],
    gold: Sequence[tuple[str, int, int, str]],
    source: str = "",
    target: str = "",
) -> MetricsReport:
    """Exact-tuple ECPE scoring over (doc_id, emotion_idx, cause_idx, category).

    A prediction is correct iff it matches a gold tuple, each gold pair
    creditable once. The breakdown splits by normal vs self-chain pairs
    (self-chain: emotion and cause indices coincide).
    """
    def count(preds, golds):
        remaining = {}
        for g in golds:
            remaining[g] = remaining.get(g, 0) + 1
        correct = 0
        for p in preds:
            if remaining.get(p, 0) > 0:
                remaining[p] -= 1
                correct += 1
        return len(preds), len(golds), correct

    report = MetricsReport.from_counts(
        "ECPE", source, target, *count(predicted, gold))
    for case in ("normal", "self-chain"):
        def is_case(t):
            self_chain = t[1] == t[2]
            return self_chain if case == "self-chain" else not self_chain
        sub = count([p for p in predicted if is_case(p)],
                    [g for g in gold if is_case(g)])
        report.breakdown[case] = MetricsReport.from_counts(
            "ECPE", source, target, *sub, case=case)
    return report


def score_ee(
    predicted: Sequence[tuple[str, int, str]],
    gold: Sequence[tuple[str, int, str]],
    source: str = "",
    target: str = "",
) -> MetricsReport:
    """Emotion extraction scoring over (doc_id, clause_idx, category).

    Precision counts over predicted-emotion clauses, recall over gold
    emotion clauses; a clause is correct iff the categories match."""
    gold_set = set(gold)
    correct = sum(1 for p in predicted if p in gold_set)
    return MetricsReport.from_counts(
        "EE", source, target, len(predicted), len(gold), correct)


def weighted_average(reports: Sequence[MetricsReport]) -> MetricsReport:
    """Gold-count-weighted average across target domains.

    Precision and recall are weighted means; F1 is recomputed from them
    so the 2PR/(P+R) identity holds on the emitted row."""
    if not reports:
        raise DomainError("weighted_average needs at least one report")
    total_gold = sum(r.n_gold for r in reports)
    if total_gold == 0:
        raise DomainError("weighted_average: zero total gold count")
    p = sum(r.precision * r.n_gold for r in reports) / total_gold
    r_ = sum(r.recall * r.n_gold for r in reports) / total_gold
    f1 = 2 * p * r_ / (p + r_) if p + r_ > 0 else 0.0
    return MetricsReport(
        task=reports[0].task,
        source=reports[0].source,
        target="weighted-average",
        precision=p,
        recall=r_,
        f1=f1,
        n_pred=sum(r.n_pred for r in reports),
        n_gold=total_gold,
        n_correct=sum(r.n_correct for r in reports),
    )


def predict_pairs(
    pair_model: PairVAE,
    docs_with_emotions: Sequence[tuple[Document, list[tuple[int, str]]]],
    vocab: Vocabulary,
    threshold: float = 0.5,
) -> list[tuple[str, int, int, str]]:
    """Per emotion clause, emit the argmax-probability candidate iff its
    relation probability is >= threshold."""
    predictions = []
    for doc, emotions in docs_with_emotions:
        for e_idx, category in emotions:
            cands = build_candidates(doc, [(e_idx, category)])
            token_ids = [
                vocab.encode(["[CLS]", *doc.clauses[c.emotion_clause_index],
                              "[SEP]", *doc.clauses[c.candidate_clause_index]])
                for c in cands
            ]
            probs = pair_model.relation_scores(token_ids).tolist()
            best_i = min(
                range(len(cands)),
                key=lambda i: (-probs[i], cands[i].candidate_clause_index),
            )
            if probs[best_i] >= threshold:
                predictions.append(
                    (doc.doc_id, e_idx, cands[best_i].candidate_clause_index,
                     category)
                )
    return predictions


def write_report(reports: Sequence[MetricsReport], path) -> None:
    """CSV with a fixed header; breakdown rows follow their parent row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(WEIGHTING_NOTE + "\n")
        writer = csv.writer(f)
        writer.writerow(CSV_HEADER)
        for rep in reports:
            writer.writerow(rep.row())
            for case in ("normal", "self-chain"):
                if case in rep.breakdown:
                    writer.writerow(rep.breakdown[case].row())


def read_report(path) -> list[dict]:
    with open(path, encoding="utf-8") as f:
        lines = [ln for ln in f if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def export_embeddings(
    pair_model: PairVAE,
    docs: Sequence[Document],
    vocab: Vocabulary,
    path,
) -> None:
    """Write posterior means for every gold pair as CSV rows.

    Columns: doc_id, domain, pair_id, vector_kind (mu_e | mu_c), then the
    latent coordinates. Deterministic for a frozen model."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    d = pair_model.latent_dim
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(
            ["doc_id", "domain", "pair_id", "vector_kind"]
            + [f"v{i}" for i in range(d)]
        )
        for doc in docs:
            for e_idx, c_idx, _category in doc.gold_pairs:
                ids = vocab.encode(["[CLS]", *doc.clauses[e_idx],
                                    "[SEP]", *doc.clauses[c_idx]])
                with torch.no_grad(), pair_model._inference_mode():
                    lat = pair_model.encode_pairs([ids], noise=0.0)
                pair_id = f"e{e_idx}_c{c_idx}"
                for kind, vec in (("mu_e", lat.mu_e[0]), ("mu_c", lat.mu_c[0])):
                    writer.writerow(
                        [doc.doc_id, doc.domain, pair_id, kind]
                        + [f"{v:.6f}" for v in vec.tolist()]
                    )
