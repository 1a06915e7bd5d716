"""Document-level emotion extraction: clause encoding, clause-context
bidirectional recurrence, and a seven-way per-clause classifier."""

from __future__ import annotations

import math
from typing import Optional, Sequence

import torch
from torch import nn
from torch.nn import functional as F

from .config import RunConfig
from .corpus import EMOTION_CLASSES, Document, Vocabulary, emotion_to_index
from .encoders import EmbeddingBagEncoder
from .errors import DomainError, TrainingError

N_CLASSES = len(EMOTION_CLASSES)


class EmotionExtractor(nn.Module):
    """Clause encoder + bidirectional LSTM over the clause sequence +
    softmax classifier. Boundary recurrence states are zero vectors, so a
    one-clause document is well-defined."""

    def __init__(self, vocab: Vocabulary, hidden_dim: int = 64,
                 lstm_hidden: int = 100, dropout: float = 0.5):
        super().__init__()
        self.vocab = vocab
        self.encoder = EmbeddingBagEncoder(len(vocab), hidden_dim)
        self.lstm = nn.LSTM(hidden_dim, lstm_hidden, bidirectional=True,
                            batch_first=True)
        self.drop = nn.Dropout(dropout)
        self.classifier = nn.Linear(2 * lstm_hidden, N_CLASSES)
        self.lstm_hidden = lstm_hidden

    def encode_document(self, doc: Document) -> torch.Tensor:
        """Context-aware clause representations a_i = [forward_i; backward_i],
        shape (n_clauses, 2 * lstm_hidden)."""
        if len(doc.clauses) == 0:
            raise DomainError("empty document")
        clause_vecs = self.encoder.encode(
            [self.vocab.encode(c) for c in doc.clauses])  # (n, hidden)
        out, _ = self.lstm(clause_vecs.unsqueeze(0))
        return out.squeeze(0)

    def clause_logits(self, doc: Document) -> torch.Tensor:
        reprs = self.drop(self.encode_document(doc))
        return self.classifier(reprs)

    def classify_clauses(self, doc: Document) -> torch.Tensor:
        """Per-clause probability rows over the seven classes (eval mode)."""
        was_training = self.training
        self.eval()
        try:
            with torch.no_grad():
                return torch.softmax(self.clause_logits(doc), dim=-1)
        finally:
            self.train(was_training)

    def ee_loss(self, docs: Sequence[Document]) -> torch.Tensor:
        """Mean per-clause categorical cross-entropy over the batch."""
        logits, labels = [], []
        for doc in docs:
            if doc.gold_emotions is None:
                raise DomainError(f"document {doc.doc_id!r} has no emotion labels")
            logits.append(self.clause_logits(doc))
            labels.extend(emotion_to_index(e) for e in doc.gold_emotions)
        return F.cross_entropy(
            torch.cat(logits, dim=0),
            torch.tensor(labels, dtype=torch.long),
        )

    def train_epoch(self, docs: Sequence[Document],
                    optimizer: torch.optim.Optimizer,
                    batch_size: int = 4) -> float:
        """One pass over the documents in order; returns the mean loss."""
        self.train()
        losses = []
        for start in range(0, len(docs), batch_size):
            batch = docs[start:start + batch_size]
            loss = self.ee_loss(batch)
            value = float(loss.detach())
            if not math.isfinite(value):
                raise TrainingError("non-finite emotion extraction loss")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            losses.append(value)
        return sum(losses) / len(losses)

    @classmethod
    def from_config(cls, vocab: Vocabulary, config: RunConfig) -> "EmotionExtractor":
        return cls(vocab=vocab, hidden_dim=config.hidden_dim,
                   lstm_hidden=config.lstm_hidden, dropout=config.dropout)


def predict_document_emotions(model: EmotionExtractor, doc: Document):
    """(clause_index, category, probability) for each clause whose argmax is
    a real emotion (not None), plus the best-emotion summary used by
    self-training thresholds."""
    probs = model.classify_clauses(doc)
    predictions = []
    for i, row in enumerate(probs):
        k = int(torch.argmax(row))
        if k != 0:
            predictions.append((i, EMOTION_CLASSES[k], float(row[k])))
    return predictions, probs
