"""Pluggable clause/pair encoders.

The trainable embedding-bag encoder is the reference implementation; any
object satisfying :class:`PairEncoder` (e.g. a pretrained transformer
adapter) can be dropped in, as long as it reports a fixed output width
and is deterministic for fixed parameters.
"""

from __future__ import annotations

from typing import Optional, Protocol, Sequence, runtime_checkable

import torch
from torch import nn
from torch.nn import functional as F

from .errors import DomainError


@runtime_checkable
class PairEncoder(Protocol):
    """Maps token-id sequences to hidden vectors of a fixed dimension."""

    hidden_dim: int

    def encode(self, token_ids: Sequence[Sequence[int]]) -> torch.Tensor:
        """Pooled representation, shape (batch, hidden_dim)."""
        ...

    def token_states(self, token_ids: Sequence[int]) -> Optional[torch.Tensor]:
        """Per-position states (len, hidden_dim), or None if unavailable."""
        ...


class EmbeddingBagEncoder(nn.Module):
    """Mean of token embeddings; exposes per-token states for the adapters."""

    def __init__(self, vocab_size: int, hidden_dim: int):
        super().__init__()
        self.hidden_dim = hidden_dim
        self.embedding = nn.Embedding(vocab_size, hidden_dim)

    def encode(self, token_ids: Sequence[Sequence[int]]) -> torch.Tensor:
        if any(len(ids) == 0 for ids in token_ids):
            raise DomainError("cannot encode an empty token sequence")
        device = self.embedding.weight.device
        flat = torch.tensor(
            [i for ids in token_ids for i in ids], dtype=torch.long, device=device
        )
        lengths = [len(ids) for ids in token_ids]
        offsets = torch.tensor(
            [0] + list(torch.cumsum(torch.tensor(lengths), 0)[:-1]),
            dtype=torch.long,
            device=device,
        )
        return F.embedding_bag(flat, self.embedding.weight, offsets, mode="mean")

    def token_states(self, token_ids: Sequence[int]) -> torch.Tensor:
        if len(token_ids) == 0:
            raise DomainError("cannot encode an empty token sequence")
        ids = torch.tensor(token_ids, dtype=torch.long,
                           device=self.embedding.weight.device)
        return self.embedding(ids)
