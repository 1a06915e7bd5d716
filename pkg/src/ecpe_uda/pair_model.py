"""The clause-pair VAE: adapters, variational encoders, BoW decoder,
task heads, and the combined training loss."""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Optional, Sequence

import torch
from torch import nn
from torch.nn import functional as F

from .config import LossWeights, RunConfig
from .corpus import EMOTION_CLASSES, Vocabulary, to_bow
from .divergences import (
    LOG_STD_MAX,
    LOG_STD_MIN,
    DiagonalGaussian,
    KernelSpec,
    hsic_biased,
    mmd_biased_sq,
)
from .errors import ConfigError, DomainError, TrainingError
from .encoders import EmbeddingBagEncoder
from .sparsemax import sparsemax

N_EMOTION_CLASSES = len(EMOTION_CLASSES)  # None + six categories


def build_pair_input(emotion_clause: Sequence[str],
                     candidate_clause: Sequence[str]) -> list[str]:
    """[CLS] + emotion tokens + [SEP] + candidate tokens."""
    if len(emotion_clause) == 0 or len(candidate_clause) == 0:
        raise DomainError("clauses must be nonempty")
    return ["[CLS]", *emotion_clause, "[SEP]", *candidate_clause]


@dataclass
class PairExample:
    """One labeled clause pair ready for the model."""

    token_ids: list[int]
    bow: torch.Tensor
    y_emotion: int           # index into EMOTION_CLASSES
    y_event: float           # 1.0 if the candidate clause is a cause
    y_relation: float        # 1.0 for a gold/pseudo emotion-cause pair

    @classmethod
    def build(cls, emotion_clause, candidate_clause, vocab: Vocabulary,
              y_emotion: int, y_event: float, y_relation: float) -> "PairExample":
        tokens = build_pair_input(emotion_clause, candidate_clause)
        return cls(
            token_ids=vocab.encode(tokens),
            bow=to_bow(tokens, vocab),
            y_emotion=y_emotion,
            y_event=y_event,
            y_relation=y_relation,
        )


@dataclass
class LatentBatch:
    """Reparameterized posteriors and samples for a batch of pairs."""

    mu_e: torch.Tensor
    log_std_e: torch.Tensor
    mu_c: torch.Tensor
    log_std_c: torch.Tensor
    z_e: torch.Tensor
    z_c: torch.Tensor
    noise_e: torch.Tensor
    noise_c: torch.Tensor

    def gaussian_e(self, i: int) -> DiagonalGaussian:
        return DiagonalGaussian(self.mu_e[i], self.log_std_e[i])

    def gaussian_c(self, i: int) -> DiagonalGaussian:
        return DiagonalGaussian(self.mu_c[i], self.log_std_c[i])


@dataclass
class LossBreakdown:
    """Loss components as 0-dim tensors; total is their weighted sum."""

    recon: torch.Tensor
    kl_e: torch.Tensor
    kl_c: torch.Tensor
    ce_emotion: torch.Tensor
    ce_event: torch.Tensor
    ce_relation: torch.Tensor
    regularizer: torch.Tensor
    total: torch.Tensor

    def as_floats(self) -> dict[str, float]:
        return {k: float(getattr(self, k).detach()) for k in (
            "recon", "kl_e", "kl_c", "ce_emotion", "ce_event",
            "ce_relation", "regularizer", "total")}


def _bh_terms(mu_a, log_std_a, mu_b, log_std_b):
    """Vectorized Bhattacharyya distance over broadcastable (..., d) args."""
    s = 0.5 * (torch.exp(2.0 * log_std_a) + torch.exp(2.0 * log_std_b))
    quad = 0.125 * ((mu_a - mu_b) ** 2 / s).sum(dim=-1)
    logdet = 0.5 * (torch.log(s) - log_std_a - log_std_b).sum(dim=-1)
    return quad + logdet


class PairVAE(nn.Module):
    """Disentangling VAE over clause pairs with three task heads."""

    def __init__(
        self,
        vocab_size: int,
        hidden_dim: int = 64,
        latent_dim: int = 24,
        regularizer: str = "mmd",
        reg_weight: float = 1.0,
        kernel_bandwidth="median-heuristic",
        loss_weights: Optional[LossWeights] = None,
        dropout: float = 0.5,
        attend_tokens: bool = False,
    ):
        super().__init__()
        if regularizer not in ("none", "bh", "bh-batch", "mmd", "hsic"):
            raise ConfigError(f"unknown regularizer {regularizer!r}")
        self.vocab_size = vocab_size
        self.hidden_dim = hidden_dim
        self.latent_dim = latent_dim
        self.regularizer = regularizer
        self.reg_weight = reg_weight
        self.kernel = KernelSpec(bandwidth=kernel_bandwidth)
        self.loss_weights = loss_weights or LossWeights()
        self.attend_tokens = attend_tokens

        self.encoder = EmbeddingBagEncoder(vocab_size, hidden_dim)
        self.query_e = nn.Parameter(torch.randn(hidden_dim) * 0.1)
        self.query_c = nn.Parameter(torch.randn(hidden_dim) * 0.1)

        width = 2 * latent_dim
        self.enc_hidden_e = nn.Linear(hidden_dim, width)
        self.enc_hidden_c = nn.Linear(hidden_dim, width)
        self.head_mu_e = nn.Linear(width, latent_dim)
        self.head_log_std_e = nn.Linear(width, latent_dim)
        self.head_mu_c = nn.Linear(width, latent_dim)
        self.head_log_std_c = nn.Linear(width, latent_dim)
        self.drop = nn.Dropout(dropout)

        self.decoder = nn.Linear(2 * latent_dim, vocab_size)
        self.emotion_head = nn.Linear(latent_dim, N_EMOTION_CLASSES)
        self.event_head = nn.Linear(latent_dim, 1)
        self.relation_head = nn.Linear(2 * latent_dim, 1)

    # ----- inference -----------------------------------------------------

    def adapter_attend(self, states: torch.Tensor, query: torch.Tensor) -> torch.Tensor:
        """Sparsemax attention with a learned query over key/value states.

        states: (len, hidden_dim) per-position vectors, or (hidden_dim,)
        for a single pooled vector (which is then returned as-is, since
        the one-element simplex forces weight 1).
        """
        if states.ndim == 1:
            states = states.unsqueeze(0)
        if states.shape[-1] != query.shape[-1]:
            raise DomainError("query/hidden dimension mismatch")
        scores = states @ query / math.sqrt(states.shape[-1])
        weights = sparsemax(scores)
        return weights @ states

    def _hidden_pair(self, token_ids: Sequence[Sequence[int]]):
        """Adapted hidden vectors (h_e, h_c), each (batch, hidden_dim)."""
        if self.attend_tokens:
            h_e_rows, h_c_rows = [], []
            for ids in token_ids:
                states = self.encoder.token_states(list(ids))
                h_e_rows.append(self.adapter_attend(states, self.query_e))
                h_c_rows.append(self.adapter_attend(states, self.query_c))
            return torch.stack(h_e_rows), torch.stack(h_c_rows)
        h = self.encoder.encode(token_ids)
        # single pooled key/value: both adapters reduce to the identity
        return h, h

    def variational_encode(
        self,
        h_e: torch.Tensor,
        h_c: torch.Tensor,
        noise: Optional[torch.Tensor] = None,
        generator: Optional[torch.Generator] = None,
    ) -> LatentBatch:
        """Posteriors and reparameterized samples z = mu + std * eps.

        A fixed ``noise`` tensor (broadcast over the batch) makes the
        computation deterministic and differentiable end to end; dropout
        is expected to be disabled by the caller in that mode.
        """
        he = self.drop(torch.tanh(self.enc_hidden_e(h_e)))
        hc = self.drop(torch.tanh(self.enc_hidden_c(h_c)))
        mu_e = self.head_mu_e(he)
        log_std_e = torch.clamp(self.head_log_std_e(he), LOG_STD_MIN, LOG_STD_MAX)
        mu_c = self.head_mu_c(hc)
        log_std_c = torch.clamp(self.head_log_std_c(hc), LOG_STD_MIN, LOG_STD_MAX)

        shape = mu_e.shape
        if noise is not None:
            eps = torch.as_tensor(noise, dtype=mu_e.dtype).expand(shape)
            eps_e = eps_c = eps
        else:
            eps_e = torch.randn(shape, generator=generator, dtype=mu_e.dtype)
            eps_c = torch.randn(shape, generator=generator, dtype=mu_e.dtype)
        z_e = mu_e + torch.exp(log_std_e) * eps_e
        z_c = mu_c + torch.exp(log_std_c) * eps_c
        return LatentBatch(mu_e, log_std_e, mu_c, log_std_c, z_e, z_c, eps_e, eps_c)

    def encode_pairs(self, token_ids, noise=None, generator=None) -> LatentBatch:
        h_e, h_c = self._hidden_pair(token_ids)
        return self.variational_encode(h_e, h_c, noise=noise, generator=generator)

    # ----- decoder and heads ---------------------------------------------

    def decode_bow_logits(self, z_e: torch.Tensor, z_c: torch.Tensor) -> torch.Tensor:
        return self.decoder(torch.cat([z_e, z_c], dim=-1))

    def decode_bow(self, z_e: torch.Tensor, z_c: torch.Tensor) -> torch.Tensor:
        """Per-word presence probabilities, elementwise sigmoid."""
        return torch.sigmoid(self.decode_bow_logits(z_e, z_c))

    def predict_emotion(self, z_e: torch.Tensor) -> torch.Tensor:
        return torch.softmax(self.emotion_head(z_e), dim=-1)

    def predict_event(self, z_c: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.event_head(z_c)).squeeze(-1)

    def predict_relation(self, z_e: torch.Tensor, z_c: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(
            self.relation_head(torch.cat([z_e, z_c], dim=-1))
        ).squeeze(-1)

    @torch.no_grad()
    def relation_scores(self, token_ids: Sequence[Sequence[int]]) -> torch.Tensor:
        """Deterministic relation probabilities (posterior means, no dropout)."""
        with self._inference_mode():
            lat = self.encode_pairs(token_ids, noise=0.0)
            return self.predict_relation(lat.mu_e, lat.mu_c)

    @torch.no_grad()
    def emotion_scores(self, token_ids: Sequence[Sequence[int]]) -> torch.Tensor:
        with self._inference_mode():
            lat = self.encode_pairs(token_ids, noise=0.0)
            return self.predict_emotion(lat.mu_e)

    @contextmanager
    def _inference_mode(self):
        was_training = self.training
        self.eval()
        try:
            yield
        finally:
            self.train(was_training)

    # ----- loss ----------------------------------------------------------

    def _regularizer_term(self, lat: LatentBatch) -> torch.Tensor:
        zero = torch.zeros((), dtype=lat.mu_e.dtype)
        if self.regularizer == "none":
            return zero
        if self.regularizer == "bh":
            return -_bh_terms(lat.mu_e, lat.log_std_e, lat.mu_c, lat.log_std_c).mean()
        if self.regularizer == "bh-batch":
            dists = _bh_terms(
                lat.mu_e.unsqueeze(1), lat.log_std_e.unsqueeze(1),
                lat.mu_c.unsqueeze(0), lat.log_std_c.unsqueeze(0),
            )
            return -dists.mean()
        if self.regularizer == "mmd":
            return -mmd_biased_sq(lat.z_e, lat.z_c, self.kernel)
        if self.regularizer == "hsic":
            return hsic_biased(lat.z_e, lat.z_c, self.kernel)
        raise ConfigError(f"unknown regularizer {self.regularizer!r}")

    def total_loss(self, batch: Sequence[PairExample], noise=None,
                   generator=None) -> LossBreakdown:
        """Weighted ELBO-derived loss plus the disentanglement term.

        With a fixed ``noise`` the result is a deterministic differentiable
        function of the parameters (dropout disabled), which is what the
        finite-difference gradient check relies on.
        """
        if len(batch) == 0:
            raise DomainError("empty batch")
        if noise is not None and self.training:
            with self._inference_mode():
                return self.total_loss(batch, noise=noise, generator=generator)

        token_ids = [ex.token_ids for ex in batch]
        lat = self.encode_pairs(token_ids, noise=noise, generator=generator)
        dtype = lat.mu_e.dtype

        bow = torch.stack([ex.bow for ex in batch]).to(dtype)
        logits = self.decode_bow_logits(lat.z_e, lat.z_c)
        recon = F.binary_cross_entropy_with_logits(
            logits, bow, reduction="none"
        ).sum(dim=-1).mean()

        def kl(mu, log_std):
            std2 = torch.exp(2.0 * log_std)
            return 0.5 * (mu ** 2 + std2 - 1.0 - 2.0 * log_std).sum(dim=-1).mean()

        kl_e = kl(lat.mu_e, lat.log_std_e)
        kl_c = kl(lat.mu_c, lat.log_std_c)

        y_emotion = torch.tensor([ex.y_emotion for ex in batch], dtype=torch.long)
        y_event = torch.tensor([ex.y_event for ex in batch], dtype=dtype)
        y_relation = torch.tensor([ex.y_relation for ex in batch], dtype=dtype)

        ce_emotion = F.cross_entropy(self.emotion_head(lat.z_e), y_emotion)
        ce_event = F.binary_cross_entropy_with_logits(
            self.event_head(lat.z_c).squeeze(-1), y_event)
        ce_relation = F.binary_cross_entropy_with_logits(
            self.relation_head(torch.cat([lat.z_e, lat.z_c], dim=-1)).squeeze(-1),
            y_relation)

        reg = self._regularizer_term(lat)
        w = self.loss_weights
        total = (
            w.recon * recon
            + w.kl * (kl_e + kl_c)
            + w.emotion * ce_emotion
            + w.event * ce_event
            + w.relation * ce_relation
            + self.reg_weight * reg
        )
        return LossBreakdown(recon, kl_e, kl_c, ce_emotion, ce_event,
                             ce_relation, reg, total)

    def train_step(self, batch, optimizer: torch.optim.Optimizer,
                   noise=None, generator=None) -> LossBreakdown:
        """One optimizer update; raises TrainingError on a non-finite loss,
        naming the first offending component."""
        self.train()
        breakdown = self.total_loss(batch, noise=noise, generator=generator)
        for name, value in breakdown.as_floats().items():
            if not math.isfinite(value):
                raise TrainingError(f"non-finite loss component: {name}")
        optimizer.zero_grad()
        breakdown.total.backward()
        optimizer.step()
        return breakdown

    @classmethod
    def from_config(cls, vocab_size: int, config: RunConfig) -> "PairVAE":
        return cls(
            vocab_size=vocab_size,
            hidden_dim=config.hidden_dim,
            latent_dim=config.latent_dim,
            regularizer=config.regularizer,
            reg_weight=config.reg_weight,
            kernel_bandwidth=config.kernel_bandwidth,
            loss_weights=config.loss_weights,
            dropout=config.dropout,
            attend_tokens=config.attend_tokens,
        )
