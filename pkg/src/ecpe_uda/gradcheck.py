"""Finite-difference gradient verification of the full training loss."""

from __future__ import annotations

from typing import Optional, Sequence

import torch
from torch.nn.utils import parameters_to_vector, vector_to_parameters

from .config import REGULARIZERS, LossWeights
from .corpus import Vocabulary
from .pair_model import PairExample, PairVAE

TINY_LATENT_DIM = 4
TINY_VOCAB_WORDS = 17  # |V| = 20 with the three specials
TINY_BATCH = 3
TINY_HIDDEN = 8


def tiny_vocab() -> Vocabulary:
    return Vocabulary([f"w{i}" for i in range(TINY_VOCAB_WORDS)])


def _tiny_batch(vocab: Vocabulary, seed: int) -> list[PairExample]:
    import random

    rng = random.Random(seed)
    words = vocab.tokens[3:]
    batch = []
    for i in range(TINY_BATCH):
        emo = rng.sample(words, 3)
        cand = rng.sample(words, 3)
        batch.append(
            PairExample.build(
                emo, cand, vocab,
                y_emotion=rng.randrange(7),
                y_event=float(rng.randrange(2)),
                y_relation=float(rng.randrange(2)),
            )
        )
    return batch


def build_tiny_model(regularizer: str, seed: int = 0) -> PairVAE:
    torch.manual_seed(seed)
    model = PairVAE(
        vocab_size=len(tiny_vocab()),
        hidden_dim=TINY_HIDDEN,
        latent_dim=TINY_LATENT_DIM,
        regularizer=regularizer,
        reg_weight=1.0,
        kernel_bandwidth=1.0,
        loss_weights=LossWeights(),
        dropout=0.0,
        attend_tokens=True,
    )
    return model.double()


def max_relative_gradient_error(
    model: PairVAE,
    batch: Sequence[PairExample],
    noise: torch.Tensor,
    step: float = 1e-5,
) -> float:
    """Compare autograd gradients of total_loss.total against central
    finite differences over every parameter coordinate.

    Per coordinate the error is |a - f| / max(|a|, |f|), falling back to
    the absolute difference when both gradients are below 1e-6.
    """
    model.eval()
    params = [p for p in model.parameters() if p.requires_grad]

    breakdown = model.total_loss(batch, noise=noise)
    analytic = torch.autograd.grad(breakdown.total, params, allow_unused=True)
    analytic = [
        g if g is not None else torch.zeros_like(p)
        for g, p in zip(analytic, params)
    ]
    a_vec = parameters_to_vector(analytic)

    theta = parameters_to_vector(params).detach().clone()

    def loss_at(vec: torch.Tensor) -> float:
        vector_to_parameters(vec, params)
        with torch.no_grad():
            return float(model.total_loss(batch, noise=noise).total)

    fd = torch.zeros_like(theta)
    for i in range(theta.numel()):
        bump = torch.zeros_like(theta)
        bump[i] = step
        fd[i] = (loss_at(theta + bump) - loss_at(theta - bump)) / (2 * step)
    vector_to_parameters(theta, params)

    max_err = 0.0
    for a, f in zip(a_vec.tolist(), fd.tolist()):
        scale = max(abs(a), abs(f))
        err = abs(a - f) / scale if scale > 1e-6 else abs(a - f)
        max_err = max(max_err, err)
    return max_err


def run_gradcheck(
    regularizers: Optional[Sequence[str]] = None,
    step: float = 1e-5,
    seed: int = 0,
) -> dict[str, float]:
    """Max relative gradient error per regularizer on the tiny model."""
    regularizers = regularizers or REGULARIZERS
    vocab = tiny_vocab()
    batch = _tiny_batch(vocab, seed)
    gen = torch.Generator().manual_seed(seed + 1)
    noise = torch.randn(
        (TINY_BATCH, TINY_LATENT_DIM), generator=gen, dtype=torch.float64)
    results = {}
    for reg in regularizers:
        model = build_tiny_model(reg, seed=seed)
        results[reg] = max_relative_gradient_error(model, batch, noise, step)
    return results
