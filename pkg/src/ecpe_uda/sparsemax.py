"""Sparsemax: Euclidean projection onto the probability simplex."""

from __future__ import annotations

import torch
from torch.autograd import Function

from .errors import DomainError


def _threshold(z_sorted: torch.Tensor) -> torch.Tensor:
    """tau such that sum(max(z - tau, 0)) == 1, from the sorted scores."""
    k = torch.arange(1, z_sorted.shape[-1] + 1, dtype=z_sorted.dtype)
    cssv = torch.cumsum(z_sorted, dim=-1) - 1.0
    support = z_sorted * k > cssv
    k_support = support.to(z_sorted.dtype).sum(dim=-1).long()
    tau = cssv.gather(-1, (k_support - 1).unsqueeze(-1)).squeeze(-1)
    return tau / k_support.to(z_sorted.dtype)


class _SparsemaxFunction(Function):
    @staticmethod
    def forward(ctx, scores: torch.Tensor) -> torch.Tensor:
        z_sorted, _ = torch.sort(scores, dim=-1, descending=True)
        tau = _threshold(z_sorted)
        out = torch.clamp(scores - tau.unsqueeze(-1), min=0.0)
        ctx.save_for_backward(out)
        return out

    @staticmethod
    def backward(ctx, grad_out: torch.Tensor) -> torch.Tensor:
        (out,) = ctx.saved_tensors
        support = (out > 0).to(grad_out.dtype)
        v = (grad_out * support).sum(dim=-1, keepdim=True) / support.sum(
            dim=-1, keepdim=True
        )
        return support * (grad_out - v)


def sparsemax(scores: torch.Tensor) -> torch.Tensor:
    """Project scores onto the simplex along the last dimension.

    Entries are >= 0 and sum to 1; adding a constant to all scores leaves
    the output unchanged. Differentiable (piecewise linear).
    """
    scores = torch.as_tensor(scores, dtype=torch.get_default_dtype()) \
        if not isinstance(scores, torch.Tensor) else scores
    if scores.shape[-1] < 1:
        raise DomainError("sparsemax input must have length >= 1")
    if not torch.isfinite(scores).all():
        raise DomainError("non-finite sparsemax input")
    return _SparsemaxFunction.apply(scores)
