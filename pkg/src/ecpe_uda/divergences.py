"""Divergence estimators between diagonal Gaussians and sample batches.

Everything here is a pure function of its inputs and keeps the autograd
graph alive, so the same code serves both the loss and the test oracles.
Scalar results are returned as 0-dim tensors; call ``.item()`` for floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import torch

from .errors import DomainError

LOG_STD_MIN = -6.0
LOG_STD_MAX = 4.0

MEDIAN_HEURISTIC = "median-heuristic"


def _as_tensor(x, dtype=None) -> torch.Tensor:
    if isinstance(x, torch.Tensor):
        return x if dtype is None else x.to(dtype)
    return torch.as_tensor(x, dtype=dtype or torch.get_default_dtype())


@dataclass
class DiagonalGaussian:
    """A diagonal Gaussian q(Z|.) given by a mean and a log-std vector.

    log_std is clamped to [LOG_STD_MIN, LOG_STD_MAX] at construction so
    std**2 terms stay finite in the divergence formulas.
    """

    mean: torch.Tensor
    log_std: torch.Tensor

    def __post_init__(self):
        self.mean = _as_tensor(self.mean)
        self.log_std = _as_tensor(self.log_std)
        if self.mean.ndim != 1 or self.log_std.ndim != 1:
            raise DomainError("mean and log_std must be 1-d vectors")
        if self.mean.shape != self.log_std.shape:
            raise DomainError(
                f"dimension mismatch: mean has {self.mean.numel()} entries, "
                f"log_std has {self.log_std.numel()}"
            )
        if self.mean.numel() < 1:
            raise DomainError("dimension must be >= 1")
        if not torch.isfinite(self.mean).all() or not torch.isfinite(self.log_std).all():
            raise DomainError("non-finite Gaussian parameters")
        self.log_std = torch.clamp(self.log_std, LOG_STD_MIN, LOG_STD_MAX)

    @property
    def dim(self) -> int:
        return self.mean.numel()

    @property
    def std(self) -> torch.Tensor:
        return torch.exp(self.log_std)

    @classmethod
    def standard(cls, dim: int, dtype=None) -> "DiagonalGaussian":
        """The prior N(0, I)."""
        dtype = dtype or torch.get_default_dtype()
        return cls(torch.zeros(dim, dtype=dtype), torch.zeros(dim, dtype=dtype))


@dataclass
class SampleBatch:
    """A (m, d) matrix of latent samples, one per row."""

    rows: torch.Tensor

    def __post_init__(self):
        self.rows = _as_tensor(self.rows)
        if self.rows.ndim != 2:
            raise DomainError("sample batch must be a 2-d matrix")
        if self.rows.shape[0] < 1:
            raise DomainError("sample batch must contain at least one row")
        if not torch.isfinite(self.rows).all():
            raise DomainError("non-finite sample entries")

    @property
    def m(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]


@dataclass
class KernelSpec:
    """RBF kernel choice: a numeric bandwidth or the median heuristic."""

    kind: str = "rbf"
    bandwidth: Union[float, str] = MEDIAN_HEURISTIC

    def __post_init__(self):
        if self.kind != "rbf":
            raise DomainError(f"unknown kernel kind: {self.kind!r}")
        if isinstance(self.bandwidth, str):
            if self.bandwidth != MEDIAN_HEURISTIC:
                raise DomainError(f"unknown bandwidth marker: {self.bandwidth!r}")
        elif not self.bandwidth > 0:
            raise DomainError("numeric bandwidth must be > 0")


def _rows(x) -> torch.Tensor:
    return x.rows if isinstance(x, SampleBatch) else SampleBatch(_as_tensor(x)).rows


def kl_to_standard_normal(q: DiagonalGaussian) -> torch.Tensor:
    """KL(q || N(0, I)) in closed form: 0.5 * sum(mu^2 + std^2 - 1 - 2*log_std)."""
    std2 = torch.exp(2.0 * q.log_std)
    return 0.5 * torch.sum(q.mean ** 2 + std2 - 1.0 - 2.0 * q.log_std)


def bhattacharyya_diag(a: DiagonalGaussian, b: DiagonalGaussian) -> torch.Tensor:
    """Bhattacharyya distance between two diagonal Gaussians.

    Uses the mixture covariance s_i = (std_a_i^2 + std_b_i^2) / 2:
        1/8 * sum (mu_a - mu_b)^2 / s  +  1/2 * sum [ln s - ln std_a - ln std_b]
    Symmetric in (a, b); zero iff a == b.
    """
    if a.dim != b.dim:
        raise DomainError(f"dimension mismatch: {a.dim} vs {b.dim}")
    s = 0.5 * (torch.exp(2.0 * a.log_std) + torch.exp(2.0 * b.log_std))
    quad = 0.125 * torch.sum((a.mean - b.mean) ** 2 / s)
    logdet = 0.5 * torch.sum(torch.log(s) - a.log_std - b.log_std)
    return quad + logdet


def bh_regularizer(
    pairs: Sequence[tuple[DiagonalGaussian, DiagonalGaussian]],
    mode: str = "within",
) -> torch.Tensor:
    """Negated mean Bhattacharyya distance over a batch of posterior pairs.

    mode="within" averages over the per-instance pairs (E_i, C_i);
    mode="batchwise" averages over all m^2 cross pairs (E_i, C_j).
    The result is <= 0; minimizing it drives the posteriors apart.
    """
    if len(pairs) == 0:
        raise DomainError("empty batch of posterior pairs")
    if mode == "within":
        dists = [bhattacharyya_diag(e, c) for e, c in pairs]
    elif mode == "batchwise":
        dists = [bhattacharyya_diag(e, c) for e, _ in pairs for _, c in pairs]
    else:
        raise DomainError(f"unknown regularizer mode: {mode!r}")
    return -torch.stack(dists).mean()


def _pairwise_sq_dists(x: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    return torch.cdist(x, y, p=2.0) ** 2


def _rbf_gram(x: torch.Tensor, y: torch.Tensor, bandwidth: torch.Tensor) -> torch.Tensor:
    return torch.exp(-_pairwise_sq_dists(x, y) / (2.0 * bandwidth ** 2))


def median_heuristic_bandwidth(x, y) -> torch.Tensor:
    """Median of pairwise Euclidean distances over the pooled samples.

    The even-count median is the interpolated (quantile) midpoint. The
    result stays in the autograd graph when the inputs require grad.
    """
    pooled = torch.cat([_rows(x), _rows(y)], dim=0)
    n = pooled.shape[0]
    if n < 2:
        raise DomainError("median heuristic needs at least 2 pooled samples")
    d = torch.cdist(pooled, pooled, p=2.0)
    iu, ju = torch.triu_indices(n, n, offset=1)
    flat = d[iu, ju]
    med = torch.quantile(flat, 0.5)
    if med.item() <= 0:
        raise DomainError(
            "all pairwise distances are zero; supply a numeric bandwidth"
        )
    return med


def _resolve_bandwidth(x: torch.Tensor, y: torch.Tensor, k: KernelSpec) -> torch.Tensor:
    if isinstance(k.bandwidth, str):
        return median_heuristic_bandwidth(SampleBatch(x), SampleBatch(y))
    return _as_tensor(float(k.bandwidth), dtype=x.dtype)


def mmd_biased_sq(x, y, k: KernelSpec = KernelSpec()) -> torch.Tensor:
    """Biased (V-statistic) squared MMD between two sample batches.

    (1/m^2) sum k(x_i, x_j) + (1/n^2) sum k(y_i, y_j) - (2/mn) sum k(x_i, y_j).
    Always >= 0 and exactly 0 when x == y.
    """
    xr, yr = _rows(x), _rows(y)
    if xr.shape[1] != yr.shape[1]:
        raise DomainError(f"dimension mismatch: {xr.shape[1]} vs {yr.shape[1]}")
    bw = _resolve_bandwidth(xr, yr, k)
    kxx = _rbf_gram(xr, xr, bw).mean()
    kyy = _rbf_gram(yr, yr, bw).mean()
    kxy = _rbf_gram(xr, yr, bw).mean()
    return kxx + kyy - 2.0 * kxy


def hsic_biased(x, y, k: KernelSpec = KernelSpec()) -> torch.Tensor:
    """Biased HSIC estimator: trace(K H L H) / (m - 1)^2.

    K and L are the RBF Gram matrices of x and y; H is the centering
    matrix. Zero for a constant batch; >= 0 up to rounding.
    """
    xr, yr = _rows(x), _rows(y)
    if xr.shape[0] != yr.shape[0]:
        raise DomainError(f"row-count mismatch: {xr.shape[0]} vs {yr.shape[0]}")
    m = xr.shape[0]
    if m < 2:
        raise DomainError("HSIC needs at least 2 rows")

    def gram(rows: torch.Tensor) -> torch.Tensor:
        if isinstance(k.bandwidth, str):
            d = torch.cdist(rows, rows, p=2.0)
            iu, ju = torch.triu_indices(m, m, offset=1)
            flat = d[iu, ju]
            med = torch.quantile(flat, 0.5)
            bw = med if med.item() > 0 else _as_tensor(1.0, dtype=rows.dtype)
        else:
            bw = _as_tensor(float(k.bandwidth), dtype=rows.dtype)
        return _rbf_gram(rows, rows, bw)

    K = gram(xr)
    L = gram(yr)
    H = torch.eye(m, dtype=K.dtype) - torch.full((m, m), 1.0 / m, dtype=K.dtype)
    return torch.trace(K @ H @ L @ H) / float((m - 1) ** 2)
