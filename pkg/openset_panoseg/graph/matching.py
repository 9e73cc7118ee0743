"""
Open-set graph matching: learnable affinity, Sinkhorn normalization, matching labels.
"""
from dataclasses import dataclass

import torch
import torch.nn as nn

from ..exceptions import InvalidInputError, NonFiniteError, ShapeMismatchError

STD_EPS = 1e-12


@dataclass
class MatchingMatrix:
    """Sinkhorn-normalized source x target correspondence."""
    matrix: torch.Tensor
    iterations: int

    @property
    def shape(self):
        return self.matrix.shape


def affinity(source: torch.Tensor, target: torch.Tensor, weight: torch.Tensor) -> torch.Tensor:
    """Bilinear affinity source @ weight @ target^T, shape (n_s, n_t)."""
    if source.dim() != 2 or target.dim() != 2:
        raise ShapeMismatchError(f"Expected 2-D node features, got {tuple(source.shape)} and {tuple(target.shape)}")
    d = source.shape[1]
    if target.shape[1] != d or weight.shape != (d, d):
        raise ShapeMismatchError(
            f"Affinity dimensions disagree: source d={d}, target d={target.shape[1]}, "
            f"weight {tuple(weight.shape)}"
        )
    return source @ weight @ target.transpose(0, 1)


class BilinearAffinity(nn.Module):
    """Learnable affinity phi(Vs, Vt) = Vs W Vt^T, W initialized to the identity."""

    def __init__(self, dim: int):
        super().__init__()
        self.weight = nn.Parameter(torch.eye(dim))

    def forward(self, source: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
        return affinity(source, target, self.weight)


def instance_normalize(raw: torch.Tensor) -> torch.Tensor:
    """Standardize over all entries; a constant matrix maps to zeros."""
    mean = raw.mean()
    std = raw.std(unbiased=False) if raw.numel() > 1 else torch.zeros_like(mean)
    degenerate = std <= STD_EPS
    return torch.where(degenerate, torch.zeros_like(raw), (raw - mean) / torch.where(degenerate, torch.ones_like(std), std))


def sinkhorn(raw: torch.Tensor, iters: int = 20) -> MatchingMatrix:
    """
    Sinkhorn(InstNorm(raw)).

    The standardized scores are exponentiated, then each round normalizes columns and
    then rows, so the result is exactly row-stochastic. Square inputs converge to
    doubly stochastic matrices; rectangular ones to column sums n_s / n_t.

    Raises:
        InvalidInputError: If iters < 1 or raw is not 2-D and nonempty
        NonFiniteError: If raw contains NaN or Inf
    """
    if iters < 1:
        raise InvalidInputError(f"Sinkhorn needs at least one iteration, got {iters}")
    if raw.dim() != 2 or raw.numel() == 0:
        raise InvalidInputError(f"Sinkhorn needs a nonempty 2-D matrix, got shape {tuple(raw.shape)}")
    if not torch.isfinite(raw).all():
        raise NonFiniteError("Sinkhorn received a non-finite affinity matrix")
    matrix = torch.exp(instance_normalize(raw))
    for _ in range(iters):
        matrix = matrix / matrix.sum(dim=0, keepdim=True)
        matrix = matrix / matrix.sum(dim=1, keepdim=True)
    return MatchingMatrix(matrix=matrix, iterations=iters)


def matching_labels(classes_s: torch.Tensor, classes_t: torch.Tensor, unknown_id: int) -> torch.Tensor:
    """M[i, j] = 1 iff classes_s[i] == classes_t[j] and neither is the unknown id."""
    same = classes_s.unsqueeze(1) == classes_t.unsqueeze(0)
    known = (classes_s != unknown_id).unsqueeze(1) & (classes_t != unknown_id).unsqueeze(0)
    return (same & known).to(torch.get_default_dtype())
