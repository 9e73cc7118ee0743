"""
Euler-margin attention.

Features are split into (real, imaginary) channel pairs, rewritten as amplitude and
phase, and attention scores are computed with a learnable amplitude scale and an
affine transform of the phase difference. Before decomposition each token's channels
are reordered in descending order through a soft permutation matrix, which pins the
phase of every pair to the half plane s <= r.
"""
import logging
import math
from dataclasses import dataclass
from typing import Literal, Tuple

import torch
import torch.nn as nn

from .exceptions import InvalidInputError, NonFiniteError, ShapeMismatchError

logger = logging.getLogger(__name__)


@dataclass
class PolarPair:
    """Amplitude and phase halves of a feature; both shaped (..., d/2)."""
    amplitude: torch.Tensor
    phase: torch.Tensor

    @property
    def real(self) -> torch.Tensor:
        return self.amplitude * torch.cos(self.phase)

    @property
    def imag(self) -> torch.Tensor:
        return self.amplitude * torch.sin(self.phase)

    def to_features(self) -> torch.Tensor:
        """Interleave back into (..., d) with real parts on even channels."""
        return torch.stack((self.real, self.imag), dim=-1).flatten(-2)


def euler_decompose(v: torch.Tensor) -> PolarPair:
    """
    Split the last dimension into pairs (r, s) = (v[2j], v[2j+1]) and return
    amplitude sqrt(r^2 + s^2) and phase atan2(s, r) in (-pi, pi].

    At the origin the phase is 0 and all gradients are 0.

    Raises:
        InvalidInputError: If the last dimension is odd
    """
    if v.shape[-1] % 2:
        raise InvalidInputError(f"Euler decomposition needs an even feature dimension, got {v.shape[-1]}")
    r = v[..., 0::2]
    s = v[..., 1::2]
    sq = r * r + s * s
    origin = sq == 0
    amplitude = torch.where(origin, torch.zeros_like(sq), torch.sqrt(torch.where(origin, torch.ones_like(sq), sq)))
    phase = torch.atan2(torch.where(origin, torch.zeros_like(s), s), torch.where(origin, torch.ones_like(r), r))
    phase = torch.where(phase == -math.pi, -phase, phase)
    return PolarPair(amplitude=amplitude, phase=phase)


def soft_sort_permutation(v: torch.Tensor, tau: float, hard: bool = False) -> torch.Tensor:
    """
    Relaxed descending-sort permutation of the last dimension.

    P[i, j] = softmax_j(-|sort(v)_i - v_j| / tau). Rows sum to 1 and P @ v
    approaches sort(v) as tau -> 0. With `hard`, the forward pass uses the exact
    permutation and gradients flow through the relaxed matrix.

    Args:
        v: (..., n) values
        tau: Temperature, > 0
        hard: Straight-through hard permutation

    Returns:
        (..., n, n) row-stochastic matrix
    """
    if not tau > 0:
        raise InvalidInputError(f"Sort temperature must be > 0, got {tau}")
    if not torch.isfinite(v).all():
        raise NonFiniteError("soft_sort_permutation received non-finite values")
    values = v.unsqueeze(-1)
    ordered = v.sort(dim=-1, descending=True).values.unsqueeze(-1)
    soft = torch.softmax(-(ordered - values.transpose(-1, -2)).abs() / tau, dim=-1)
    if not hard:
        return soft
    index = soft.argmax(dim=-1, keepdim=True)
    one_hot = torch.zeros_like(soft).scatter_(-1, index, 1.0)
    return one_hot + (soft - soft.detach())


def margin_project(v: torch.Tensor, tau: float, hard: bool = False) -> PolarPair:
    """Reorder channels through the soft sort permutation, then decompose."""
    perm = soft_sort_permutation(v, tau, hard)
    reordered = (perm @ v.unsqueeze(-1)).squeeze(-1)
    return euler_decompose(reordered)


class ModulationParams(nn.Module):
    """
    Per-head amplitude log-scale delta1, phase scale delta2 and phase bias b.

    Initialized at identity modulation (0, 1, 0). A parameter that is not learned is
    kept as a buffer at its identity value.
    """

    def __init__(
        self,
        heads: int,
        learn_amplitude: bool = True,
        learn_scale: bool = True,
        learn_bias: bool = True,
    ):
        super().__init__()
        self.heads = heads
        for name, init, learn in (
            ("delta1", 0.0, learn_amplitude),
            ("delta2", 1.0, learn_scale),
            ("bias", 0.0, learn_bias),
        ):
            value = torch.full((heads,), init)
            if learn:
                self.register_parameter(name, nn.Parameter(value))
            else:
                self.register_buffer(name, value)

    def per_head(self) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """Parameters shaped (heads, 1, 1) for broadcasting against (..., heads, N, N)."""
        return (
            self.delta1.view(-1, 1, 1),
            self.delta2.view(-1, 1, 1),
            self.bias.view(-1, 1, 1),
        )


def modulated_score(q: PolarPair, k: PolarPair, m: ModulationParams) -> torch.Tensor:
    """
    Amplitude- and phase-modulated attention scores.

    score[i, j] = sum_c e^{2 delta1} Aq[i,c] Ak[j,c] cos(delta2 (pq[i,c] - pk[j,c]) + b)

    Args:
        q: PolarPair shaped (..., heads, Nq, c)
        k: PolarPair shaped (..., heads, Nk, c)
        m: Modulation parameters with one entry per head

    Returns:
        (..., heads, Nq, Nk) scores, unscaled
    """
    if q.amplitude.shape[-1] != k.amplitude.shape[-1]:
        raise ShapeMismatchError(
            f"Query half-dimension {q.amplitude.shape[-1]} != key half-dimension {k.amplitude.shape[-1]}"
        )
    if q.amplitude.dim() < 3 or q.amplitude.shape[-3] != m.heads or k.amplitude.shape[-3] != m.heads:
        raise ShapeMismatchError(
            f"Expected a head axis of size {m.heads} at dim -3, got {tuple(q.amplitude.shape)} "
            f"and {tuple(k.amplitude.shape)}"
        )
    delta1, delta2, bias = m.per_head()
    # cos(x - y) = cos x cos y + sin x sin y, with x = delta2*pq + b and y = delta2*pk
    qa = delta2 * q.phase + bias
    ka = delta2 * k.phase
    cos_part = (q.amplitude * torch.cos(qa)) @ (k.amplitude * torch.cos(ka)).transpose(-1, -2)
    sin_part = (q.amplitude * torch.sin(qa)) @ (k.amplitude * torch.sin(ka)).transpose(-1, -2)
    return torch.exp(2.0 * delta1) * (cos_part + sin_part)


class SelfAttention(nn.Module):
    """Multi-head residual self-attention on token sequences (B, N, d)."""

    def __init__(self, dim: int, heads: int):
        super().__init__()
        if dim % heads:
            raise InvalidInputError(f"Feature dimension {dim} is not divisible by {heads} heads")
        self.dim = dim
        self.heads = heads
        self.head_dim = dim // heads
        self.q_proj = nn.Linear(dim, dim, bias=False)
        self.k_proj = nn.Linear(dim, dim, bias=False)
        self.v_proj = nn.Linear(dim, dim, bias=False)

    def _split(self, x: torch.Tensor) -> torch.Tensor:
        b, n, _ = x.shape
        return x.view(b, n, self.heads, self.head_dim).transpose(1, 2)

    def scores(self, q: torch.Tensor, k: torch.Tensor) -> torch.Tensor:
        return q @ k.transpose(-1, -2)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() != 3 or x.shape[-1] != self.dim:
            raise ShapeMismatchError(f"Expected (B, N, {self.dim}) input, got {tuple(x.shape)}")
        q = self._split(self.q_proj(x))
        k = self._split(self.k_proj(x))
        v = self._split(self.v_proj(x))
        attn = torch.softmax(self.scores(q, k) / math.sqrt(self.head_dim), dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(x.shape)
        return x + out


class EulerMarginAttention(SelfAttention):
    """
    Self-attention whose q/k scores go through margin projection and modulation.

    The value path stays real-valued.
    """

    def __init__(
        self,
        dim: int,
        heads: int,
        tau_sort: float = 0.1,
        hard_sort_eval: bool = True,
        use_margin_projection: bool = True,
        learn_amplitude: bool = True,
        learn_scale: bool = True,
        learn_bias: bool = True,
    ):
        if dim % (2 * heads):
            raise InvalidInputError(
                f"Feature dimension {dim} must be divisible by 2*heads = {2 * heads}"
            )
        if not tau_sort > 0:
            raise InvalidInputError(f"tau_sort must be > 0, got {tau_sort}")
        super().__init__(dim, heads)
        self.tau_sort = tau_sort
        self.hard_sort_eval = hard_sort_eval
        self.use_margin_projection = use_margin_projection
        self.modulation = ModulationParams(heads, learn_amplitude, learn_scale, learn_bias)

    def polar(self, x: torch.Tensor) -> PolarPair:
        if not self.use_margin_projection:
            return euler_decompose(x)
        hard = self.hard_sort_eval and not self.training
        return margin_project(x, self.tau_sort, hard)

    def scores(self, q: torch.Tensor, k: torch.Tensor) -> torch.Tensor:
        return modulated_score(self.polar(q), self.polar(k), self.modulation)


def create_attention(
    mode: Literal["euler", "plain"],
    dim: int,
    heads: int,
    **kwargs,
) -> SelfAttention:
    """
    Create an attention block.

    Args:
        mode: "euler" for Euler-margin attention, "plain" for dot-product attention
        dim: Token feature dimension
        heads: Number of heads
        **kwargs: Extra EulerMarginAttention options (ignored for "plain")
    """
    if mode == "euler":
        return EulerMarginAttention(dim, heads, **kwargs)
    elif mode == "plain":
        return SelfAttention(dim, heads)
    else:
        raise InvalidInputError(f"Unknown attention mode: {mode}")
