"""
Graph generation: residual self-attention over the joint node set and edge affinities.
"""
import math
from dataclasses import dataclass
from typing import Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..exceptions import InvalidInputError, ShapeMismatchError
from .nodes import NodeSet


@dataclass
class EdgeAffinity:
    """
    Node-to-node edge structure.

    Attributes:
        logits: (heads, n, n) unscaled q.k products
        matrix: (n, n) head-averaged row softmax, dropout applied when training
        dropout: Dropout rate
        training: Whether dropout is active
    """
    logits: torch.Tensor
    matrix: torch.Tensor
    dropout: float
    training: bool

    def restrict(self, index: torch.Tensor, apply_dropout: bool = True) -> torch.Tensor:
        """Row-stochastic affinity among a subset of nodes (e.g. one domain)."""
        sub = self.logits[:, index][:, :, index]
        xi = torch.softmax(sub, dim=-1).mean(dim=0)
        if apply_dropout:
            xi = F.dropout(xi, p=self.dropout, training=self.training)
        return xi


class GraphSelfAttention(nn.Module):
    """
    S <- softmax(S Wq (S Wk)^T / sqrt(d_k)) (S Wv) + S over all nodes of both domains.

    The edge affinity uses the same q.k product without the 1/sqrt(d_k) scale.
    """

    def __init__(self, dim: int, heads: int = 1, dropout: float = 0.1):
        super().__init__()
        if dim % heads:
            raise InvalidInputError(f"Node dimension {dim} is not divisible by {heads} heads")
        if not 0.0 <= dropout < 1.0:
            raise InvalidInputError(f"Dropout must lie in [0, 1), got {dropout}")
        self.dim = dim
        self.heads = heads
        self.head_dim = dim // heads
        self.dropout = dropout
        self.q_proj = nn.Linear(dim, dim, bias=False)
        self.k_proj = nn.Linear(dim, dim, bias=False)
        self.v_proj = nn.Linear(dim, dim, bias=False)

    def forward(self, nodes: NodeSet) -> Tuple[NodeSet, EdgeAffinity]:
        if len(nodes) == 0:
            raise InvalidInputError("Graph self-attention needs a nonempty node set")
        x = nodes.features
        if x.shape[1] != self.dim:
            raise ShapeMismatchError(f"Node features have dimension {x.shape[1]}, expected {self.dim}")
        n = x.shape[0]
        q = self.q_proj(x).view(n, self.heads, self.head_dim).transpose(0, 1)
        k = self.k_proj(x).view(n, self.heads, self.head_dim).transpose(0, 1)
        v = self.v_proj(x).view(n, self.heads, self.head_dim).transpose(0, 1)

        logits = q @ k.transpose(-1, -2)
        attn = torch.softmax(logits / math.sqrt(self.head_dim), dim=-1)
        updated = (attn @ v).transpose(0, 1).reshape(n, self.dim) + x

        xi = F.dropout(torch.softmax(logits, dim=-1).mean(dim=0), p=self.dropout, training=self.training)
        edges = EdgeAffinity(logits=logits, matrix=xi, dropout=self.dropout, training=self.training)
        return nodes.with_features(updated), edges
