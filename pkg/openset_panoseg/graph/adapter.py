"""
Graph matching adapter: ties sampling, memory, completion, graph generation and
matching into one module driven by the training step.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional

import torch
import torch.nn as nn

from ..config import TrainConfig
from ..models import IGNORE_ID
from .generation import EdgeAffinity, GraphSelfAttention
from .loss import GraphLossTerms, gma_loss
from .matching import BilinearAffinity, MatchingMatrix, matching_labels, sinkhorn
from .memory import MemoryBank, MemoryStore, complete_missing_classes, node_class_sets, update_memory
from .nodes import PIXEL_KINDS, Domain, NodeSet
from .sampling import sample_base_nodes, sample_novel_nodes

logger = logging.getLogger(__name__)


@dataclass
class DomainInputs:
    """Flattened per-pixel inputs of one domain at feature resolution."""
    features: torch.Tensor      # (N, d)
    labels: torch.Tensor        # (N,) ground truth (source) or pseudo-labels (target)
    confidence: torch.Tensor    # (N,)
    entropy: torch.Tensor       # (N,)
    predicted: torch.Tensor     # (N,) argmax over all channels


@dataclass
class GraphOutput:
    loss: GraphLossTerms
    matching: MatchingMatrix
    labels: torch.Tensor
    xi_source: torch.Tensor
    xi_target: torch.Tensor
    source_nodes: NodeSet
    target_nodes: NodeSet
    source_bank: MemoryBank
    target_bank: MemoryBank
    edges: EdgeAffinity
    skipped_completions: List[int] = field(default_factory=list)


class GraphMatchingAdapter(nn.Module):
    """
    Builds the source/target node graph for one step and scores it.

    Memory updates are returned in the output, not applied; `commit` writes them once
    the step is accepted.
    """

    def __init__(
        self,
        dim: int,
        num_base: int,
        nodes_per_class: int = 8,
        sinkhorn_iters: int = 20,
        heads: int = 1,
        dropout: float = 0.1,
        alpha_mem: float = 0.99,
        beta: float = 0.1,
        prototype_noise: float = 0.1,
        match_all_kinds: bool = True,
        edge_loss_dropout: bool = True,
        use_match_loss: bool = True,
        use_edge_loss: bool = True,
        use_unknown_loss: bool = True,
    ):
        super().__init__()
        self.dim = dim
        self.num_base = num_base
        self.unknown_id = num_base
        self.nodes_per_class = nodes_per_class
        self.sinkhorn_iters = sinkhorn_iters
        self.alpha_mem = alpha_mem
        self.beta = beta
        self.prototype_noise = prototype_noise
        self.match_all_kinds = match_all_kinds
        self.edge_loss_dropout = edge_loss_dropout
        self.use_match_loss = use_match_loss
        self.use_edge_loss = use_edge_loss
        self.use_unknown_loss = use_unknown_loss

        self.graph_attention = GraphSelfAttention(dim, heads, dropout)
        self.affinity = BilinearAffinity(dim)
        self.source_memory = MemoryStore(num_base + 1, dim)
        self.target_memory = MemoryStore(num_base + 1, dim)

    @classmethod
    def from_config(cls, config: TrainConfig, num_base: int) -> "GraphMatchingAdapter":
        return cls(
            dim=config.feature_dim,
            num_base=num_base,
            nodes_per_class=config.nodes_per_class,
            sinkhorn_iters=config.sinkhorn_iters,
            heads=config.graph_heads,
            dropout=config.graph_dropout,
            alpha_mem=config.alpha_mem,
            beta=config.beta,
            prototype_noise=config.prototype_noise,
            match_all_kinds=config.match_all_kinds,
            edge_loss_dropout=config.edge_loss_dropout,
            use_match_loss=config.use_match_loss,
            use_edge_loss=config.use_edge_loss,
            use_unknown_loss=config.use_unknown_loss,
        )

    def sample(self, inputs: DomainInputs, domain: Domain, generator: Optional[torch.Generator]) -> NodeSet:
        """Base-class nodes from labels, then unknown nodes by the entropy criterion."""
        parts = [sample_base_nodes(
            inputs.features, inputs.labels, inputs.confidence, inputs.entropy,
            self.nodes_per_class, self.num_base, domain, self.prototype_noise, generator,
        )]

        valid = inputs.labels != IGNORE_ID
        candidates = valid & (inputs.labels == self.unknown_id)
        if int(candidates.sum()) < 2:
            candidates = valid & (inputs.predicted == self.unknown_id)
        if int(candidates.sum()) < 2:
            candidates = valid
        index = torch.nonzero(candidates).flatten()
        if index.numel() >= 2:
            parts.append(sample_novel_nodes(
                inputs.features[index], inputs.entropy[index], self.nodes_per_class,
                self.unknown_id, domain, self.prototype_noise, generator, pixels=index,
            ))
        return NodeSet.concat(parts)

    def forward(
        self,
        source: DomainInputs,
        target: DomainInputs,
        generator: Optional[torch.Generator] = None,
    ) -> Optional[GraphOutput]:
        """
        Run the graph branch for one step.

        Returns:
            GraphOutput, or None when a domain yields no nodes at all
        """
        source_nodes = self.sample(source, Domain.SOURCE, generator)
        target_nodes = self.sample(target, Domain.TARGET, generator)
        if len(source_nodes) == 0 or len(target_nodes) == 0:
            logger.warning(
                "Graph branch skipped: %d source and %d target nodes", len(source_nodes), len(target_nodes)
            )
            return None

        source_bank = update_memory(self.source_memory.bank, node_class_sets(source_nodes), self.alpha_mem)
        target_bank = update_memory(self.target_memory.bank, node_class_sets(target_nodes), self.alpha_mem)

        expected = range(self.num_base + 1)
        source_nodes, skipped_s = complete_missing_classes(
            source_nodes, source_bank, target_bank, Domain.SOURCE, expected, generator,
        )
        target_nodes, skipped_t = complete_missing_classes(
            target_nodes, target_bank, source_bank, Domain.TARGET, expected, generator,
        )

        joint, edges = self.graph_attention(NodeSet.concat([source_nodes, target_nodes]))
        is_source = joint.domain_mask(Domain.SOURCE)
        graph_s = joint.select(is_source)
        graph_t = joint.select(~is_source)
        index_s = torch.nonzero(is_source).flatten()
        index_t = torch.nonzero(~is_source).flatten()

        matching = sinkhorn(self.affinity(graph_s.features, graph_t.features), self.sinkhorn_iters)
        labels = matching_labels(graph_s.classes, graph_t.classes, self.unknown_id).to(matching.matrix.dtype)
        xi_s = edges.restrict(index_s, apply_dropout=self.edge_loss_dropout)
        xi_t = edges.restrict(index_t, apply_dropout=self.edge_loss_dropout)

        mask = None
        if not self.match_all_kinds:
            mask = graph_s.kind_mask(*PIXEL_KINDS).unsqueeze(1) & graph_t.kind_mask(*PIXEL_KINDS).unsqueeze(0)

        loss = gma_loss(
            matching.matrix, labels, xi_s, xi_t, graph_s, graph_t, self.unknown_id, self.beta,
            match_mask=mask,
            use_match=self.use_match_loss,
            use_edge=self.use_edge_loss,
            use_unknown=self.use_unknown_loss,
        )
        return GraphOutput(
            loss=loss,
            matching=matching,
            labels=labels,
            xi_source=xi_s,
            xi_target=xi_t,
            source_nodes=graph_s,
            target_nodes=graph_t,
            source_bank=source_bank,
            target_bank=target_bank,
            edges=edges,
            skipped_completions=skipped_s + skipped_t,
        )

    def commit(self, output: GraphOutput) -> None:
        """Write the memory updates of an accepted step."""
        self.source_memory.commit(output.source_bank)
        self.target_memory.commit(output.target_bank)
