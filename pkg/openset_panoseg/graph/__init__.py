"""
Graph matching adapter: node sampling, class memory, graph generation and
Sinkhorn-based open-set matching.
"""
from .adapter import DomainInputs, GraphMatchingAdapter, GraphOutput
from .generation import EdgeAffinity, GraphSelfAttention
from .loss import GraphLossTerms, gma_loss, unknown_regularization
from .matching import (
    BilinearAffinity,
    MatchingMatrix,
    affinity,
    instance_normalize,
    matching_labels,
    sinkhorn,
)
from .memory import MemoryBank, MemoryStore, complete_missing_classes, update_memory
from .nodes import Domain, Node, NodeKind, NodeSet
from .sampling import pixel_confidence_entropy, sample_base_nodes, sample_novel_nodes

__all__ = [
    "BilinearAffinity",
    "Domain",
    "DomainInputs",
    "EdgeAffinity",
    "GraphLossTerms",
    "GraphMatchingAdapter",
    "GraphOutput",
    "GraphSelfAttention",
    "MatchingMatrix",
    "MemoryBank",
    "MemoryStore",
    "Node",
    "NodeKind",
    "NodeSet",
    "affinity",
    "complete_missing_classes",
    "gma_loss",
    "instance_normalize",
    "matching_labels",
    "pixel_confidence_entropy",
    "sample_base_nodes",
    "sample_novel_nodes",
    "sinkhorn",
    "unknown_regularization",
    "update_memory",
]
