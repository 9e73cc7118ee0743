"""
Graph nodes: sampled pixels, prototypes and synthesized class representatives.
"""
from dataclasses import dataclass
from enum import IntEnum
from typing import Dict, Iterator, List, Optional, Tuple

import torch

from ..exceptions import InvalidInputError, ShapeMismatchError


class Domain(IntEnum):
    SOURCE = 0
    TARGET = 1


class NodeKind(IntEnum):
    POSITIVE = 0
    NEGATIVE = 1
    PROTOTYPE = 2
    SYNTHESIZED = 3


PIXEL_KINDS = (NodeKind.POSITIVE, NodeKind.NEGATIVE)


@dataclass
class Node:
    feature: torch.Tensor
    class_id: int
    domain: Domain
    kind: NodeKind
    pixel: int = -1


@dataclass
class NodeSet:
    """
    An ordered set of graph nodes stored column-wise.

    Attributes:
        features: (n, d) node features
        classes: (n,) class ids (base ids or the unknown id)
        domains: (n,) Domain codes
        kinds: (n,) NodeKind codes
        pixels: (n,) index of the source pixel, -1 for prototypes and synthesized nodes
    """
    features: torch.Tensor
    classes: torch.Tensor
    domains: torch.Tensor
    kinds: torch.Tensor
    pixels: torch.Tensor

    def __post_init__(self):
        n = self.features.shape[0]
        for name in ("classes", "domains", "kinds", "pixels"):
            if getattr(self, name).shape != (n,):
                raise ShapeMismatchError(
                    f"NodeSet.{name} has shape {tuple(getattr(self, name).shape)}, expected ({n},)"
                )

    @classmethod
    def empty(cls, dim: int, like: Optional[torch.Tensor] = None) -> "NodeSet":
        device = like.device if like is not None else None
        dtype = like.dtype if like is not None else torch.get_default_dtype()
        long = torch.zeros(0, dtype=torch.long, device=device)
        return cls(torch.zeros(0, dim, dtype=dtype, device=device), long, long.clone(), long.clone(), long.clone())

    @classmethod
    def build(
        cls,
        features: torch.Tensor,
        class_id: int,
        domain: Domain,
        kind: NodeKind,
        pixels: Optional[torch.Tensor] = None,
    ) -> "NodeSet":
        """Nodes that share one class, domain and kind."""
        n = features.shape[0]
        device = features.device
        if pixels is None:
            pixels = torch.full((n,), -1, dtype=torch.long, device=device)
        return cls(
            features,
            torch.full((n,), int(class_id), dtype=torch.long, device=device),
            torch.full((n,), int(domain), dtype=torch.long, device=device),
            torch.full((n,), int(kind), dtype=torch.long, device=device),
            pixels.to(device=device, dtype=torch.long),
        )

    @classmethod
    def concat(cls, parts: List["NodeSet"]) -> "NodeSet":
        if not parts:
            raise InvalidInputError("concat needs at least one NodeSet")
        return cls(
            torch.cat([p.features for p in parts]),
            torch.cat([p.classes for p in parts]),
            torch.cat([p.domains for p in parts]),
            torch.cat([p.kinds for p in parts]),
            torch.cat([p.pixels for p in parts]),
        )

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def select(self, index: torch.Tensor) -> "NodeSet":
        """Subset by boolean mask or integer index."""
        return NodeSet(
            self.features[index],
            self.classes[index],
            self.domains[index],
            self.kinds[index],
            self.pixels[index],
        )

    def with_features(self, features: torch.Tensor) -> "NodeSet":
        return NodeSet(features, self.classes, self.domains, self.kinds, self.pixels)

    def domain_mask(self, domain: Domain) -> torch.Tensor:
        return self.domains == int(domain)

    def kind_mask(self, *kinds: NodeKind) -> torch.Tensor:
        mask = torch.zeros_like(self.kinds, dtype=torch.bool)
        for kind in kinds:
            mask |= self.kinds == int(kind)
        return mask

    def pixel_indices(self, class_id: int, kind: NodeKind) -> List[int]:
        mask = (self.classes == class_id) & (self.kinds == int(kind))
        return sorted(int(p) for p in self.pixels[mask].tolist())

    def class_index(self) -> Dict[int, List[int]]:
        """Node positions grouped by class id."""
        index: Dict[int, List[int]] = {}
        for position, class_id in enumerate(self.classes.tolist()):
            index.setdefault(int(class_id), []).append(position)
        return index

    def present_classes(self, domain: Optional[Domain] = None) -> List[int]:
        classes = self.classes if domain is None else self.classes[self.domain_mask(domain)]
        return sorted(set(int(c) for c in classes.tolist()))

    def descriptors(self) -> List[Tuple[int, str, str]]:
        """(class, domain, kind) per node, for dumps and logs."""
        return [
            (int(c), Domain(int(d)).name.lower(), NodeKind(int(k)).name.lower())
            for c, d, k in zip(self.classes.tolist(), self.domains.tolist(), self.kinds.tolist())
        ]

    def __iter__(self) -> Iterator[Node]:
        for i in range(len(self)):
            yield Node(
                feature=self.features[i],
                class_id=int(self.classes[i]),
                domain=Domain(int(self.domains[i])),
                kind=NodeKind(int(self.kinds[i])),
                pixel=int(self.pixels[i]),
            )
