"""Scene-graph value types: entity/attribute/relation structure parsed from a
modification text, its subject-centric reorganization, and the per-element
token table."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional

import torch

Relation = tuple[int, str, int]


@dataclass(frozen=True)
class SceneGraph:
    """Entities (surface string, index = position), per-entity attribute
    lists, and subject-predicate-object relations over entity indices.
    Duplicate relations and attributes are collapsed at construction."""

    entities: tuple[str, ...]
    attributes: tuple[tuple[str, ...], ...]
    relations: tuple[Relation, ...]
    source_text: str = ""

    def __post_init__(self):
        if len(self.attributes) != len(self.entities):
            raise ValueError("attributes must align with entities")
        for s, p, o in self.relations:
            if not (0 <= s < len(self.entities)) or not (0 <= o < len(self.entities)):
                raise ValueError(f"relation ({s}, {p!r}, {o}) references a missing entity")
        deduped_rel = tuple(dict.fromkeys(self.relations))
        object.__setattr__(self, "relations", deduped_rel)
        object.__setattr__(
            self, "attributes", tuple(tuple(dict.fromkeys(attrs)) for attrs in self.attributes)
        )

    @property
    def entity_count(self) -> int:
        return len(self.entities)

    @property
    def attribute_count(self) -> int:
        return sum(len(a) for a in self.attributes)

    @property
    def relation_count(self) -> int:
        return len(self.relations)

    def is_empty(self) -> bool:
        return not self.entities

    def to_dict(self) -> dict[str, Any]:
        return {
            "entities": list(self.entities),
            "attributes": [list(a) for a in self.attributes],
            "relations": [[s, p, o] for s, p, o in self.relations],
            "source_text": self.source_text,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SceneGraph":
        return cls(
            entities=tuple(d["entities"]),
            attributes=tuple(tuple(a) for a in d["attributes"]),
            relations=tuple((int(s), p, int(o)) for s, p, o in d["relations"]),
            source_text=d.get("source_text", ""),
        )


@dataclass(frozen=True)
class GraphTokenTable:
    """One vector per graph element, keyed by (role, surface) with role in
    {entity, attribute, predicate}, plus the whole-text summary token used
    as the pseudo-subject fallback."""

    vectors: dict[tuple[str, str], torch.Tensor]
    text_token: torch.Tensor
    dim: int

    def __post_init__(self):
        for key, v in self.vectors.items():
            if v.shape != (self.dim,):
                raise ValueError(f"vector for {key} has shape {tuple(v.shape)}, want ({self.dim},)")
            if not torch.isfinite(v).all():
                raise ValueError(f"non-finite vector for {key}")
        if self.text_token.shape != (self.dim,):
            raise ValueError("text_token dimension mismatch")

    def entity(self, surface: str) -> torch.Tensor:
        return self.vectors[("entity", surface)]

    def attribute(self, surface: str) -> torch.Tensor:
        return self.vectors[("attribute", surface)]

    def predicate(self, surface: str) -> torch.Tensor:
        return self.vectors[("predicate", surface)]


@dataclass(frozen=True)
class NeighborToken:
    """One aggregation input: either a subject attribute, or a relation
    object whose vector already carries the predicate (and, for entities
    that own no neighborhood of their own, their folded attributes)."""

    kind: str  # "attribute" | "object"
    surface: str
    vector: torch.Tensor
    predicate: Optional[str] = None
    folded_attributes: tuple[str, ...] = ()

    def source_element_count(self) -> int:
        """How many source-graph elements (attributes/relations) this token
        represents; used by the conservation check."""
        if self.kind == "attribute":
            return 1
        return 1 + len(self.folded_attributes)


@dataclass(frozen=True)
class Subject:
    surface: str
    vector: torch.Tensor
    neighbors: tuple[NeighborToken, ...]


@dataclass(frozen=True)
class SubjectCentricGraph:
    subjects: tuple[Subject, ...]
    pseudo: bool = False  # True when the whole-text fallback subject is used

    @property
    def subject_count(self) -> int:
        return len(self.subjects)

    def neighbor_element_count(self) -> int:
        return sum(n.source_element_count() for s in self.subjects for n in s.neighbors)
