"""Graph-element embedding and the subject-centric reorganization that feeds
the aggregator."""

from __future__ import annotations

from typing import Protocol

import torch

from .graph import (
    GraphTokenTable,
    NeighborToken,
    SceneGraph,
    Subject,
    SubjectCentricGraph,
)


class TextSummaryEncoder(Protocol):
    """Minimal contract: a summary (CLS-equivalent) vector per string."""

    text_dim: int

    def summary(self, text: str) -> torch.Tensor: ...


def embed_graph(g: SceneGraph, text_encoder: TextSummaryEncoder) -> GraphTokenTable:
    """One summary vector per entity, attribute, and predicate surface.
    Each element is encoded independently; identical surfaces share a key
    and therefore a vector."""
    vectors: dict[tuple[str, str], torch.Tensor] = {}
    for surface in g.entities:
        vectors[("entity", surface)] = text_encoder.summary(surface)
    for attrs in g.attributes:
        for a in attrs:
            vectors.setdefault(("attribute", a), text_encoder.summary(a))
    for _, pred, _ in g.relations:
        vectors.setdefault(("predicate", pred), text_encoder.summary(pred))
    text_token = text_encoder.summary(g.source_text if g.source_text else "")
    return GraphTokenTable(vectors=vectors, text_token=text_token, dim=text_encoder.text_dim)


def to_subject_centric(g: SceneGraph, table: GraphTokenTable) -> SubjectCentricGraph:
    """Reorganize by subject ownership.

    Subjects are entities that head at least one relation, plus entities in
    no relation at all.  Each subject's neighborhood holds its own
    attributes and, per outgoing relation, an object token equal to object
    vector + predicate vector; attributes of entities that never become
    subjects fold into their object token by addition first.  An object
    reached through several relations folds its attributes into the first
    object token only, so every source attribute and relation lands in
    exactly one neighborhood.  A graph with no subjects degrades to one
    pseudo-subject carrying the whole-text token, so composition always
    receives guidance."""
    n = g.entity_count
    relation_subjects = {s for s, _, _ in g.relations}
    in_any_relation = relation_subjects | {o for _, _, o in g.relations}
    subject_idx = [
        u for u in range(n) if u in relation_subjects or u not in in_any_relation
    ]
    subject_set = set(subject_idx)

    if not subject_idx:
        pseudo = Subject(surface=g.source_text, vector=table.text_token, neighbors=())
        return SubjectCentricGraph(subjects=(pseudo,), pseudo=True)

    folded_objects: set[int] = set()
    subjects: list[Subject] = []
    for u in subject_idx:
        surface = g.entities[u]
        neighbors: list[NeighborToken] = []
        for a in g.attributes[u]:
            neighbors.append(
                NeighborToken(kind="attribute", surface=a, vector=table.attribute(a))
            )
        for s, pred, o in g.relations:
            if s != u:
                continue
            obj_surface = g.entities[o]
            vec = table.entity(obj_surface)
            folded: tuple[str, ...] = ()
            if o not in subject_set and o not in folded_objects:
                folded = g.attributes[o]
                for a in folded:
                    vec = vec + table.attribute(a)
                folded_objects.add(o)
            vec = vec + table.predicate(pred)
            neighbors.append(
                NeighborToken(
                    kind="object",
                    surface=obj_surface,
                    vector=vec,
                    predicate=pred,
                    folded_attributes=folded,
                )
            )
        subjects.append(
            Subject(surface=surface, vector=table.entity(surface), neighbors=tuple(neighbors))
        )
    return SubjectCentricGraph(subjects=tuple(subjects), pseudo=False)


def whole_graph_token(g: SceneGraph, table: GraphTokenTable) -> torch.Tensor:
    """Mean of every element vector in the graph (entities, attributes, and
    predicates); the guidance-free composition variant uses this single
    token instead of the aggregated per-subject tokens."""
    vecs = [table.entity(e) for e in g.entities]
    for attrs in g.attributes:
        vecs.extend(table.attribute(a) for a in attrs)
    vecs.extend(table.predicate(p) for _, p, _ in g.relations)
    if not vecs:
        return table.text_token.clone()
    return torch.stack(vecs).mean(dim=0)
