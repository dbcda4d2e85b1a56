"""Feature preparation: the frozen per-triplet inputs the learnable model
consumes.  Everything here runs once per triplet; training loops only touch
the prepared tensors."""

from __future__ import annotations

from dataclasses import dataclass

import torch

from ..compose.encoders import EncoderBackend
from ..compose.model import QueryInputs
from ..core.types import DatasetManifest, Triplet
from ..sgparse.embed import embed_graph, to_subject_centric, whole_graph_token


@dataclass(frozen=True)
class PreparedExample:
    triplet_id: str
    target_id: str
    query: QueryInputs
    target_visual: torch.Tensor  # (C, D_I)


def prepare_query(text: str, ref_source, parser, encoder: EncoderBackend) -> QueryInputs:
    graph = parser.parse(text)
    table = embed_graph(graph, encoder)
    return QueryInputs(
        graph=graph,
        subject_graph=to_subject_centric(graph, table),
        text=encoder.encode_text(text),
        ref_visual=encoder.encode_image(ref_source),
        whole_graph_token=whole_graph_token(graph, table),
    )


def prepare_example(t: Triplet, parser, encoder: EncoderBackend) -> PreparedExample:
    return PreparedExample(
        triplet_id=t.id,
        target_id=t.target.id,
        query=prepare_query(t.mod_text.text, t.ref.uri, parser, encoder),
        target_visual=encoder.encode_image(t.target.uri),
    )


def prepare_split(
    manifest: DatasetManifest, split: str, parser, encoder: EncoderBackend
) -> list[PreparedExample]:
    return [
        prepare_example(t, parser, encoder)
        for t in manifest.active()
        if t.split == split
    ]
