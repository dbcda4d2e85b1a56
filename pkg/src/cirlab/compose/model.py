"""The full retrieval model: aggregation + composition behind one module,
with every ablation variant selectable per forward call."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import torch
from torch import nn

from ..aggregate.gat import EntityTokens, GraphAttentionAggregator, aggregate_meanpool
from ..sgparse.graph import SceneGraph, SubjectCentricGraph
from .composer import Composer, ComposerConfig, MlpComposer, pooled_text, pooled_visual
from .encoders import TextFeature


@dataclass(frozen=True)
class ModelVariant:
    """Forward-path switches; the default is the full model."""

    use_scene_graph: bool = True  # off: drop the entity segment from the query sequence
    use_subject_aggregation: bool = True  # off: mean pooling instead of graph attention
    use_entity_guidance: bool = True  # off: one whole-graph mean token as guidance
    use_query_transformer: bool = True  # off: pooled MLP composition

    def label(self) -> str:
        off = []
        if not self.use_scene_graph:
            off.append("no_sg")
        if not self.use_subject_aggregation:
            off.append("no_sc_agg")
        if not self.use_entity_guidance:
            off.append("no_entity_guide")
        if not self.use_query_transformer:
            off.append("no_qformer")
        return "+".join(off) if off else "full"


@dataclass(frozen=True)
class QueryInputs:
    """Frozen per-example features the learnable model consumes."""

    graph: SceneGraph
    subject_graph: SubjectCentricGraph
    text: TextFeature
    ref_visual: torch.Tensor  # (C, D_I)
    whole_graph_token: torch.Tensor  # (D_T,) mean of all graph element vectors


class CompositionModel(nn.Module):
    def __init__(
        self,
        config: ComposerConfig | None = None,
        gat_heads: int = 4,
        gat_layers: int = 1,
        gat_scoring: str = "gatv2",
        seed: int = 0,
    ):
        super().__init__()
        self.config = config or ComposerConfig()
        gen = torch.Generator().manual_seed(seed)
        self.aggregator = GraphAttentionAggregator(
            dim=self.config.text_dim,
            heads=gat_heads,
            layers=gat_layers,
            scoring=gat_scoring,
            generator=gen,
        )
        self.composer = Composer(self.config, generator=gen)
        self.mlp = MlpComposer(self.config, generator=gen)

    def entity_tokens(self, g: SubjectCentricGraph, variant: ModelVariant) -> EntityTokens:
        if variant.use_subject_aggregation:
            return self.aggregator(g)
        return aggregate_meanpool(g)

    def compose_token(self, q: QueryInputs, variant: ModelVariant = ModelVariant()) -> torch.Tensor:
        if not variant.use_query_transformer:
            ent = self.entity_tokens(q.subject_graph, variant)
            guidance = (
                ent.tokens.mean(dim=0) if variant.use_entity_guidance else q.whole_graph_token
            )
            return self.mlp.compose(guidance, pooled_text(q.text), pooled_visual(q.ref_visual))
        if not variant.use_scene_graph:
            return self.composer.compose(None, q.text, q.ref_visual, include_entities=False)
        if not variant.use_entity_guidance:
            return self.composer.compose(q.whole_graph_token.unsqueeze(0), q.text, q.ref_visual)
        return self.composer.compose(self.entity_tokens(q.subject_graph, variant), q.text, q.ref_visual)

    def target_token(self, visual: torch.Tensor, variant: ModelVariant = ModelVariant()) -> torch.Tensor:
        if not variant.use_query_transformer:
            return self.mlp.encode_target(pooled_visual(visual))
        return self.composer.encode_target(visual)

    def signature(self, variant: ModelVariant = ModelVariant(), text_positions: int | None = None) -> dict:
        """Architecture fingerprint echoed into run artifacts."""
        c = self.config
        entity_slots = c.max_entities if (variant.use_query_transformer and variant.use_scene_graph) else 0
        if variant.use_query_transformer and variant.use_scene_graph and not variant.use_entity_guidance:
            entity_slots = c.max_entities  # single guidance row still rides the entity segment
        s = text_positions if text_positions is not None else 0
        return {
            "variant": variant.label(),
            "queries": c.queries,
            "entity_slots": entity_slots,
            "text_positions": s,
            "sequence_capacity": (c.queries + entity_slots + s) if variant.use_query_transformer else 0,
            "dim": c.dim,
            "text_dim": c.text_dim,
            "image_dim": c.image_dim,
            "composer_layers": c.layers,
            "composer_heads": c.heads,
            "gat_heads": self.aggregator.heads,
            "gat_layers": self.aggregator.layers,
            "gat_scoring": self.aggregator.scoring,
        }


CHECKPOINT_VERSION = 1


def save_checkpoint(model: CompositionModel, path) -> None:
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "composer_config": asdict(model.config),
        "aggregator": {
            "heads": model.aggregator.heads,
            "layers": model.aggregator.layers,
            "scoring": model.aggregator.scoring,
        },
        "state_dict": model.state_dict(),
    }
    torch.save(payload, path)


def load_checkpoint(path) -> CompositionModel:
    payload = torch.load(path, weights_only=False)
    version = payload.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint format_version {version!r}")
    model = CompositionModel(
        config=ComposerConfig(**payload["composer_config"]),
        gat_heads=payload["aggregator"]["heads"],
        gat_layers=payload["aggregator"]["layers"],
        gat_scoring=payload["aggregator"]["scoring"],
    )
    model.load_state_dict(payload["state_dict"], strict=True)
    return model
