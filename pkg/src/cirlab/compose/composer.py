"""Entity-guided composition: a small query transformer fuses learnable
queries, aggregated entity tokens, and text tokens, cross-attending to the
reference image's visual features; the first query position, unit-normalized,
is the composed token.  The same weights encode target images from their
visual features alone (queries only), so both sides live in one space.
"""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass

import torch
from torch import nn

from ..aggregate.gat import EntityTokens
from .encoders import TextFeature, _normalize


@contextlib.contextmanager
def seeded_init(generator: torch.Generator | None):
    """Make nn.Module construction deterministic when a generator is given:
    submodule init draws from a forked global RNG seeded off the generator."""
    if generator is None:
        yield
        return
    seed = int(torch.randint(0, 2**31 - 1, (1,), generator=generator))
    with torch.random.fork_rng(devices=()):
        torch.manual_seed(seed)
        yield


@dataclass(frozen=True)
class ComposerConfig:
    queries: int = 4  # k
    dim: int = 32  # D, composed/target token width
    text_dim: int = 32  # D_T of incoming entity/text tokens
    image_dim: int = 32  # D_I of incoming visual tokens
    heads: int = 4
    layers: int = 2
    ffn_mult: int = 2
    max_entities: int = 8

    def __post_init__(self):
        if self.queries < 1:
            raise ValueError("need at least one learnable query")
        if self.dim % self.heads != 0:
            raise ValueError("dim must divide evenly into heads")


class _Attention(nn.Module):
    def __init__(self, dim: int, heads: int, dtype: torch.dtype):
        super().__init__()
        self.heads = heads
        self.head_dim = dim // heads
        self.q = nn.Linear(dim, dim, dtype=dtype)
        self.k = nn.Linear(dim, dim, dtype=dtype)
        self.v = nn.Linear(dim, dim, dtype=dtype)
        self.out = nn.Linear(dim, dim, dtype=dtype)

    def forward(self, x: torch.Tensor, context: torch.Tensor, key_mask: torch.Tensor | None) -> torch.Tensor:
        """x: (L, D) queries; context: (M, D) keys/values; key_mask: (M,) bool,
        True where the position is real."""
        L, M = x.shape[0], context.shape[0]
        q = self.q(x).reshape(L, self.heads, self.head_dim)
        k = self.k(context).reshape(M, self.heads, self.head_dim)
        v = self.v(context).reshape(M, self.heads, self.head_dim)
        scores = torch.einsum("lhd,mhd->hlm", q, k) / math.sqrt(self.head_dim)
        if key_mask is not None:
            scores = scores.masked_fill(~key_mask.view(1, 1, M), float("-inf"))
        attn = torch.softmax(scores, dim=-1)
        mixed = torch.einsum("hlm,mhd->lhd", attn, v).reshape(L, -1)
        return self.out(mixed)


class _Block(nn.Module):
    def __init__(self, dim: int, heads: int, ffn_mult: int, dtype: torch.dtype):
        super().__init__()
        self.norm_self = nn.LayerNorm(dim, dtype=dtype)
        self.self_attn = _Attention(dim, heads, dtype)
        self.norm_cross = nn.LayerNorm(dim, dtype=dtype)
        self.cross_attn = _Attention(dim, heads, dtype)
        self.norm_ffn = nn.LayerNorm(dim, dtype=dtype)
        self.ffn = nn.Sequential(
            nn.Linear(dim, ffn_mult * dim, dtype=dtype),
            nn.GELU(),
            nn.Linear(ffn_mult * dim, dim, dtype=dtype),
        )

    def forward(self, x: torch.Tensor, seq_mask: torch.Tensor, visual: torch.Tensor) -> torch.Tensor:
        h = self.norm_self(x)
        x = x + self.self_attn(h, h, seq_mask)
        h = self.norm_cross(x)
        x = x + self.cross_attn(h, visual, None)
        x = x + self.ffn(self.norm_ffn(x))
        return x


class Composer(nn.Module):
    """Query transformer with learnable queries and input projections."""

    def __init__(self, config: ComposerConfig, dtype: torch.dtype = torch.float64,
                 generator: torch.Generator | None = None):
        super().__init__()
        self.config = config
        c = config
        init = torch.randn((c.queries, c.dim), generator=generator, dtype=dtype) / math.sqrt(c.dim)
        self.queries = nn.Parameter(init)
        with seeded_init(generator):
            self.ent_proj = nn.Linear(c.text_dim, c.dim, dtype=dtype)
            self.txt_proj = nn.Linear(c.text_dim, c.dim, dtype=dtype)
            self.vis_proj = nn.Linear(c.image_dim, c.dim, dtype=dtype)
            self.blocks = nn.ModuleList(
                _Block(c.dim, c.heads, c.ffn_mult, dtype) for _ in range(c.layers)
            )
            self.final_norm = nn.LayerNorm(c.dim, dtype=dtype)

    def _run(self, seq: torch.Tensor, seq_mask: torch.Tensor, visual: torch.Tensor) -> torch.Tensor:
        vis = self.vis_proj(visual)
        x = seq
        for block in self.blocks:
            x = block(x, seq_mask, vis)
        return _normalize(self.final_norm(x)[0])

    def build_sequence(
        self,
        entities: EntityTokens | torch.Tensor | None,
        text: TextFeature,
        include_entities: bool = True,
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Concatenated query sequence [queries; entities; text] with its
        padding mask.  Entity rows beyond `max_entities` are truncated; the
        real (unpadded) length is `mask.sum()`."""
        c = self.config
        parts = [self.queries]
        masks = [torch.ones(c.queries, dtype=torch.bool)]
        if include_entities and entities is not None:
            rows = entities.tokens if isinstance(entities, EntityTokens) else entities
            if rows.dim() == 1:
                rows = rows.unsqueeze(0)
            rows = rows[: c.max_entities]
            ent = self.ent_proj(rows)
            pad = c.max_entities - ent.shape[0]
            if pad > 0:
                ent = torch.cat([ent, torch.zeros((pad, c.dim), dtype=ent.dtype)])
            parts.append(ent)
            masks.append(
                torch.cat(
                    [torch.ones(rows.shape[0], dtype=torch.bool), torch.zeros(pad, dtype=torch.bool)]
                )
            )
        parts.append(self.txt_proj(text.tokens))
        masks.append(text.mask.clone())
        return torch.cat(parts), torch.cat(masks)

    def compose(
        self,
        entities: EntityTokens | torch.Tensor | None,
        text: TextFeature,
        visual: torch.Tensor,
        include_entities: bool = True,
    ) -> torch.Tensor:
        """Composed token for a multimodal query.

        `entities=None` or `include_entities=False` drops the entity segment
        entirely (the scene-graph-free variant); passing a raw (n, D_T)
        tensor substitutes alternative guidance tokens (e.g. the pooled
        whole-graph token)."""
        seq, seq_mask = self.build_sequence(entities, text, include_entities)
        if not seq_mask.any():
            raise ValueError("query sequence is entirely padding")
        return self._run(seq, seq_mask, visual)

    def encode_target(self, visual: torch.Tensor) -> torch.Tensor:
        """Target token: queries only, cross-attending to target features."""
        c = self.config
        mask = torch.ones(c.queries, dtype=torch.bool)
        return self._run(self.queries, mask, visual)

    def sequence_capacity(self, include_entities: bool = True) -> int:
        """Padded sequence slots: k (+ max_entities) + S is added by text."""
        c = self.config
        return c.queries + (c.max_entities if include_entities else 0)


class MlpComposer(nn.Module):
    """Composition ablation: pooled entity/text/visual vectors through a
    two-layer feed-forward map; the target side is a linear map of pooled
    target visuals.  Shares nothing with the query transformer."""

    def __init__(self, config: ComposerConfig, dtype: torch.dtype = torch.float64,
                 generator: torch.Generator | None = None):
        super().__init__()
        c = config
        in_dim = c.text_dim + c.text_dim + c.image_dim
        with seeded_init(generator):
            self.hidden = nn.Linear(in_dim, c.dim, dtype=dtype)
            self.out = nn.Linear(c.dim, c.dim, dtype=dtype)
            self.target_head = nn.Linear(c.image_dim, c.dim, dtype=dtype)

    def compose(self, pooled_entities: torch.Tensor, pooled_text: torch.Tensor,
                pooled_visual: torch.Tensor) -> torch.Tensor:
        x = torch.cat([pooled_entities, pooled_text, pooled_visual])
        return _normalize(self.out(torch.relu(self.hidden(x))))

    def encode_target(self, pooled_visual: torch.Tensor) -> torch.Tensor:
        return _normalize(self.target_head(pooled_visual))


def pooled_text(text: TextFeature) -> torch.Tensor:
    if text.mask.any():
        return text.tokens[text.mask].mean(dim=0)
    return text.summary


def pooled_visual(visual: torch.Tensor) -> torch.Tensor:
    return visual.mean(dim=0)


def compose_query(composer: Composer, entities, text: TextFeature, visual: torch.Tensor,
                  include_entities: bool = True) -> torch.Tensor:
    return composer.compose(entities, text, visual, include_entities=include_entities)


def encode_target(composer: Composer, visual: torch.Tensor) -> torch.Tensor:
    return composer.encode_target(visual)


def compose_query_mlp(mlp: MlpComposer, pooled_entities: torch.Tensor,
                      pooled_text_vec: torch.Tensor, pooled_visual_vec: torch.Tensor) -> torch.Tensor:
    return mlp.compose(pooled_entities, pooled_text_vec, pooled_visual_vec)
