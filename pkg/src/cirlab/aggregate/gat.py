"""Subject-centric aggregation: per-subject graph attention over the self
token and its neighborhood tokens, producing one entity token per subject.

Each subject forms an independent star (self + neighbors), so aggregation
is exactly a masked single-hop attention per subject; perturbing one
subject's neighbor can never leak into another row.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from ..sgparse.graph import SubjectCentricGraph

SCORINGS = ("gatv2", "gat")


@dataclass(frozen=True)
class EntityTokens:
    """Aggregated tokens, one row per subject, aligned with `subjects`."""

    tokens: torch.Tensor  # (E, D_T)
    subjects: tuple[str, ...]

    def __post_init__(self):
        if self.tokens.dim() != 2 or self.tokens.shape[0] != len(self.subjects):
            raise ValueError(
                f"tokens shape {tuple(self.tokens.shape)} does not match {len(self.subjects)} subjects"
            )
        if not torch.isfinite(self.tokens).all():
            raise ValueError("non-finite entity tokens")

    @property
    def count(self) -> int:
        return len(self.subjects)


class GraphAttentionAggregator(nn.Module):
    """Multi-head additive attention over {self} ∪ neighborhood per subject.

    Scoring is leaky-rectified additive attention, either applying the
    attention vector after the nonlinearity ("gatv2", default) or inside a
    per-side dot product ("gat").  Head outputs pass through ELU, are
    concatenated, and projected back to the token width.  With more than
    one layer, each layer re-attends over the unchanged neighborhood using
    the updated subject token.
    """

    def __init__(
        self,
        dim: int,
        heads: int = 4,
        layers: int = 1,
        scoring: str = "gatv2",
        negative_slope: float = 0.2,
        dtype: torch.dtype = torch.float64,
        generator: torch.Generator | None = None,
    ):
        super().__init__()
        if layers < 1 or heads < 1:
            raise ValueError("layers and heads must be positive")
        if scoring not in SCORINGS:
            raise ValueError(f"scoring must be one of {SCORINGS}")
        self.dim = dim
        self.heads = heads
        self.layers = layers
        self.scoring = scoring
        self.negative_slope = negative_slope

        def init(*shape):
            scale = 1.0 / (dim ** 0.5)
            return nn.Parameter(torch.randn(*shape, generator=generator, dtype=dtype) * scale)

        self.proj = nn.ParameterList(init(heads, dim, dim) for _ in range(layers))
        self.out_proj = nn.ParameterList(init(dim, heads * dim) for _ in range(layers))
        if scoring == "gatv2":
            self.attn = nn.ParameterList(init(heads, dim) for _ in range(layers))
        else:
            self.attn_src = nn.ParameterList(init(heads, dim) for _ in range(layers))
            self.attn_dst = nn.ParameterList(init(heads, dim) for _ in range(layers))

    def _scores(self, layer: int, k: torch.Tensor) -> torch.Tensor:
        """k: (m, heads, dim) projected tokens, row 0 = self.  -> (m, heads)"""
        leaky = nn.functional.leaky_relu
        if self.scoring == "gatv2":
            combined = leaky(k[0].unsqueeze(0) + k, self.negative_slope)
            return (combined * self.attn[layer]).sum(dim=-1)
        src = (k[0] * self.attn_src[layer]).sum(dim=-1)  # (heads,)
        dst = (k * self.attn_dst[layer]).sum(dim=-1)  # (m, heads)
        return leaky(src.unsqueeze(0) + dst, self.negative_slope)

    def subject_forward(
        self, self_vec: torch.Tensor, neighbor_vecs: list[torch.Tensor], return_attention: bool = False
    ):
        """Aggregate one subject.  Returns (D_T,) or (output, [per-layer (m, heads) attention])."""
        attn_trace = []
        current = self_vec
        for layer in range(self.layers):
            stacked = torch.stack([current] + list(neighbor_vecs))  # (m, dim)
            k = torch.einsum("hij,mj->mhi", self.proj[layer], stacked)
            scores = self._scores(layer, k)  # (m, heads)
            alpha = torch.softmax(scores, dim=0)
            if return_attention:
                attn_trace.append(alpha.detach())
            agg = torch.einsum("mh,mhi->hi", alpha, k)  # (heads, dim)
            concat = nn.functional.elu(agg).reshape(-1)  # (heads*dim,)
            current = self.out_proj[layer] @ concat
        if return_attention:
            return current, attn_trace
        return current

    def forward(self, g: SubjectCentricGraph) -> EntityTokens:
        rows = []
        for s in g.subjects:
            if s.vector.shape != (self.dim,):
                raise ValueError(
                    f"subject {s.surface!r} has dim {tuple(s.vector.shape)}, aggregator wants ({self.dim},)"
                )
            for nb in s.neighbors:
                if nb.vector.shape != (self.dim,):
                    raise ValueError(f"neighbor {nb.surface!r} of {s.surface!r} has wrong dim")
            rows.append(self.subject_forward(s.vector, [nb.vector for nb in s.neighbors]))
        tokens = torch.stack(rows) if rows else torch.zeros((0, self.dim), dtype=torch.float64)
        return EntityTokens(tokens=tokens, subjects=tuple(s.surface for s in g.subjects))

    def attention_weights(self, g: SubjectCentricGraph) -> list[list[torch.Tensor]]:
        """Per subject, per layer: the (m, heads) softmax weights."""
        out = []
        for s in g.subjects:
            _, trace = self.subject_forward(
                s.vector, [nb.vector for nb in s.neighbors], return_attention=True
            )
            out.append(trace)
        return out


def aggregate(g: SubjectCentricGraph, params: GraphAttentionAggregator) -> EntityTokens:
    return params(g)


def aggregate_meanpool(g: SubjectCentricGraph) -> EntityTokens:
    """Ablation arm: unweighted mean of self + neighborhood per subject."""
    rows = []
    for s in g.subjects:
        vecs = [s.vector] + [nb.vector for nb in s.neighbors]
        rows.append(torch.stack(vecs).mean(dim=0))
    if not rows:
        raise ValueError("graph has no subjects")
    return EntityTokens(tokens=torch.stack(rows), subjects=tuple(s.surface for s in g.subjects))
