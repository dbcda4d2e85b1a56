"""Retrieval index, ranking, and the recall metric suite.

Ranking is total and deterministic: descending cosine similarity with ties
broken by ascending id, so every evaluation is reproducible across
platforms.  Recalls are fractions in [0, 1]; report formatting converts to
percentages rounded half-even at 2 decimals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import torch

from ..compose.encoders import normalize


@dataclass(frozen=True)
class GalleryIndex:
    ids: tuple[str, ...]
    tokens: torch.Tensor  # (G, D), unit rows

    def __post_init__(self):
        if len(self.ids) != self.tokens.shape[0]:
            raise ValueError("id list and token matrix disagree on gallery size")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("gallery ids must be unique")
        if self.tokens.numel():
            norms = torch.linalg.vector_norm(self.tokens, dim=1)
            if not torch.allclose(norms, torch.ones_like(norms), atol=1e-6):
                raise ValueError("gallery rows must be unit-normalized")

    @classmethod
    def build(cls, entries: Iterable[tuple[str, torch.Tensor]]) -> "GalleryIndex":
        entries = list(entries)
        if not entries:
            raise ValueError("gallery may not be empty")
        ids = tuple(e[0] for e in entries)
        tokens = torch.stack([normalize(e[1].double()) for e in entries])
        return cls(ids=ids, tokens=tokens)

    @property
    def size(self) -> int:
        return len(self.ids)

    def position(self, image_id: str) -> int:
        return self.ids.index(image_id)


def rank(query: torch.Tensor, index: GalleryIndex) -> list[str]:
    """All gallery ids by descending similarity; ascending id breaks ties."""
    if index.size == 0:
        raise ValueError("cannot rank against an empty gallery")
    if query.shape != (index.tokens.shape[1],):
        raise ValueError(
            f"query dim {tuple(query.shape)} does not match gallery dim {index.tokens.shape[1]}"
        )
    sims = index.tokens @ query.double()
    order = sorted(range(index.size), key=lambda i: (-float(sims[i]), index.ids[i]))
    return [index.ids[i] for i in order]


def rank_of_target(query: torch.Tensor, target_id: str, index: GalleryIndex) -> int:
    """1-based rank of the target under the total order."""
    ordered = rank(query, index)
    try:
        return ordered.index(target_id) + 1
    except ValueError:
        raise ValueError(f"target {target_id!r} is not in the gallery") from None


def recall_at_k(ranks: Sequence[int], k: int) -> float:
    if k < 1:
        raise ValueError("K must be >= 1")
    if any(r < 1 for r in ranks):
        raise ValueError("ranks are 1-based")
    if not ranks:
        return 0.0
    return sum(1 for r in ranks if r <= k) / len(ranks)


def subset_rank(query: torch.Tensor, subset_ids: Sequence[str], target_id: str,
                index: GalleryIndex) -> int:
    """Rank of the target among the subset members only."""
    subset = set(subset_ids)
    if target_id not in subset:
        raise ValueError(f"target {target_id!r} missing from its subset")
    missing = subset - set(index.ids)
    if missing:
        raise ValueError(f"subset members not in gallery: {sorted(missing)}")
    ordered = rank(query, index)
    restricted = [i for i in ordered if i in subset]
    return restricted.index(target_id) + 1


def recall_subset_at_k(query: torch.Tensor, subset_ids: Sequence[str], target_id: str,
                       index: GalleryIndex, k: int) -> int:
    """1 iff the target ranks within K among its subset, else 0."""
    if k < 1:
        raise ValueError("K must be >= 1")
    return int(subset_rank(query, subset_ids, target_id, index) <= k)


def _same_scale(a: float, b: float) -> bool:
    return (a <= 1.0) == (b <= 1.0)


def composite_avg_cirr(r5: float, rsub1: float) -> float:
    """Mean of R@5 and R_subset@1 (the open-domain headline average); both
    inputs must be on the same scale (fractions or percentages)."""
    if not _same_scale(r5, rsub1):
        raise ValueError(f"scale mismatch: {r5} vs {rsub1}")
    return (r5 + rsub1) / 2


def category_avg_fashioniq(dresses: float, shirts: float, topstees: float) -> float:
    """Mean over the three fashion categories."""
    values = (dresses, shirts, topstees)
    if not (_same_scale(values[0], values[1]) and _same_scale(values[0], values[2])):
        raise ValueError(f"scale mismatch among {values}")
    return sum(values) / 3


def round2(x: float) -> float:
    """Round half-even at 2 decimals (table formatting convention)."""
    return round(x, 2)


@dataclass(frozen=True)
class MetricReport:
    query_count: int
    recall_at: dict[int, float] = field(default_factory=dict)
    subset_recall_at: dict[int, float] = field(default_factory=dict)
    composites: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for table in (self.recall_at, self.subset_recall_at):
            for k, v in table.items():
                if not (0.0 <= v <= 1.0):
                    raise ValueError(f"recall@{k} = {v} outside [0, 1]")

    def to_dict(self) -> dict:
        return {
            "query_count": self.query_count,
            "recall_at": {str(k): v for k, v in sorted(self.recall_at.items())},
            "subset_recall_at": {str(k): v for k, v in sorted(self.subset_recall_at.items())},
            "composites": dict(self.composites),
        }

    def percent_table(self) -> str:
        lines = [f"queries: {self.query_count}"]
        for k, v in sorted(self.recall_at.items()):
            lines.append(f"R@{k}: {round2(100 * v):.2f}")
        for k, v in sorted(self.subset_recall_at.items()):
            lines.append(f"R_subset@{k}: {round2(100 * v):.2f}")
        for name, v in self.composites.items():
            lines.append(f"{name}: {round2(100 * v):.2f}")
        return "\n".join(lines)
