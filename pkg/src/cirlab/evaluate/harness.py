"""Model evaluation harness: builds the candidate gallery, ranks every query
triplet, and assembles the metric report."""

from __future__ import annotations

from typing import Sequence

import torch

from ..compose.encoders import EncoderBackend
from ..compose.model import CompositionModel, ModelVariant
from ..core.types import DatasetManifest
from ..train.data import PreparedExample
from .metrics import (
    GalleryIndex,
    MetricReport,
    composite_avg_cirr,
    rank_of_target,
    recall_at_k,
    recall_subset_at_k,
)

GALLERY_MODES = ("targets", "all")


def gallery_images(manifest: DatasetManifest, split: str, mode: str = "targets"):
    """Candidate images for a split: its target images, or every image seen
    in the split (both benchmark conventions are expressible)."""
    if mode not in GALLERY_MODES:
        raise ValueError(f"gallery mode must be one of {GALLERY_MODES}")
    seen: dict[str, str] = {}
    for t in manifest.active():
        if t.split != split:
            continue
        if mode == "all":
            seen.setdefault(t.ref.id, t.ref.uri)
        seen.setdefault(t.target.id, t.target.uri)
    return sorted(seen.items())


def model_gallery_index(
    model: CompositionModel,
    images: Sequence[tuple[str, str]],
    encoder: EncoderBackend,
    variant: ModelVariant = ModelVariant(),
) -> GalleryIndex:
    with torch.no_grad():
        entries = [
            (image_id, model.target_token(encoder.encode_image(uri), variant))
            for image_id, uri in images
        ]
    return GalleryIndex.build(entries)


def evaluate_model(
    model: CompositionModel,
    examples: list[PreparedExample],
    index: GalleryIndex,
    ks: Sequence[int] = (1, 5, 10, 50),
    subset_ks: Sequence[int] = (1, 2, 3),
    subsets: dict[str, Sequence[str]] | None = None,
    targets: dict[str, str] | None = None,
    variant: ModelVariant = ModelVariant(),
) -> MetricReport:
    """Rank each example's composed token against the gallery.

    `subsets` maps triplet id -> candidate-subset ids (with the target
    inside) for the hard-negative subset metric; examples without a subset
    contribute only to the full-gallery recalls."""
    if not examples:
        raise ValueError("no queries to evaluate")
    subsets = subsets or {}
    ranks: list[int] = []
    subset_hits: dict[int, list[int]] = {k: [] for k in subset_ks}
    with torch.no_grad():
        for e in examples:
            q = model.compose_token(e.query, variant)
            ranks.append(rank_of_target(q, e.target_id, index))
            subset = subsets.get(e.triplet_id)
            if subset:
                for k in subset_ks:
                    subset_hits[k].append(
                        recall_subset_at_k(q, subset, e.target_id, index, k)
                    )
    recall_at = {k: recall_at_k(ranks, k) for k in ks}
    subset_recall = {
        k: (sum(hits) / len(hits)) for k, hits in subset_hits.items() if hits
    }
    composites = {}
    if 5 in recall_at and 1 in subset_recall:
        composites["avg_r5_rsub1"] = composite_avg_cirr(recall_at[5], subset_recall[1])
    return MetricReport(
        query_count=len(examples),
        recall_at=recall_at,
        subset_recall_at=subset_recall,
        composites=composites,
    )
