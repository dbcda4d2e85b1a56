"""Unimodal and sum-fusion baselines over pooled backbone embeddings.  These
double as the pipeline's assessment oracles (text-only / image-only) and the
pretrained-model comparison rows."""

from __future__ import annotations

from ..compose.encoders import EncoderBackend, ImageSource, normalize
from .metrics import GalleryIndex, rank


def gallery_from_images(entries, backend: EncoderBackend) -> GalleryIndex:
    """(id, image source) pairs -> index over pooled image embeddings."""
    return GalleryIndex.build((i, backend.image_vector(src)) for i, src in entries)


def baseline_text_only(text: str, backend: EncoderBackend, index: GalleryIndex) -> list[str]:
    return rank(backend.text_vector(text), index)


def baseline_image_only(ref: ImageSource, backend: EncoderBackend, index: GalleryIndex) -> list[str]:
    return rank(backend.image_vector(ref), index)


def baseline_image_plus_text(
    ref: ImageSource, text: str, backend: EncoderBackend, index: GalleryIndex
) -> list[str]:
    fused = normalize(backend.image_vector(ref) + backend.text_vector(text))
    return rank(fused, index)
