from .baselines import (
    baseline_image_only,
    baseline_image_plus_text,
    baseline_text_only,
    gallery_from_images,
)
from .harness import GALLERY_MODES, evaluate_model, gallery_images, model_gallery_index
from .metrics import (
    GalleryIndex,
    MetricReport,
    category_avg_fashioniq,
    composite_avg_cirr,
    rank,
    rank_of_target,
    recall_at_k,
    recall_subset_at_k,
    round2,
    subset_rank,
)

__all__ = [
    "baseline_image_only",
    "baseline_image_plus_text",
    "baseline_text_only",
    "gallery_from_images",
    "GALLERY_MODES",
    "evaluate_model",
    "gallery_images",
    "model_gallery_index",
    "GalleryIndex",
    "MetricReport",
    "category_avg_fashioniq",
    "composite_avg_cirr",
    "rank",
    "rank_of_target",
    "recall_at_k",
    "recall_subset_at_k",
    "round2",
    "subset_rank",
]
