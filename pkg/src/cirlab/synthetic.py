"""Synthetic desk-scale datasets.

Images are colored-shape attribute tuples (color, shape, pattern, size)
encoded as one-hot feature vectors and addressed by ``synthetic://`` URIs,
so every backend derives identical features from the manifest alone.
Modification texts are templated from the attribute diff and mention only
what changes; the reference image supplies the remaining attributes.  By
construction neither the text nor the reference image alone pins down the
target.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from urllib.parse import parse_qsl, urlencode

import numpy as np

from .core.tokenizer import DEFAULT_TOKENIZER, Tokenizer
from .core.types import DatasetManifest, ImageRef, ModText, Triplet

COLORS = ("red", "blue", "green", "yellow", "purple", "orange", "pink", "brown")
SHAPES = ("circle", "square", "triangle", "star", "hexagon", "diamond", "ring", "arrow")
PATTERNS = ("solid", "striped", "dotted", "checkered")
SIZES = ("tiny", "small", "large", "giant")

_SLOTS = (("color", COLORS), ("shape", SHAPES), ("pattern", PATTERNS), ("size", SIZES))

FEATURE_DIM = sum(len(values) for _, values in _SLOTS)

AttrTuple = tuple[str, str, str, str]  # (color, shape, pattern, size)


def synthetic_uri(attrs: AttrTuple) -> str:
    return "synthetic://" + urlencode(
        {name: value for (name, _), value in zip(_SLOTS, attrs)}
    )


def parse_synthetic_uri(uri: str) -> AttrTuple:
    if not uri.startswith("synthetic://"):
        raise ValueError(f"not a synthetic uri: {uri!r}")
    fields = dict(parse_qsl(uri[len("synthetic://") :]))
    out = []
    for name, values in _SLOTS:
        value = fields.get(name)
        if value not in values:
            raise ValueError(f"uri {uri!r} has invalid {name}={value!r}")
        out.append(value)
    return tuple(out)  # type: ignore[return-value]


def synthetic_feature_vector(uri: str) -> np.ndarray:
    """One-hot block per attribute slot, concatenated; dim FEATURE_DIM."""
    attrs = parse_synthetic_uri(uri)
    blocks = []
    for (name, values), value in zip(_SLOTS, attrs):
        block = np.zeros(len(values), dtype=np.float64)
        block[values.index(value)] = 1.0
        blocks.append(block)
    return np.concatenate(blocks)


def modification_text(ref: AttrTuple, tgt: AttrTuple) -> str:
    """Templated clauses describing exactly the changed attribute slots."""
    changed = {name: (r, t) for (name, _), r, t in zip(_SLOTS, ref, tgt) if r != t}
    if not changed:
        raise ValueError("reference and target tuples are identical")
    shape_now = tgt[1] if "shape" in changed else ref[1]
    clauses = []
    if "shape" in changed:
        old, new = changed["shape"]
        clauses.append(f"change the {old} to a {new}")
    if "color" in changed:
        clauses.append(f"the {shape_now} is {changed['color'][1]}")
    if "pattern" in changed:
        clauses.append(f"the {shape_now} has a {changed['pattern'][1]} pattern")
    if "size" in changed:
        clauses.append(f"the {shape_now} is {changed['size'][1]}")
    return ". ".join(clauses) + "."


@dataclass(frozen=True)
class SyntheticSpec:
    n_images: int = 500
    n_train: int = 400
    n_test: int = 100
    test_image_fraction: float = 0.3
    max_changes: int = 2
    subset_size: int = 6
    seed: int = 7


def _all_tuples() -> list[AttrTuple]:
    out = []
    for c in COLORS:
        for s in SHAPES:
            for p in PATTERNS:
                for z in SIZES:
                    out.append((c, s, p, z))
    return out


def _attr_distance(a: AttrTuple, b: AttrTuple) -> int:
    return sum(1 for x, y in zip(a, b) if x != y)


def build_synthetic_dataset(
    spec: SyntheticSpec = SyntheticSpec(), tokenizer: Tokenizer = DEFAULT_TOKENIZER
) -> DatasetManifest:
    """Finalized manifest: `n_images` distinct attribute tuples split into
    train/test image pools, with triplets drawn from pairs differing in one
    or two attributes.  Test triplets carry a hard-negative subset of the
    most target-similar gallery images."""
    rng = random.Random(spec.seed)
    pool = rng.sample(_all_tuples(), spec.n_images)
    n_test_images = int(round(spec.n_images * spec.test_image_fraction))
    test_images = pool[:n_test_images]
    train_images = pool[n_test_images:]

    ids: dict[AttrTuple, str] = {t: f"img{code:04d}" for code, t in enumerate(pool)}

    def refs_for(images: list[AttrTuple], split: str) -> dict[AttrTuple, ImageRef]:
        return {
            t: ImageRef(id=ids[t], uri=synthetic_uri(t), split=split) for t in images
        }

    def candidate_pairs(images: list[AttrTuple]) -> list[tuple[AttrTuple, AttrTuple]]:
        pairs = []
        for i, a in enumerate(images):
            for b in images:
                if a is b:
                    continue
                if 1 <= _attr_distance(a, b) <= spec.max_changes:
                    pairs.append((a, b))
        return pairs

    triplets: list[Triplet] = []

    def build_split(images: list[AttrTuple], split: str, count: int) -> None:
        image_refs = refs_for(images, split)
        pairs = candidate_pairs(images)
        if len(pairs) < count:
            raise ValueError(
                f"split {split!r} has only {len(pairs)} candidate pairs, need {count}"
            )
        chosen = rng.sample(pairs, count)
        # hard-negative subsets draw from the split's target images only, so
        # every member is guaranteed to sit in any evaluation gallery
        split_targets = sorted({tgt for _, tgt in chosen}, key=lambda t: ids[t])
        for k, (ref_t, tgt_t) in enumerate(chosen):
            text = modification_text(ref_t, tgt_t)
            subset = None
            if split == "test":
                ranked = sorted(
                    (t for t in split_targets if t != tgt_t),
                    key=lambda t: (_attr_distance(t, tgt_t), ids[t]),
                )
                members = [tgt_t] + ranked[: spec.subset_size - 1]
                subset = tuple(sorted(ids[t] for t in members))
            triplets.append(
                Triplet(
                    id=f"syn-{split}-{k:04d}",
                    ref=image_refs[ref_t],
                    target=image_refs[tgt_t],
                    mod_text=ModText.from_text(text, tokenizer, grain="fine"),
                    status="finalized",
                    subset_ids=subset,
                )
            )

    build_split(train_images, "train", spec.n_train)
    build_split(test_images, "test", spec.n_test)
    return DatasetManifest(name=f"synthetic-{spec.seed}", triplets=tuple(triplets))
