"""The individual pipeline operations: similarity sampling, pair checking and
routing, prompt assembly, text generation/refinement, unimodal assessment,
and length compression."""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..compose.encoders import EncoderBackend
from ..core.tokenizer import DEFAULT_TOKENIZER, Tokenizer
from ..core.types import EvalRecord, ModText, Triplet
from ..evaluate.metrics import GalleryIndex, rank_of_target
from .clients import MllmClient, ReplyParseError, split_sentences
from .prompts import (
    COMPRESS,
    FINE_PROMPT,
    FINE_PROMPT_FASHION,
    PAIR_CHECK,
    REFINE,
    get_template,
)


@dataclass(frozen=True)
class PipelineConfig:
    similarity_threshold: float = 0.5
    token_limit: int = 77
    fashion_domain: bool = False
    gallery_mode: str = "targets"
    seed: int = 0
    run_select: bool = True
    run_construct: bool = True
    run_check: bool = True

    def __post_init__(self):
        if not (0.0 <= self.similarity_threshold <= 1.0):
            raise ValueError("similarity_threshold must lie in [0, 1]")
        if self.token_limit < 1:
            raise ValueError("token_limit must be >= 1")


def pair_similarity(t: Triplet, backend: EncoderBackend) -> float:
    ref = backend.image_vector(t.ref.uri)
    tgt = backend.image_vector(t.target.uri)
    return float(ref @ tgt)


def image_sample(
    triplets: list[Triplet], backend: EncoderBackend, threshold: float
) -> tuple[list[Triplet], list[Triplet]]:
    """Keep pairs whose pooled-embedding cosine reaches the threshold."""
    retained, discarded = [], []
    for t in triplets:
        if pair_similarity(t, backend) >= threshold:
            retained.append(t)
        else:
            discarded.append(t)
    return retained, discarded


_YES_NO = re.compile(r"\b(yes|no)\b", re.IGNORECASE)


def parse_pair_check_reply(reply: str) -> tuple[bool, bool, bool]:
    hits = _YES_NO.findall(reply)
    if len(hits) != 3:
        raise ReplyParseError(f"expected exactly 3 yes/no answers, found {len(hits)}", reply)
    return tuple(h.lower() == "yes" for h in hits)  # type: ignore[return-value]


def mllm_pair_check(t: Triplet, client: MllmClient) -> EvalRecord:
    """Ask the checker the three pair questions; unparseable replies raise,
    they are never guessed."""
    prompt = get_template(PAIR_CHECK).render(img1=t.ref.uri, img2=t.target.uri)
    reply = client.invoke(PAIR_CHECK, {"ref_id": t.ref.id, "target_id": t.target.id, "prompt": prompt})
    answers = parse_pair_check_reply(reply)
    return EvalRecord(answers=answers, rationale=reply)


def route_by_eval(e: EvalRecord) -> str:
    """3 yes -> retain, exactly 2 -> review, otherwise discard."""
    if e.yes_count == 3:
        return "retain"
    if e.yes_count == 2:
        return "review"
    return "discard"


def format_eval(e: EvalRecord) -> str:
    answers = ", ".join("Yes" if a else "No" for a in e.answers)
    return f"<{answers}>" if not e.rationale else f"<{answers}> ({e.rationale})"


def build_fine_prompt(t: Triplet, e: EvalRecord, fashion_domain: bool = False) -> str:
    template = get_template(FINE_PROMPT_FASHION if fashion_domain else FINE_PROMPT)
    return template.render(img1=t.ref.uri, img2=t.target.uri, eval=format_eval(e))


@dataclass(frozen=True)
class GenerationResult:
    mod_text: ModText
    branch: str  # "multi-perspective" | "conservative"


def generate_finemt(
    t: Triplet,
    client: MllmClient,
    tokenizer: Tokenizer = DEFAULT_TOKENIZER,
    fashion_domain: bool = False,
) -> GenerationResult:
    if t.eval is None or t.eval.yes_count < 2:
        raise ValueError(f"triplet {t.id} was not routed to generation (eval={t.eval})")
    prompt = build_fine_prompt(t, t.eval, fashion_domain)
    reply = client.invoke(
        FINE_PROMPT_FASHION if fashion_domain else FINE_PROMPT,
        {
            "ref_id": t.ref.id,
            "target_id": t.target.id,
            "yes_count": t.eval.yes_count,
            "prompt": prompt,
        },
    )
    if not reply.strip():
        raise ReplyParseError("generator produced empty text", reply)
    branch = "multi-perspective" if t.eval.yes_count == 3 else "conservative"
    return GenerationResult(mod_text=ModText.from_text(reply.strip(), tokenizer, grain="fine"), branch=branch)


@dataclass(frozen=True)
class RefinementResult:
    mod_text: ModText | None  # None when refinement removed everything
    removed: tuple[str, ...]


def refine_finemt(
    t: Triplet, client: MllmClient, tokenizer: Tokenizer = DEFAULT_TOKENIZER
) -> RefinementResult:
    """Drop sentences the refiner flags as unsupported by the reference
    image; emptied texts are reported back for review, never silently
    discarded."""
    prompt = get_template(REFINE).render(img1=t.ref.uri, text=t.mod_text.text)
    reply = client.invoke(
        REFINE,
        {"ref_id": t.ref.id, "text": t.mod_text.text, "prompt": prompt},
    )
    before = split_sentences(t.mod_text.text)
    after = split_sentences(reply)
    kept = set(after)
    removed = tuple(s for s in before if s not in kept)
    if not after:
        return RefinementResult(mod_text=None, removed=removed)
    return RefinementResult(
        mod_text=ModText.from_text(reply.strip(), tokenizer, grain="fine"), removed=removed
    )


@dataclass(frozen=True)
class AssessResult:
    flagged: bool
    target_rank: int
    suggested_actions: tuple[str, ...] = ()


TEXT_ASSESS_ACTIONS = ("refine-overly-detailed-text", "discard-excessive-difference")
IMAGE_ASSESS_ACTIONS = ("retain", "discard")


def assess_by_text(t: Triplet, backend: EncoderBackend, index: GalleryIndex) -> AssessResult:
    """Flag the triplet when the text alone already retrieves its target at
    rank 1 (the text is doing all the work)."""
    r = rank_of_target(backend.text_vector(t.mod_text.text), t.target.id, index)
    return AssessResult(flagged=r == 1, target_rank=r,
                        suggested_actions=TEXT_ASSESS_ACTIONS if r == 1 else ())


def assess_by_image(t: Triplet, backend: EncoderBackend, index: GalleryIndex) -> AssessResult:
    """Flag the triplet when the reference image alone retrieves the target
    at rank 1 (the text adds nothing)."""
    r = rank_of_target(backend.image_vector(t.ref.uri), t.target.id, index)
    return AssessResult(flagged=r == 1, target_rank=r,
                        suggested_actions=IMAGE_ASSESS_ACTIONS if r == 1 else ())


@dataclass(frozen=True)
class CompressionResult:
    mod_text: ModText
    outcome: str  # "unchanged" | "compressed" | "needs_review"


def compress_finemt(
    mod_text: ModText,
    tokenizer: Tokenizer,
    client: MllmClient,
    limit: int = 77,
) -> CompressionResult:
    """Texts within the limit pass through; longer ones go to the compressor
    and, if still over the limit, to manual editing."""
    if mod_text.token_count <= limit:
        return CompressionResult(mod_text=mod_text, outcome="unchanged")
    prompt = get_template(COMPRESS).render(text=mod_text.text, limit=str(limit))
    reply = client.invoke(COMPRESS, {"text": mod_text.text, "limit": limit, "prompt": prompt})
    compressed = ModText.from_text(reply.strip(), tokenizer, grain="fine")
    if compressed.token_count > limit:
        return CompressionResult(mod_text=compressed, outcome="needs_review")
    return CompressionResult(mod_text=compressed, outcome="compressed")
