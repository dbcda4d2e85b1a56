"""End-to-end pipeline orchestration with a per-stage ledger and review-queue
integration.

Each run starts from the input manifest and processes every triplet from its
current status forward, so resuming after human decisions is just running
again with the same review store: decided items flow through, undecided ones
stay parked with an open review item.  All per-stage work is processed in
triplet-id order, so parallel or repeated runs produce identical artifacts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from ..compose.encoders import EncoderBackend
from ..core.tokenizer import DEFAULT_TOKENIZER, Tokenizer
from ..core.types import DISCARDED, DatasetManifest, ModText, Triplet
from ..evaluate.baselines import gallery_from_images
from ..evaluate.metrics import GalleryIndex
from ..review.store import ReviewStore
from .clients import MllmClient
from .stages import (
    IMAGE_ASSESS_ACTIONS,
    PipelineConfig,
    assess_by_image,
    assess_by_text,
    compress_finemt,
    generate_finemt,
    mllm_pair_check,
    pair_similarity,
    refine_finemt,
    route_by_eval,
)

RETAINED, REVIEW, DISCARD = "retained", "review", "discarded"


@dataclass
class StageRecord:
    stage: str
    entered: int = 0
    retained: int = 0
    review: int = 0
    discarded: int = 0

    def note(self, outcome: str) -> None:
        self.entered += 1
        if outcome == RETAINED:
            self.retained += 1
        elif outcome == REVIEW:
            self.review += 1
        elif outcome == DISCARD:
            self.discarded += 1
        else:
            raise ValueError(f"unknown outcome {outcome!r}")

    def consistent(self) -> bool:
        return self.entered == self.retained + self.review + self.discarded


@dataclass(frozen=True)
class Disposition:
    triplet_id: str
    stage: str
    outcome: str
    rule: str


@dataclass
class StageLedger:
    config: dict[str, Any] = field(default_factory=dict)
    stages: list[StageRecord] = field(default_factory=list)
    dispositions: list[Disposition] = field(default_factory=list)

    def stage(self, name: str) -> StageRecord:
        for rec in self.stages:
            if rec.stage == name:
                return rec
        rec = StageRecord(stage=name)
        self.stages.append(rec)
        return rec

    def note(self, stage: str, triplet_id: str, outcome: str, rule: str) -> None:
        self.stage(stage).note(outcome)
        self.dispositions.append(Disposition(triplet_id, stage, outcome, rule))

    def check(self) -> None:
        for rec in self.stages:
            if not rec.consistent():
                raise AssertionError(
                    f"ledger stage {rec.stage}: entered {rec.entered} != "
                    f"{rec.retained}+{rec.review}+{rec.discarded}"
                )

    def to_records(self) -> list[dict[str, Any]]:
        out: list[dict[str, Any]] = [{"record": "config", **self.config}]
        for rec in self.stages:
            out.append(
                {
                    "record": "stage",
                    "stage": rec.stage,
                    "entered": rec.entered,
                    "retained": rec.retained,
                    "review": rec.review,
                    "discarded": rec.discarded,
                }
            )
        for d in self.dispositions:
            out.append(
                {
                    "record": "disposition",
                    "triplet_id": d.triplet_id,
                    "stage": d.stage,
                    "outcome": d.outcome,
                    "rule": d.rule,
                }
            )
        return out

    def save(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as fh:
            for rec in self.to_records():
                fh.write(json.dumps(rec, sort_keys=True) + "\n")


@dataclass(frozen=True)
class PipelineResult:
    manifest: DatasetManifest
    ledger: StageLedger
    awaiting_review: int


def _with_prov(t: Triplet, key: str, value) -> Triplet:
    prov = dict(t.provenance)
    prov[key] = value
    return replace(t, provenance=prov)


def run_pipeline(
    manifest: DatasetManifest,
    config: PipelineConfig,
    clients: dict[str, MllmClient],
    store: ReviewStore,
    backend: EncoderBackend,
    tokenizer: Tokenizer = DEFAULT_TOKENIZER,
) -> PipelineResult:
    ledger = StageLedger(
        config={
            "similarity_threshold": config.similarity_threshold,
            "token_limit": config.token_limit,
            "fashion_domain": config.fashion_domain,
            "gallery_mode": config.gallery_mode,
            "seed": config.seed,
            "clients": {role: type(c).__name__ for role, c in sorted(clients.items())},
        }
    )
    state: dict[str, Triplet] = {t.id: t for t in manifest.triplets}
    order = sorted(state)

    def live(status: str) -> list[str]:
        return [i for i in order if state[i].status == status]

    if config.run_select:
        _select_stage(state, live, config, clients, store, backend, ledger)
    if config.run_construct:
        _construct_stage(state, live, config, clients, store, tokenizer, ledger)
    if config.run_check:
        _check_stage(state, live, config, clients, store, backend, tokenizer, ledger)

    ledger.check()
    out = manifest.with_triplets(state[i] for i in order)
    awaiting = sum(
        1
        for i in order
        if state[i].status != DISCARDED
        and any(
            item.state == "open" and item.triplet_id == i
            for item in store.items()
        )
    )
    return PipelineResult(manifest=out, ledger=ledger, awaiting_review=awaiting)


def _select_stage(state, live, config, clients, store, backend, ledger) -> None:
    checker = clients["pair_checker"]
    for tid in live("raw"):
        t = state[tid]
        sim = pair_similarity(t, backend)
        if sim >= config.similarity_threshold:
            state[tid] = _with_prov(t.advanced("sampled"), "pair_similarity", sim)
            ledger.note("image_sample", tid, RETAINED, f"cosine {sim:.4f} >= {config.similarity_threshold}")
        else:
            state[tid] = t.discarded("image_sample", f"cosine {sim:.4f} < {config.similarity_threshold}")
            ledger.note("image_sample", tid, DISCARD, "similarity below threshold")

    for tid in live("sampled"):
        t = state[tid]
        ev = t.eval if t.eval is not None else mllm_pair_check(t, checker)
        route = route_by_eval(ev)
        if route == "retain":
            state[tid] = replace(t, eval=ev).advanced("selected")
            ledger.note("pair_check", tid, RETAINED, "three yes answers")
            continue
        if route == "discard":
            state[tid] = replace(t, eval=ev).discarded("pair_check", "one or zero yes answers")
            ledger.note("pair_check", tid, DISCARD, "one or zero yes answers")
            continue
        # exactly two yes answers: a human decides
        decision = store.decision_for("pair_check", tid)
        if decision is None:
            store.get_or_enqueue(
                "pair_check",
                tid,
                {
                    "ref_id": t.ref.id,
                    "target_id": t.target.id,
                    "ref_uri": t.ref.uri,
                    "target_uri": t.target.uri,
                    "text": t.mod_text.text,
                    "answers": list(ev.answers),
                    "rationale": ev.rationale,
                    "suggested_actions": ["retain", "discard"],
                },
            )
            state[tid] = replace(t, eval=ev)
            ledger.note("pair_check", tid, REVIEW, "two yes answers")
        elif decision.verdict == "retain":
            state[tid] = _with_prov(replace(t, eval=ev).advanced("selected"), "pair_check_review", "retain")
            ledger.note("pair_check", tid, RETAINED, "two yes answers; review retained")
        else:
            state[tid] = replace(t, eval=ev).discarded("pair_check", "two yes answers; review discarded")
            ledger.note("pair_check", tid, DISCARD, "two yes answers; review discarded")


def _construct_stage(state, live, config, clients, store, tokenizer, ledger) -> None:
    generator = clients["finemt_generator"]
    refiner = clients["refiner"]
    for tid in live("selected"):
        t = state[tid]
        gen = generate_finemt(t, generator, tokenizer, fashion_domain=config.fashion_domain)
        state[tid] = _with_prov(
            t.advanced("generated", mod_text=gen.mod_text), "generation_branch", gen.branch
        )
        ledger.note("generate", tid, RETAINED, f"{gen.branch} generation")

    for tid in live("generated"):
        t = state[tid]
        result = refine_finemt(t, refiner, tokenizer)
        if result.mod_text is not None:
            state[tid] = _with_prov(
                t.advanced("refined", mod_text=result.mod_text),
                "refinement_removed",
                list(result.removed),
            )
            ledger.note("refine", tid, RETAINED, f"removed {len(result.removed)} sentences")
            continue
        decision = store.decision_for("refine", tid)
        if decision is None:
            store.get_or_enqueue(
                "refine",
                tid,
                {
                    "ref_id": t.ref.id,
                    "target_id": t.target.id,
                    "ref_uri": t.ref.uri,
                    "target_uri": t.target.uri,
                    "text": t.mod_text.text,
                    "removed_sentences": list(result.removed),
                    "suggested_actions": ["retain", "edit", "discard"],
                },
            )
            ledger.note("refine", tid, REVIEW, "refinement removed every sentence")
        elif decision.verdict == "retain":
            state[tid] = t.advanced("refined")
            ledger.note("refine", tid, RETAINED, "review retained original text")
        elif decision.verdict == "edit":
            new_text = ModText.from_text(decision.edited_text, tokenizer, grain="fine")
            state[tid] = t.advanced("refined", mod_text=new_text)
            ledger.note("refine", tid, RETAINED, "review supplied edited text")
        else:
            state[tid] = t.discarded("refine", "review discarded after refinement emptied text")
            ledger.note("refine", tid, DISCARD, "review discarded")


def _split_galleries(state: dict[str, Triplet], backend, mode: str) -> dict[str, GalleryIndex]:
    """Per-split candidate index over the split's (active) target images."""
    per_split: dict[str, dict[str, str]] = {}
    for t in state.values():
        if t.status == DISCARDED:
            continue
        images = per_split.setdefault(t.split, {})
        if mode == "all":
            images.setdefault(t.ref.id, t.ref.uri)
        images.setdefault(t.target.id, t.target.uri)
    return {
        split: gallery_from_images(sorted(images.items()), backend)
        for split, images in per_split.items()
    }


def _check_stage(state, live, config, clients, store, backend, tokenizer, ledger) -> None:
    compressor = clients["compressor"]
    galleries = _split_galleries(state, backend, config.gallery_mode)

    survivors: list[str] = []
    for tid in live("refined"):
        t = state[tid]
        result = assess_by_text(t, backend, galleries[t.split])
        if not result.flagged:
            survivors.append(tid)
            ledger.note("assess_text", tid, RETAINED, f"text-only rank {result.target_rank}")
            continue
        decision = store.decision_for("assess_text", tid)
        if decision is None:
            store.get_or_enqueue(
                "assess_text",
                tid,
                {
                    "ref_id": t.ref.id,
                    "target_id": t.target.id,
                    "ref_uri": t.ref.uri,
                    "target_uri": t.target.uri,
                    "text": t.mod_text.text,
                    "target_rank": result.target_rank,
                    "suggested_actions": list(result.suggested_actions),
                },
            )
            ledger.note("assess_text", tid, REVIEW, "text-only rank 1")
        elif decision.verdict == "retain":
            survivors.append(tid)
            ledger.note("assess_text", tid, RETAINED, "review retained")
        elif decision.verdict == "edit":
            state[tid] = _with_prov(
                replace(t, mod_text=ModText.from_text(decision.edited_text, tokenizer, grain="fine")),
                "assess_text_review",
                "edit",
            )
            survivors.append(tid)
            ledger.note("assess_text", tid, RETAINED, "review refined over-detailed text")
        else:
            state[tid] = t.discarded("assess_text", "review discarded (excessive difference)")
            ledger.note("assess_text", tid, DISCARD, "review discarded")

    assessed: list[str] = []
    for tid in survivors:
        t = state[tid]
        result = assess_by_image(t, backend, galleries[t.split])
        if not result.flagged:
            assessed.append(tid)
            ledger.note("assess_image", tid, RETAINED, f"image-only rank {result.target_rank}")
            continue
        decision = store.decision_for("assess_image", tid)
        if decision is None:
            store.get_or_enqueue(
                "assess_image",
                tid,
                {
                    "ref_id": t.ref.id,
                    "target_id": t.target.id,
                    "ref_uri": t.ref.uri,
                    "target_uri": t.target.uri,
                    "text": t.mod_text.text,
                    "target_rank": result.target_rank,
                    "suggested_actions": list(IMAGE_ASSESS_ACTIONS),
                },
            )
            ledger.note("assess_image", tid, REVIEW, "image-only rank 1")
        elif decision.verdict == "retain":
            assessed.append(tid)
            ledger.note("assess_image", tid, RETAINED, "review retained")
        elif decision.verdict == "edit":
            state[tid] = replace(
                t, mod_text=ModText.from_text(decision.edited_text, tokenizer, grain="fine")
            )
            assessed.append(tid)
            ledger.note("assess_image", tid, RETAINED, "review edited text")
        else:
            state[tid] = t.discarded("assess_image", "review discarded (reference alone suffices)")
            ledger.note("assess_image", tid, DISCARD, "review discarded")

    for tid in assessed:
        state[tid] = state[tid].advanced("assessed")

    for tid in live("assessed"):
        t = state[tid]
        result = compress_finemt(t.mod_text, tokenizer, compressor, limit=config.token_limit)
        if result.outcome in ("unchanged", "compressed"):
            state[tid] = _with_prov(
                t.advanced("finalized", mod_text=result.mod_text), "compression", result.outcome
            )
            ledger.note("compress", tid, RETAINED, result.outcome)
            continue
        decision = store.decision_for("compress", tid)
        if decision is None:
            store.get_or_enqueue(
                "compress",
                tid,
                {
                    "ref_id": t.ref.id,
                    "target_id": t.target.id,
                    "ref_uri": t.ref.uri,
                    "target_uri": t.target.uri,
                    "text": result.mod_text.text,
                    "token_count": result.mod_text.token_count,
                    "limit": config.token_limit,
                    "suggested_actions": ["edit", "discard"],
                },
            )
            ledger.note("compress", tid, REVIEW, "still over the token limit after compression")
        elif decision.verdict == "edit":
            new_text = ModText.from_text(decision.edited_text, tokenizer, grain="fine")
            state[tid] = _with_prov(
                t.advanced("finalized", mod_text=new_text), "compression", "manual-edit"
            )
            ledger.note("compress", tid, RETAINED, "review supplied edited text")
        else:
            state[tid] = t.discarded("compress", "review discarded over-length text")
            ledger.note("compress", tid, DISCARD, "review discarded")
