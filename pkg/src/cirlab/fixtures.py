"""Engineered pipeline fixture: a small raw manifest whose routing, review
queues, and resume behavior are fully designed.

Mock behavior is a pure function of ids, so the builder searches id suffixes
until the pair checker yields the wanted yes-counts.  Image vectors use a
twin construction: active triplets come in pairs whose targets share a
cluster direction and whose references point 0.95 toward the twin's target,
so a reference's nearest gallery image is the twin's target, never its own
(no accidental unimodal flags), while its own-pair cosine stays above the
sampling threshold.  Three extra triplets enter mid-pipeline at ``refined``
to exercise the text-assess, image-assess, and compression review points.

The builder verifies the whole design with dry pipeline runs, including a
scripted decide-and-resume pass, bumping a salt and rebuilding if a hash
collision breaks an invariant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .compose.encoders import EncoderDims, ToyEncoderBackend
from .core.tokenizer import DEFAULT_TOKENIZER, Tokenizer
from .core.types import DatasetManifest, ImageRef, ModText, Triplet
from .pipeline.clients import MockPairChecker, mock_clients
from .pipeline.runner import run_pipeline
from .pipeline.stages import PipelineConfig
from .review.store import LogicalClock, ReviewStore

FIXTURE_DIMS = EncoderDims(channels=4, image_dim=32, seq_len=16, text_dim=32, vector_dim=16)


@dataclass(frozen=True)
class FixtureDesign:
    total: int = 20
    low_similarity: int = 2  # discarded at image sampling
    three_yes: int = 8  # retained by the pair check
    two_yes: int = 5  # parked for review at the pair check
    low_yes: int = 2  # discarded by the pair check
    compress_review_id: str = "fx-compress"
    text_flag_id: str = "fx-textflag"
    image_flag_id: str = "fx-imageflag"
    resume_pair_id: str = "fx-review0"  # the pair-check item the resume script retains
    compress_edit_text: str = "the table is small."

    @property
    def checked(self) -> int:
        return self.three_yes + self.two_yes + self.low_yes

    def expected_open_queues(self) -> dict[str, int]:
        return {
            "pair_check": self.two_yes,
            "refine": 0,
            "assess_text": 1,
            "assess_image": 1,
            "compress": 1,
        }

    def resume_script(self) -> list[tuple[str, str, str, str | None]]:
        """(stage, triplet_id, verdict, edited_text) decisions whose resume
        run must finalize all four triplets."""
        return [
            ("pair_check", self.resume_pair_id, "retain", None),
            ("assess_text", self.text_flag_id, "retain", None),
            ("assess_image", self.image_flag_id, "retain", None),
            ("compress", self.compress_review_id, "edit", self.compress_edit_text),
        ]


def _vec_uri(v: np.ndarray) -> str:
    return "vec://" + ",".join(repr(float(x)) for x in v)


def _unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def _mix(a: np.ndarray, cos_a: float, rng: np.random.Generator) -> np.ndarray:
    """Unit vector with exact cosine `cos_a` against unit vector `a`."""
    noise = rng.standard_normal(a.shape[0])
    noise -= (noise @ a) * a
    noise /= np.linalg.norm(noise)
    return cos_a * a + math.sqrt(max(0.0, 1.0 - cos_a * cos_a)) * noise


def _toward(anchor: np.ndarray, away_from: np.ndarray, cos_away: float) -> np.ndarray:
    """Unit vector with cosine `cos_away` to `away_from`, remaining weight on
    the component of `anchor` orthogonal to it."""
    w = anchor - (anchor @ away_from) * away_from
    w /= np.linalg.norm(w)
    return cos_away * away_from + math.sqrt(1.0 - cos_away * cos_away) * w


def _search_pair_ids(
    checker: MockPairChecker, base: str, want: str, start: int = 0
) -> tuple[str, str, int]:
    n = start
    while True:
        ref_id, target_id = f"{base}-r{n}", f"{base}-t{n}"
        yes = sum(checker.answers_for(ref_id, target_id))
        if (want == "three" and yes == 3) or (want == "two" and yes == 2) or (
            want == "low" and yes <= 1
        ):
            return ref_id, target_id, n + 1
        n += 1


def build_pipeline_fixture(
    mock_seed: int = 0,
    seed: int = 11,
    tokenizer: Tokenizer = DEFAULT_TOKENIZER,
    threshold: float = 0.5,
) -> tuple[DatasetManifest, FixtureDesign, ToyEncoderBackend]:
    design = FixtureDesign()
    checker = MockPairChecker(seed=mock_seed)
    backend = ToyEncoderBackend(dims=FIXTURE_DIMS, seed=mock_seed)
    for salt in range(64):
        manifest = _build_candidate(design, checker, backend, tokenizer, seed + salt * 1000)
        if _verify(manifest, design, backend, tokenizer, mock_seed, threshold):
            return manifest, design, backend
    raise RuntimeError("could not realize the fixture design in 64 salts")


def _build_candidate(
    design: FixtureDesign,
    checker: MockPairChecker,
    backend: ToyEncoderBackend,
    tokenizer: Tokenizer,
    seed: int,
) -> DatasetManifest:
    rng = np.random.default_rng(seed)
    dim = backend.dims.vector_dim
    cursor = 0

    # ids first: the pair checker keys on them
    tags: list[tuple[str, str]] = []  # (triplet tag, yes-pattern)
    tags += [(f"fx-lowsim{k}", "three") for k in range(design.low_similarity)]
    tags += [(f"fx-retain{k}", "three") for k in range(design.three_yes)]
    tags += [(f"fx-review{k}", "two") for k in range(design.two_yes)]
    tags += [(f"fx-drop{k}", "low") for k in range(design.low_yes)]
    ids: dict[str, tuple[str, str]] = {}
    for tag, want in tags:
        ref_id, target_id, cursor = _search_pair_ids(checker, tag, want, cursor)
        ids[tag] = (ref_id, target_id)

    # twin groups over triplets that stay active: targets share a cluster
    # direction; each ref points 0.95 toward its twin's target
    twin_groups = [
        ("fx-retain0", "fx-retain1"),
        ("fx-retain2", "fx-retain3"),
        ("fx-retain4", "fx-retain5"),
        ("fx-retain6", "fx-retain7"),
        ("fx-review0", "fx-review1"),
        ("fx-review2", "fx-review3"),
        ("fx-review4", design.compress_review_id),
    ]
    targets: dict[str, np.ndarray] = {}
    refs: dict[str, np.ndarray] = {}
    for a, b in twin_groups:
        u = _unit(rng, dim)
        targets[a] = _mix(u, 0.9, rng)
        targets[b] = _mix(u, 0.9, rng)
        refs[a] = _mix(targets[b], 0.95, rng)
        refs[b] = _mix(targets[a], 0.95, rng)

    # discarded-by-design triplets: any vectors work
    for k in range(design.low_yes):
        tag = f"fx-drop{k}"
        refs[tag] = _unit(rng, dim)
        targets[tag] = _mix(refs[tag], 0.9, rng)
    for k in range(design.low_similarity):
        tag = f"fx-lowsim{k}"
        refs[tag] = _unit(rng, dim)
        targets[tag] = _mix(refs[tag], 0.0, rng)

    triplets: list[Triplet] = []
    for tag, _ in tags:
        ref_id, target_id = ids[tag]
        triplets.append(
            Triplet(
                id=tag,
                ref=ImageRef(id=ref_id, uri=_vec_uri(refs[tag]), split="train"),
                target=ImageRef(id=target_id, uri=_vec_uri(targets[tag]), split="train"),
                mod_text=ModText.from_text("make it different", tokenizer, grain="coarse"),
                status="raw",
            )
        )

    # --- refined-entry triplets -------------------------------------------

    # over-length single sentence: the drop-from-end compressor cannot help
    long_sentence = "the table shows " + " ".join(f"item{j}" for j in range(87))
    assert tokenizer.count(long_sentence) > 77
    tag = design.compress_review_id
    triplets.append(
        Triplet(
            id=tag,
            ref=ImageRef(id=f"{tag}-r", uri=_vec_uri(refs[tag]), split="train"),
            target=ImageRef(id=f"{tag}-t", uri=_vec_uri(targets[tag]), split="train"),
            mod_text=ModText.from_text(long_sentence, tokenizer, grain="fine"),
            status="refined",
        )
    )

    # text assess flag: the target's image vector IS the text's embedding
    flag_text = "the ball is red. the ball is small."
    tgt_text = backend.text_vector(flag_text).numpy()
    image_flag_v = _unit(rng, dim)
    triplets.append(
        Triplet(
            id=design.text_flag_id,
            ref=ImageRef(
                id="fx-textflag-r",
                uri=_vec_uri(_toward(image_flag_v, tgt_text, 0.6)),
                split="train",
            ),
            target=ImageRef(id="fx-textflag-t", uri=_vec_uri(tgt_text), split="train"),
            mod_text=ModText.from_text(flag_text, tokenizer, grain="fine"),
            status="refined",
        )
    )

    # image assess flag: reference and target share one vector exactly
    triplets.append(
        Triplet(
            id=design.image_flag_id,
            ref=ImageRef(id="fx-imageflag-r", uri=_vec_uri(image_flag_v), split="train"),
            target=ImageRef(id="fx-imageflag-t", uri=_vec_uri(image_flag_v), split="train"),
            mod_text=ModText.from_text("the chair is blue.", tokenizer, grain="fine"),
            status="refined",
        )
    )

    assert len(triplets) == design.total
    return DatasetManifest(name="pipeline-fixture", triplets=tuple(triplets))


def _run_once(manifest, design, backend, tokenizer, mock_seed, threshold, store):
    return run_pipeline(
        manifest,
        PipelineConfig(similarity_threshold=threshold, seed=mock_seed),
        mock_clients(seed=mock_seed, tokenizer=tokenizer),
        store,
        backend,
        tokenizer,
    )


def _verify(manifest, design, backend, tokenizer, mock_seed, threshold) -> bool:
    store = ReviewStore(path=None, clock=LogicalClock(), tokenizer=tokenizer)
    result = _run_once(manifest, design, backend, tokenizer, mock_seed, threshold, store)
    pair = result.ledger.stage("pair_check")
    if (pair.retained, pair.review, pair.discarded) != (
        design.three_yes,
        design.two_yes,
        design.low_yes,
    ):
        return False
    if store.open_counts() != design.expected_open_queues():
        return False
    flagged = {
        item.stage: item.triplet_id for item in store.items() if item.stage.startswith("assess")
    }
    if flagged != {
        "assess_text": design.text_flag_id,
        "assess_image": design.image_flag_id,
    }:
        return False

    # scripted decide-and-resume: all four decided triplets must finalize
    for stage, triplet_id, verdict, edited in design.resume_script():
        item = next(
            i for i in store.items() if i.stage == stage and i.triplet_id == triplet_id
        )
        store.decide(item.id, verdict, edited_text=edited, reviewer="fixture-verify")
    resumed = _run_once(manifest, design, backend, tokenizer, mock_seed, threshold, store)
    by_id = {t.id: t for t in resumed.manifest.triplets}
    return all(
        by_id[tid].status == "finalized" for _, tid, _, _ in design.resume_script()
    )
