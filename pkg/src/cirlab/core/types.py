"""Domain types shared by every stage: images, modification texts, triplets,
evaluation records, and dataset manifests.

All types are immutable values; pipeline stages produce new instances instead
of mutating, so concurrent readers never need coordination.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Optional

from .tokenizer import Tokenizer

SPLITS = ("train", "test")

# Pipeline stage tags, in the only order a triplet may advance through.
# Any stage may additionally drop to "discarded".
STAGE_ORDER = (
    "raw",
    "sampled",
    "selected",
    "generated",
    "refined",
    "assessed",
    "finalized",
)
DISCARDED = "discarded"
STATUSES = STAGE_ORDER + (DISCARDED,)

TOKEN_LIMIT = 77

GRAINS = ("coarse", "fine")


class SchemaError(ValueError):
    """A record violates the manifest schema or a type invariant."""

    def __init__(self, message: str, *, line_no: int | None = None, field_name: str | None = None):
        self.line_no = line_no
        self.field_name = field_name
        prefix = ""
        if line_no is not None:
            prefix += f"line {line_no}: "
        if field_name is not None:
            prefix += f"field {field_name!r}: "
        super().__init__(prefix + message)


def stage_index(status: str) -> int:
    if status == DISCARDED:
        raise ValueError("discarded is terminal and has no stage index")
    return STAGE_ORDER.index(status)


def check_status_advance(old: str, new: str) -> None:
    """Raise unless old -> new is a forward move (or a drop to discarded)."""
    if new == DISCARDED:
        return
    if old == DISCARDED:
        raise SchemaError(f"cannot revive a discarded triplet (to {new!r})")
    if stage_index(new) < stage_index(old):
        raise SchemaError(f"status may not move backward: {old!r} -> {new!r}")


@dataclass(frozen=True)
class ImageRef:
    id: str
    uri: str
    split: str

    def __post_init__(self):
        if not self.id:
            raise SchemaError("image id must be non-empty", field_name="id")
        if not self.uri:
            raise SchemaError("image uri must be non-empty", field_name="uri")
        if self.split not in SPLITS:
            raise SchemaError(f"split must be one of {SPLITS}, got {self.split!r}", field_name="split")


@dataclass(frozen=True)
class ModText:
    text: str
    token_count: int
    grain: str

    def __post_init__(self):
        if self.grain not in GRAINS:
            raise SchemaError(f"grain must be one of {GRAINS}, got {self.grain!r}", field_name="grain")
        if self.token_count < 0:
            raise SchemaError("token_count must be nonnegative", field_name="token_count")

    @classmethod
    def from_text(cls, text: str, tokenizer: Tokenizer, grain: str = "fine") -> "ModText":
        return cls(text=text, token_count=tokenizer.count(text), grain=grain)


@dataclass(frozen=True)
class EvalRecord:
    """Three yes/no answers from the pair-check step plus the checker's notes."""

    answers: tuple[bool, bool, bool]
    rationale: str = ""

    def __post_init__(self):
        if len(self.answers) != 3 or not all(isinstance(a, bool) for a in self.answers):
            raise SchemaError("answers must be exactly 3 booleans", field_name="eval_answers")
        object.__setattr__(self, "answers", tuple(self.answers))

    @property
    def yes_count(self) -> int:
        return sum(self.answers)


@dataclass(frozen=True)
class Triplet:
    id: str
    ref: ImageRef
    target: ImageRef
    mod_text: ModText
    status: str = "raw"
    eval: Optional[EvalRecord] = None
    subset_ids: Optional[tuple[str, ...]] = None
    provenance: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.ref.id == self.target.id:
            raise SchemaError(
                f"reference and target must differ (both {self.ref.id!r})", field_name="target_id"
            )
        if self.status not in STATUSES:
            raise SchemaError(f"unknown status {self.status!r}", field_name="status")
        if self.ref.split != self.target.split:
            raise SchemaError(
                f"ref split {self.ref.split!r} != target split {self.target.split!r}",
                field_name="split",
            )
        if self.subset_ids is not None:
            object.__setattr__(self, "subset_ids", tuple(self.subset_ids))

    @property
    def split(self) -> str:
        return self.ref.split

    def advanced(self, status: str, **changes) -> "Triplet":
        """Copy with a forward status move; backward moves raise."""
        check_status_advance(self.status, status)
        return replace(self, status=status, **changes)

    def discarded(self, stage: str, rule: str) -> "Triplet":
        """Copy marked discarded, recording which stage/rule dropped it."""
        prov = dict(self.provenance)
        prov["discard"] = {"stage": stage, "rule": rule}
        return replace(self, status=DISCARDED, provenance=prov)


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    triplets: tuple[Triplet, ...]

    def __post_init__(self):
        object.__setattr__(self, "triplets", tuple(self.triplets))
        seen_ids: set[str] = set()
        uri_by_image: dict[str, str] = {}
        for t in self.triplets:
            if t.id in seen_ids:
                raise SchemaError(f"duplicate triplet id {t.id!r}", field_name="triplet_id")
            seen_ids.add(t.id)
            for img in (t.ref, t.target):
                known = uri_by_image.get(img.id)
                if known is None:
                    uri_by_image[img.id] = img.uri
                elif known != img.uri:
                    raise SchemaError(
                        f"image id {img.id!r} maps to conflicting uris {known!r} and {img.uri!r}",
                        field_name="ref_uri",
                    )

    @property
    def counts(self) -> dict[str, int]:
        out = {s: 0 for s in SPLITS}
        for t in self.triplets:
            out[t.split] += 1
        return out

    def images(self) -> dict[str, ImageRef]:
        """All distinct images referenced, keyed by id."""
        out: dict[str, ImageRef] = {}
        for t in self.triplets:
            out[t.ref.id] = t.ref
            out[t.target.id] = t.target
        return out

    def active(self) -> tuple[Triplet, ...]:
        return tuple(t for t in self.triplets if t.status != DISCARDED)

    def with_triplets(self, triplets) -> "DatasetManifest":
        return DatasetManifest(name=self.name, triplets=tuple(triplets))
