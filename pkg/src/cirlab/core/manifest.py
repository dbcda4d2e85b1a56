"""Line-delimited manifest files: one triplet record per line, UTF-8 JSON.

Record fields: schema_version, triplet_id, ref_id, ref_uri, target_id,
target_uri, mod_text, grain, split, status, eval_answers (nullable),
provenance, subset_ids (nullable).  Token counts are not stored; they are
recomputed with the active tokenizer on load so stored counts can never
drift from the counting rule.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

from .tokenizer import DEFAULT_TOKENIZER, Tokenizer
from .types import (
    TOKEN_LIMIT,
    DatasetManifest,
    EvalRecord,
    ImageRef,
    ModText,
    SchemaError,
    Triplet,
)

SCHEMA_VERSION = 1

_REQUIRED_FIELDS = (
    "schema_version",
    "triplet_id",
    "ref_id",
    "ref_uri",
    "target_id",
    "target_uri",
    "mod_text",
    "grain",
    "split",
    "status",
)


def triplet_to_record(t: Triplet) -> dict[str, Any]:
    eval_answers = None
    if t.eval is not None:
        eval_answers = {"answers": list(t.eval.answers), "rationale": t.eval.rationale}
    return {
        "schema_version": SCHEMA_VERSION,
        "triplet_id": t.id,
        "ref_id": t.ref.id,
        "ref_uri": t.ref.uri,
        "target_id": t.target.id,
        "target_uri": t.target.uri,
        "mod_text": t.mod_text.text,
        "grain": t.mod_text.grain,
        "split": t.split,
        "status": t.status,
        "eval_answers": eval_answers,
        "subset_ids": list(t.subset_ids) if t.subset_ids is not None else None,
        "provenance": t.provenance,
    }


def triplet_from_record(rec: dict[str, Any], tokenizer: Tokenizer, line_no: int | None = None) -> Triplet:
    for key in _REQUIRED_FIELDS:
        if key not in rec:
            raise SchemaError("missing required field", line_no=line_no, field_name=key)
    if rec["schema_version"] != SCHEMA_VERSION:
        raise SchemaError(
            f"unsupported schema_version {rec['schema_version']!r}",
            line_no=line_no,
            field_name="schema_version",
        )
    ev: Optional[EvalRecord] = None
    raw_eval = rec.get("eval_answers")
    if raw_eval is not None:
        answers = raw_eval.get("answers") if isinstance(raw_eval, dict) else raw_eval
        if not isinstance(answers, list) or len(answers) != 3:
            raise SchemaError("eval_answers must hold exactly 3 booleans", line_no=line_no, field_name="eval_answers")
        rationale = raw_eval.get("rationale", "") if isinstance(raw_eval, dict) else ""
        ev = EvalRecord(answers=tuple(bool(a) for a in answers), rationale=rationale)
    subset = rec.get("subset_ids")
    try:
        return Triplet(
            id=rec["triplet_id"],
            ref=ImageRef(id=rec["ref_id"], uri=rec["ref_uri"], split=rec["split"]),
            target=ImageRef(id=rec["target_id"], uri=rec["target_uri"], split=rec["split"]),
            mod_text=ModText.from_text(rec["mod_text"], tokenizer, grain=rec["grain"]),
            status=rec["status"],
            eval=ev,
            subset_ids=tuple(subset) if subset is not None else None,
            provenance=dict(rec.get("provenance") or {}),
        )
    except SchemaError as e:
        if e.line_no is None and line_no is not None:
            raise SchemaError(str(e), line_no=line_no, field_name=e.field_name) from e
        raise


def load_manifest(path, tokenizer: Tokenizer = DEFAULT_TOKENIZER, name: str | None = None) -> DatasetManifest:
    """Parse a manifest file; any malformed line raises, nothing is skipped."""
    path = Path(path)
    triplets = []
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise SchemaError(f"invalid JSON: {e.msg}", line_no=line_no) from e
            if not isinstance(rec, dict):
                raise SchemaError("record must be a JSON object", line_no=line_no)
            triplets.append(triplet_from_record(rec, tokenizer, line_no=line_no))
    return DatasetManifest(name=name or path.stem, triplets=tuple(triplets))


def save_manifest(m: DatasetManifest, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for t in m.triplets:
            fh.write(json.dumps(triplet_to_record(t), sort_keys=True) + "\n")


@dataclass(frozen=True)
class StatsReport:
    name: str
    train_count: int
    test_count: int
    mean_tokens: float
    max_tokens: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "train_count": self.train_count,
            "test_count": self.test_count,
            "mean_tokens": self.mean_tokens,
            "max_tokens": self.max_tokens,
        }


def manifest_stats(m: DatasetManifest, tokenizer: Tokenizer = DEFAULT_TOKENIZER) -> StatsReport:
    """Per-split counts plus mean/max token length over all triplets."""
    counts = m.counts
    token_counts = [tokenizer.count(t.mod_text.text) for t in m.triplets]
    mean = sum(token_counts) / len(token_counts) if token_counts else math.nan
    mx = max(token_counts) if token_counts else 0
    return StatsReport(
        name=m.name,
        train_count=counts["train"],
        test_count=counts["test"],
        mean_tokens=mean,
        max_tokens=mx,
    )


@dataclass(frozen=True)
class Violation:
    triplet_id: str
    rule: str
    detail: str


def validate_finalized(m: DatasetManifest, token_limit: int = TOKEN_LIMIT) -> list[Violation]:
    """Empty iff every non-discarded triplet is finalized, fine-grained, and
    within the token limit.  Violations are returned as data, never raised."""
    out: list[Violation] = []
    for t in m.active():
        if t.status != "finalized":
            out.append(Violation(t.id, "stage", f"status is {t.status!r}, expected finalized"))
        if t.mod_text.grain != "fine":
            out.append(Violation(t.id, "grain", f"grain is {t.mod_text.grain!r}, expected fine"))
        if t.mod_text.token_count > token_limit:
            out.append(
                Violation(
                    t.id,
                    "token-limit",
                    f"{t.mod_text.token_count} tokens exceeds the {token_limit}-token limit",
                )
            )
    return out
