"""Durable review queue: an append-only event log (JSON lines) replayed into
memory on open.  Human decisions at the pipeline's manual points live here;
the pipeline resumes by reading them back.

Stages and the verdicts they admit:

* ``pair_check``  - retain | discard        (2-yes image pairs)
* ``refine``      - retain | edit | discard (refinement emptied the text)
* ``assess_text`` - retain | edit | discard (text alone hits rank 1)
* ``assess_image``- retain | edit | discard (image alone hits rank 1)
* ``compress``    - edit | discard          (text cannot fit the limit)

Edits on ``compress`` items must fit the token limit; elsewhere the final
compression pass enforces the bound.
"""

from __future__ import annotations

import json
import threading
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Optional

from ..core.tokenizer import DEFAULT_TOKENIZER, Tokenizer
from ..core.types import TOKEN_LIMIT

STAGES = ("pair_check", "refine", "assess_text", "assess_image", "compress")

VERDICTS_BY_STAGE = {
    "pair_check": ("retain", "discard"),
    "refine": ("retain", "edit", "discard"),
    "assess_text": ("retain", "edit", "discard"),
    "assess_image": ("retain", "edit", "discard"),
    "compress": ("edit", "discard"),
}


class ReviewError(ValueError):
    pass


class DuplicateItemError(ReviewError):
    pass


class AlreadyDecidedError(ReviewError):
    pass


class InvalidVerdictError(ReviewError):
    pass


@dataclass(frozen=True)
class ReviewItem:
    id: str
    stage: str
    triplet_id: str
    payload: dict[str, Any]
    created_at: str
    seq: int
    state: str = "open"  # open | decided

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class Decision:
    item_id: str
    verdict: str  # retain | discard | edit
    edited_text: Optional[str]
    reviewer: str
    decided_at: str

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def utc_clock() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


class LogicalClock:
    """Deterministic stand-in for wall time: one tick per event."""

    def __init__(self, start: int = 0):
        self._tick = start

    def __call__(self) -> str:
        self._tick += 1
        return f"1970-01-01T00:00:00Z+{self._tick:06d}"


class ReviewStore:
    """Append-only log plus in-memory state; pass ``path=None`` for a purely
    in-memory queue (tests, dry runs)."""

    def __init__(
        self,
        path: str | Path | None = None,
        clock: Callable[[], str] = utc_clock,
        tokenizer: Tokenizer = DEFAULT_TOKENIZER,
        token_limit: int = TOKEN_LIMIT,
    ):
        self.path = Path(path) if path is not None else None
        self.clock = clock
        self.tokenizer = tokenizer
        self.token_limit = token_limit
        self._lock = threading.Lock()
        self._items: dict[str, ReviewItem] = {}
        self._decisions: dict[str, Decision] = {}
        self._by_key: dict[tuple[str, str], str] = {}  # (stage, triplet_id) -> item id
        self._order: list[str] = []
        self._fh = None
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            if self.snapshot_path.exists():
                self._load_snapshot()
            if self.path.exists():
                self._replay()
            self._fh = self.path.open("a", encoding="utf-8")

    # -- persistence ------------------------------------------------------

    @property
    def snapshot_path(self) -> Path:
        return self.path.with_suffix(self.path.suffix + ".snapshot")

    def _apply_event(self, event: dict[str, Any]) -> None:
        if event["type"] == "item":
            item = ReviewItem(**event["item"])
            self._items[item.id] = item
            self._by_key[(item.stage, item.triplet_id)] = item.id
            self._order.append(item.id)
        elif event["type"] == "decision":
            d = Decision(**event["decision"])
            self._decisions[d.item_id] = d
            item = self._items[d.item_id]
            self._items[d.item_id] = ReviewItem(**{**item.to_dict(), "state": "decided"})

    def _load_snapshot(self) -> None:
        snapshot = json.loads(self.snapshot_path.read_text("utf-8"))
        for event in snapshot["events"]:
            self._apply_event(event)

    def _replay(self) -> None:
        with self.path.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    self._apply_event(json.loads(line))

    def _append(self, event: dict[str, Any]) -> None:
        if self._fh is None:
            return
        self._fh.write(json.dumps(event, sort_keys=True) + "\n")
        self._fh.flush()

    def _events(self) -> list[dict[str, Any]]:
        """Current state as a minimal event stream (items then decisions)."""
        events: list[dict[str, Any]] = []
        for item_id in self._order:
            item = self._items[item_id]
            events.append({"type": "item", "item": {**item.to_dict(), "state": "open"}})
        for item_id in self._order:
            d = self._decisions.get(item_id)
            if d is not None:
                events.append({"type": "decision", "decision": d.to_dict()})
        return events

    def compact(self) -> None:
        """Fold the log into the snapshot: the snapshot holds the full state
        and the log restarts empty; replay order is snapshot then log."""
        if self.path is None:
            return
        with self._lock:
            tmp = self.snapshot_path.with_suffix(".tmp")
            tmp.write_text(json.dumps({"events": self._events()}, sort_keys=True), "utf-8")
            tmp.replace(self.snapshot_path)
            if self._fh is not None:
                self._fh.close()
            self._fh = self.path.open("w", encoding="utf-8")
            self._fh.flush()

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    # -- queue operations --------------------------------------------------

    def enqueue(self, stage: str, triplet_id: str, payload: dict[str, Any]) -> ReviewItem:
        if stage not in STAGES:
            raise ReviewError(f"unknown stage {stage!r}; expected one of {STAGES}")
        with self._lock:
            key = (stage, triplet_id)
            if key in self._by_key:
                raise DuplicateItemError(f"item for {key} already enqueued")
            seq = len(self._order) + 1
            item = ReviewItem(
                id=f"rv-{seq:06d}",
                stage=stage,
                triplet_id=triplet_id,
                payload=payload,
                created_at=self.clock(),
                seq=seq,
            )
            self._items[item.id] = item
            self._by_key[key] = item.id
            self._order.append(item.id)
            self._append({"type": "item", "item": item.to_dict()})
            return item

    def get_or_enqueue(self, stage: str, triplet_id: str, payload: dict[str, Any]) -> ReviewItem:
        existing = self._by_key.get((stage, triplet_id))
        if existing is not None:
            return self._items[existing]
        return self.enqueue(stage, triplet_id, payload)

    def get(self, item_id: str) -> ReviewItem:
        try:
            return self._items[item_id]
        except KeyError:
            raise ReviewError(f"unknown item {item_id!r}") from None

    def next_open(self, stage: str | None = None) -> Optional[ReviewItem]:
        """Oldest open item (optionally for one stage); read-only."""
        for item_id in self._order:
            item = self._items[item_id]
            if item.state != "open":
                continue
            if stage is not None and item.stage != stage:
                continue
            return item
        return None

    def decide(
        self,
        item_id: str,
        verdict: str,
        edited_text: Optional[str] = None,
        reviewer: str = "anonymous",
    ) -> ReviewItem:
        with self._lock:
            item = self.get(item_id)
            if item.state == "decided":
                raise AlreadyDecidedError(f"item {item_id} already has a decision")
            allowed = VERDICTS_BY_STAGE[item.stage]
            if verdict not in allowed:
                raise InvalidVerdictError(
                    f"verdict {verdict!r} not allowed for stage {item.stage!r} (allowed: {allowed})"
                )
            if verdict == "edit":
                if not edited_text or not edited_text.strip():
                    raise InvalidVerdictError("edit verdicts require edited_text")
                if item.stage == "compress":
                    n = self.tokenizer.count(edited_text)
                    if n > self.token_limit:
                        raise InvalidVerdictError(
                            f"edited text has {n} tokens, over the {self.token_limit}-token limit"
                        )
            elif edited_text:
                raise InvalidVerdictError(f"edited_text only allowed with verdict 'edit', not {verdict!r}")
            decision = Decision(
                item_id=item_id,
                verdict=verdict,
                edited_text=edited_text,
                reviewer=reviewer,
                decided_at=self.clock(),
            )
            decided = ReviewItem(**{**item.to_dict(), "state": "decided"})
            self._items[item_id] = decided
            self._decisions[item_id] = decision
            self._append({"type": "decision", "decision": decision.to_dict()})
            return decided

    def decision_for(self, stage: str, triplet_id: str) -> Optional[Decision]:
        item_id = self._by_key.get((stage, triplet_id))
        if item_id is None:
            return None
        return self._decisions.get(item_id)

    def decision(self, item_id: str) -> Optional[Decision]:
        return self._decisions.get(item_id)

    def items(self) -> list[ReviewItem]:
        return [self._items[i] for i in self._order]

    def open_counts(self) -> dict[str, int]:
        counts = {s: 0 for s in STAGES}
        for item in self._items.values():
            if item.state == "open":
                counts[item.stage] += 1
        return counts

    def open_count(self) -> int:
        return sum(self.open_counts().values())

    def export_state(self) -> list[dict[str, Any]]:
        """Canonical queue dump for determinism comparisons."""
        out = []
        for item_id in self._order:
            item = self._items[item_id]
            rec = item.to_dict()
            d = self._decisions.get(item_id)
            rec["decision"] = d.to_dict() if d else None
            out.append(rec)
        return out
