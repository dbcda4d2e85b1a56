"""Deterministic rule-based parser over the grammar documented in
docs/grammar.md.  That file is normative: tests asserting exact output are
hand applications of it."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from .graph import SceneGraph

DETERMINERS = {
    "a", "an", "the", "this", "that", "these", "those", "its", "his", "her",
    "their", "some", "any", "each", "every", "both",
}

COPULAS = {"is", "are", "was", "were", "be", "been", "being", "am"}

SKIP_WORDS = COPULAS | {
    "it", "they", "there", "now", "then", "very", "quite", "really",
    "slightly", "also", "still", "instead", "not", "no", "more", "less",
    "same", "different", "rather", "just", "only",
}

CHANGE_VERBS = {
    "change", "changes", "changed", "replace", "replaces", "replaced",
    "swap", "swaps", "swapped", "turn", "turns", "turned", "make", "makes",
    "made",
}
ADD_VERBS = {"add", "adds", "added"}
REMOVE_VERBS = {"remove", "removes", "removed", "delete", "deletes", "deleted"}

RELATION_VERBS = {
    "wearing", "wears", "wear", "worn", "holding", "holds", "hold", "held",
    "carrying", "carries", "carry", "has", "have", "had", "having",
    "contains", "contain", "containing", "shows", "show", "showing",
    "faces", "face", "facing", "standing", "stands", "stand", "sitting",
    "sits", "sit", "lying", "lies", "lie", "hanging", "hangs", "hang",
    "covering", "covers", "cover", "touching", "touches", "touch",
    "riding", "rides", "ride", "eating", "eats", "eat", "drinking",
    "drinks", "drink", "looking", "looks", "look", "walking", "walks",
    "walk", "running", "runs", "run", "sleeping", "sleeps", "sleep",
    "becomes", "become",
}

PREPOSITIONS = {
    "on", "in", "at", "by", "with", "without", "under", "over", "above",
    "below", "behind", "beside", "near", "against", "around", "inside",
    "outside", "onto", "into", "atop", "upon", "across", "along",
    "between", "beneath", "of", "to", "from",
}

MULTIWORD_PREPOSITIONS = (
    "to the left of",
    "to the right of",
    "in front of",
    "on top of",
    "next to",
    "close to",
)

ADJECTIVES = {
    # colors
    "red", "blue", "green", "yellow", "orange", "purple", "pink", "brown",
    "black", "white", "gray", "grey", "golden", "silver", "beige", "teal",
    "navy", "maroon", "cyan",
    # shades
    "dark", "light", "bright", "pale",
    # patterns
    "striped", "dotted", "spotted", "checkered", "plaid", "floral", "solid",
    "plain", "patterned",
    # sizes
    "small", "big", "large", "tiny", "huge", "giant", "long", "short",
    "tall", "wide", "narrow", "little",
    # materials
    "wooden", "metal", "metallic", "plastic", "leather", "cotton", "silk",
    "denim", "woolen", "furry",
    # shape modifiers
    "round", "rectangular", "curved", "straight",
    # garment
    "sleeveless", "strapless", "collared", "buttoned", "fitted", "loose",
    "casual", "formal",
    # misc
    "new", "old", "open", "closed", "empty", "full", "clean", "dirty",
    "shiny", "matte",
}

CONDITIONAL_ADJECTIVES = {"square", "oval"}  # ADJ only when a noun follows

ADJ_SUFFIXES = ("-colored", "-shaped", "-sized", "-patterned")

PIVOTS = {"to", "into", "with"}

_SENTENCE_SPLIT = re.compile(r"[.;!?]")
_WORD = re.compile(r"[a-z0-9-]+|,")

# token classes
DET, SKIP, CHANGE, ADD, REMOVE, VERB, PREP, ADJ, NOUN, BREAK = (
    "DET", "SKIP", "CHANGE", "ADD", "REMOVE", "VERB", "PREP", "ADJ", "NOUN", "BREAK",
)


@dataclass
class _Tok:
    cls: str
    surface: str


def _join_multiword(words: list[str]) -> list[str]:
    out: list[str] = []
    i = 0
    while i < len(words):
        matched = None
        for phrase in MULTIWORD_PREPOSITIONS:
            parts = phrase.split()
            if words[i : i + len(parts)] == parts:
                matched = phrase
                break
        if matched:
            out.append(matched)
            i += len(matched.split())
        else:
            out.append(words[i])
            i += 1
    return out


def _classify(words: list[str]) -> list[_Tok]:
    toks: list[_Tok] = []
    for idx, w in enumerate(words):
        if w == ",":
            toks.append(_Tok(BREAK, w))
        elif w in DETERMINERS:
            toks.append(_Tok(DET, w))
        elif w in SKIP_WORDS:
            toks.append(_Tok(SKIP, w))
        elif w in CHANGE_VERBS:
            toks.append(_Tok(CHANGE, w))
        elif w in ADD_VERBS:
            toks.append(_Tok(ADD, w))
        elif w in REMOVE_VERBS:
            toks.append(_Tok(REMOVE, w))
        elif w in RELATION_VERBS:
            toks.append(_Tok(VERB, w))
        elif w in PREPOSITIONS or w in MULTIWORD_PREPOSITIONS:
            toks.append(_Tok(PREP, w))
        elif w in ADJECTIVES:
            toks.append(_Tok(ADJ, w))
        elif w in CONDITIONAL_ADJECTIVES:
            nxt = words[idx + 1] if idx + 1 < len(words) else None
            if nxt is not None and _is_nounish(nxt):
                toks.append(_Tok(ADJ, w))
            else:
                toks.append(_Tok(NOUN, w))
        elif w.isdigit():
            toks.append(_Tok(SKIP, w))
        elif w.endswith(ADJ_SUFFIXES):
            toks.append(_Tok(ADJ, w))
        elif w.endswith("ing") and idx > 0 and words[idx - 1] in COPULAS:
            toks.append(_Tok(VERB, w))
        else:
            toks.append(_Tok(NOUN, w))
    return toks


def _is_nounish(w: str) -> bool:
    """Would this word classify as NOUN (used by the square/oval rule)?"""
    return not (
        w == ","
        or w in DETERMINERS
        or w in SKIP_WORDS
        or w in CHANGE_VERBS
        or w in ADD_VERBS
        or w in REMOVE_VERBS
        or w in RELATION_VERBS
        or w in PREPOSITIONS
        or w in MULTIWORD_PREPOSITIONS
        or w in ADJECTIVES
        or w.isdigit()
        or w.endswith(ADJ_SUFFIXES)
    )


@dataclass
class _NP:
    head: str
    adjectives: list[str]


class _GraphBuilder:
    def __init__(self):
        self.entities: list[str] = []
        self.index: dict[str, int] = {}
        self.attributes: list[list[str]] = []
        self.relations: list[tuple[int, str, int]] = []

    def entity(self, surface: str) -> int:
        if surface not in self.index:
            self.index[surface] = len(self.entities)
            self.entities.append(surface)
            self.attributes.append([])
        return self.index[surface]

    def attribute(self, ent: int, attr: str) -> None:
        if attr not in self.attributes[ent]:
            self.attributes[ent].append(attr)

    def relation(self, subj: int, pred: str, obj: int) -> None:
        trip = (subj, pred, obj)
        if trip not in self.relations:
            self.relations.append(trip)

    def build(self, source_text: str) -> SceneGraph:
        return SceneGraph(
            entities=tuple(self.entities),
            attributes=tuple(tuple(a) for a in self.attributes),
            relations=tuple(self.relations),
            source_text=source_text,
        )


class _SentenceParser:
    def __init__(self, toks: list[_Tok], builder: _GraphBuilder):
        self.toks = toks
        self.builder = builder
        self.pos = 0

    def _peek(self) -> Optional[_Tok]:
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def _np(self) -> Optional[_NP]:
        """Parse DET? ADJ* NOUN+ at the current position, else None
        (position unchanged unless an NP was consumed)."""
        start = self.pos
        if self._peek() and self._peek().cls == DET:
            self.pos += 1
        adjs: list[str] = []
        while self._peek() and self._peek().cls == ADJ:
            adjs.append(self._peek().surface)
            self.pos += 1
        nouns: list[str] = []
        while self._peek() and self._peek().cls == NOUN:
            nouns.append(self._peek().surface)
            self.pos += 1
        if not nouns:
            self.pos = start
            return None
        return _NP(head=" ".join(nouns), adjectives=adjs)

    def _adj_run(self) -> list[str]:
        adjs: list[str] = []
        while self._peek() and self._peek().cls == ADJ:
            adjs.append(self._peek().surface)
            self.pos += 1
        return adjs

    def _materialize(self, np: _NP) -> int:
        ent = self.builder.entity(np.head)
        for a in np.adjectives:
            self.builder.attribute(ent, a)
        return ent

    def parse(self) -> None:
        if self._imperative():
            pass  # subject left set by the construction; continue scanning
        self._scan()

    def _imperative(self) -> bool:
        """Handle a sentence-initial CHANGE/ADD/REMOVE construction.
        Returns True if one was consumed, leaving self.subject set."""
        probe = self.pos
        while probe < len(self.toks) and self.toks[probe].cls in (SKIP, DET):
            probe += 1
        if probe >= len(self.toks) or self.toks[probe].cls not in (CHANGE, ADD, REMOVE):
            self.subject: Optional[int] = None
            return False
        verb = self.toks[probe]
        self.pos = probe + 1
        np_src = self._np()
        if np_src is None:
            self.subject = None
            return True  # verb with nothing parseable after it: consume and move on
        if verb.cls == ADD:
            ent = self._materialize(np_src)
            self.builder.attribute(ent, "added")
            self.subject = ent
            return True
        if verb.cls == REMOVE:
            ent = self._materialize(np_src)
            self.builder.attribute(ent, "removed")
            self.subject = ent
            return True
        # CHANGE: look for a pivot then a target NP or adjective run
        if self._peek() and self._peek().cls == PREP and self._peek().surface in PIVOTS:
            self.pos += 1
            np_tgt = self._np()
            if np_tgt is not None:
                if np_tgt.head == np_src.head:
                    ent = self.builder.entity(np_src.head)
                    for a in np_src.adjectives:
                        self.builder.attribute(ent, f"removed {a}")
                    for a in np_tgt.adjectives:
                        self.builder.attribute(ent, a)
                    self.subject = ent
                else:
                    src = self._materialize(np_src)
                    tgt = self._materialize(np_tgt)
                    self.builder.relation(src, f"{verb.surface} to", tgt)
                    self.subject = src
                return True
            adjs = self._adj_run()
            ent = self._materialize(np_src)
            for a in adjs:
                self.builder.attribute(ent, a)
            self.subject = ent
            return True
        # no pivot: CHANGE np adj-run
        adjs = self._adj_run()
        ent = self._materialize(np_src)
        for a in adjs:
            self.builder.attribute(ent, a)
        self.subject = ent
        return True

    def _scan(self) -> None:
        pending_verb: Optional[str] = None
        pending_prep: Optional[str] = None
        while self.pos < len(self.toks):
            tok = self._peek()
            if tok.cls in (SKIP, BREAK):
                self.pos += 1
                continue
            if tok.cls in (DET, NOUN, ADJ):
                np = self._np()
                if np is None:
                    # floating adjectives (and stray determiners)
                    adjs = self._adj_run()
                    if not adjs and self._peek() and self._peek().cls == DET:
                        self.pos += 1
                        continue
                    if self.subject is not None:
                        for a in adjs:
                            self.builder.attribute(self.subject, a)
                    continue
                if self.subject is None:
                    self.subject = self._materialize(np)
                elif pending_verb is not None or pending_prep is not None:
                    obj = self._materialize(np)
                    if pending_verb and pending_prep:
                        pred = f"{pending_verb} {pending_prep}"
                    else:
                        pred = pending_verb or pending_prep
                    self.builder.relation(self.subject, pred, obj)
                    pending_verb = pending_prep = None
                else:
                    self.subject = self._materialize(np)
                continue
            if tok.cls in (VERB, CHANGE, ADD, REMOVE):
                if pending_verb is not None and self.subject is not None:
                    # previous verb never found an object: record as attribute
                    self.builder.attribute(self.subject, pending_verb)
                pending_verb = tok.surface
                pending_prep = None
                self.pos += 1
                continue
            if tok.cls == PREP:
                pending_prep = tok.surface
                self.pos += 1
                continue
            self.pos += 1
        if pending_verb is not None and self.subject is not None:
            self.builder.attribute(self.subject, pending_verb)


class RuleParserBackend:
    """Reference parser: pure, reentrant, byte-identical output across runs."""

    name = "rule"
    reentrant = True

    def parse(self, text: str) -> SceneGraph:
        if not text:
            raise ValueError("text must be non-empty")
        builder = _GraphBuilder()
        for sentence in _SENTENCE_SPLIT.split(text.lower()):
            words = _join_multiword(_WORD.findall(sentence))
            if not words:
                continue
            _SentenceParser(_classify(words), builder).parse()
        return builder.build(source_text=text)


def parse_scene_graph(text: str, backend) -> SceneGraph:
    """Parse a modification text with the given parser backend."""
    return backend.parse(text)


class ExternalParserBackend:
    """Adapter slot for a neural scene-graph parser: wraps a callable that
    returns a SceneGraph-shaped dict (entities/attributes/relations)."""

    def __init__(self, name: str, fn, reentrant: bool = False):
        self.name = name
        self._fn = fn
        self.reentrant = reentrant

    def parse(self, text: str) -> SceneGraph:
        if not text:
            raise ValueError("text must be non-empty")
        out = self._fn(text)
        if isinstance(out, SceneGraph):
            g = out
        else:
            g = SceneGraph.from_dict(out)
        if not g.source_text:
            g = SceneGraph(
                entities=g.entities,
                attributes=g.attributes,
                relations=g.relations,
                source_text=text,
            )
        return g
