"""Tokenizers used for modification-text length accounting.

The default tokenizer splits on whitespace and punctuation; an adapter slot
lets a byte-pair tokenizer (e.g. a CLIP-style encoder vocabulary) be plugged
in when length accounting must match a specific text encoder.
"""

from __future__ import annotations

import re
from typing import Callable, Protocol


class Tokenizer(Protocol):
    name: str

    def tokenize(self, text: str) -> list[str]: ...

    def count(self, text: str) -> int: ...


_WORD_OR_PUNCT = re.compile(r"\w+|[^\w\s]", re.UNICODE)


class WhitespacePunctTokenizer:
    """Splits into word runs and individual punctuation marks."""

    name = "whitespace-punct"

    def tokenize(self, text: str) -> list[str]:
        return _WORD_OR_PUNCT.findall(text)

    def count(self, text: str) -> int:
        return len(self.tokenize(text))


class CallableTokenizerAdapter:
    """Adapter slot: wraps any ``text -> list[str]`` callable (e.g. a BPE
    tokenizer's encode) behind the Tokenizer contract."""

    def __init__(self, name: str, fn: Callable[[str], list[str]]):
        self.name = name
        self._fn = fn

    def tokenize(self, text: str) -> list[str]:
        return list(self._fn(text))

    def count(self, text: str) -> int:
        return len(self.tokenize(text))


DEFAULT_TOKENIZER = WhitespacePunctTokenizer()

_REGISTRY: dict[str, Tokenizer] = {DEFAULT_TOKENIZER.name: DEFAULT_TOKENIZER}


def register_tokenizer(tok: Tokenizer) -> None:
    _REGISTRY[tok.name] = tok


def get_tokenizer(name: str) -> Tokenizer:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown tokenizer {name!r}; registered: {sorted(_REGISTRY)}")
