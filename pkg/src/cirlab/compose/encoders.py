"""Encoder backends: the contract every image/text feature extractor obeys,
plus a deterministic toy backend for desk-scale runs and tests.

The toy backend derives every vector from a stable hash of (backend seed,
input), so identical inputs always produce identical features, across
processes and platforms.  Real vision-language backbones plug in behind the
same contract; they are adapters only and never ship with this package.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Protocol, Sequence, Union

import numpy as np
import torch

from ..core.tokenizer import DEFAULT_TOKENIZER, Tokenizer

ImageSource = Union[str, Sequence[float], np.ndarray, torch.Tensor]


@dataclass(frozen=True)
class TextFeature:
    """Token matrix (S, D_T) with a padding mask and a summary vector."""

    tokens: torch.Tensor
    mask: torch.Tensor  # (S,) bool, True where a real token sits
    summary: torch.Tensor

    def __post_init__(self):
        if self.tokens.dim() != 2 or self.mask.shape != (self.tokens.shape[0],):
            raise ValueError("tokens must be (S, D_T) with an (S,) mask")


@dataclass(frozen=True)
class EncoderDims:
    channels: int  # C: visual token count
    image_dim: int  # D_I
    seq_len: int  # S: text token positions
    text_dim: int  # D_T
    vector_dim: int  # pooled embedding width shared by image/text vectors


class EncoderBackend(Protocol):
    dims: EncoderDims
    trainable: bool

    def encode_image(self, source: ImageSource) -> torch.Tensor: ...

    def encode_text(self, text: str) -> TextFeature: ...

    def image_vector(self, source: ImageSource) -> torch.Tensor: ...

    def text_vector(self, text: str) -> torch.Tensor: ...

    def summary(self, text: str) -> torch.Tensor: ...


def _seed_for(namespace: str, key: str) -> int:
    digest = hashlib.sha256(f"{namespace}\x1f{key}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def resolve_image_source(source: ImageSource) -> np.ndarray | str:
    """Literal vectors pass through; `vec://` URIs parse to vectors;
    synthetic URIs expand to their attribute features; anything else stays
    a string key for hash-derived features."""
    if isinstance(source, torch.Tensor):
        return source.detach().cpu().numpy().astype(np.float64)
    if isinstance(source, np.ndarray):
        return source.astype(np.float64)
    if isinstance(source, (list, tuple)):
        return np.asarray(source, dtype=np.float64)
    if isinstance(source, str) and source.startswith("vec://"):
        body = source[len("vec://") :]
        return np.asarray([float(x) for x in body.split(",") if x], dtype=np.float64)
    if isinstance(source, str) and source.startswith("synthetic://"):
        from ..synthetic import synthetic_feature_vector

        return synthetic_feature_vector(source)
    return source


class ToyEncoderBackend:
    """Deterministic stand-in for a pretrained vision-language backbone.

    Images: a feature vector (given directly or resolved from the URI) is
    expanded to (C, D_I) by fixed per-channel random projections.  The
    pooled image vector is the raw feature vector itself when its length
    already equals `vector_dim`, else a fixed projection of it; either way
    unit-normalized.

    Text: per-token hash embeddings padded/truncated to S positions; the
    summary of a string is the mean of its token embeddings, which keeps
    graph-element vectors in the same space as the text feature rows.
    """

    trainable = False

    def __init__(
        self,
        dims: EncoderDims | None = None,
        seed: int = 0,
        tokenizer: Tokenizer = DEFAULT_TOKENIZER,
    ):
        self.dims = dims or EncoderDims(channels=4, image_dim=32, seq_len=16, text_dim=32, vector_dim=32)
        self.seed = seed
        self.tokenizer = tokenizer
        self._cache: dict[tuple[str, str], torch.Tensor] = {}

    @property
    def text_dim(self) -> int:
        return self.dims.text_dim

    def _hash_vector(self, namespace: str, key: str, dim: int) -> torch.Tensor:
        cache_key = (f"{namespace}:{dim}", key)
        hit = self._cache.get(cache_key)
        if hit is not None:
            return hit
        rng = np.random.Generator(np.random.PCG64(_seed_for(f"{self.seed}:{namespace}:{dim}", key)))
        vec = torch.from_numpy(rng.standard_normal(dim) / np.sqrt(dim))
        self._cache[cache_key] = vec
        return vec

    def _hash_matrix(self, namespace: str, key: str, rows: int, cols: int) -> torch.Tensor:
        rng = np.random.Generator(np.random.PCG64(_seed_for(f"{self.seed}:{namespace}:{rows}x{cols}", key)))
        return torch.from_numpy(rng.standard_normal((rows, cols)) / np.sqrt(cols))

    def _feature_vector(self, source: ImageSource) -> np.ndarray:
        resolved = resolve_image_source(source)
        if isinstance(resolved, str):
            return self._hash_vector("imgfeat", resolved, self.dims.vector_dim).numpy()
        return resolved

    def encode_image(self, source: ImageSource) -> torch.Tensor:
        feat = torch.from_numpy(np.asarray(self._feature_vector(source), dtype=np.float64))
        if feat.dim() != 1 or feat.numel() == 0:
            raise ValueError("image source must resolve to a non-empty 1-d feature vector")
        rows = []
        for c in range(self.dims.channels):
            proj = self._hash_matrix("imgproj", f"{c}:{feat.numel()}", self.dims.image_dim, feat.numel())
            rows.append(proj @ feat)
        return torch.stack(rows)

    def image_vector(self, source: ImageSource) -> torch.Tensor:
        feat = torch.from_numpy(np.asarray(self._feature_vector(source), dtype=np.float64))
        if feat.numel() != self.dims.vector_dim:
            proj = self._hash_matrix("imgvec", str(feat.numel()), self.dims.vector_dim, feat.numel())
            feat = proj @ feat
        return _normalize(feat)

    def _token_vectors(self, text: str) -> list[torch.Tensor]:
        return [self._hash_vector("tok", t, self.dims.text_dim) for t in self.tokenizer.tokenize(text)]

    def encode_text(self, text: str) -> TextFeature:
        vecs = self._token_vectors(text)[: self.dims.seq_len]
        s, d = self.dims.seq_len, self.dims.text_dim
        tokens = torch.zeros((s, d), dtype=torch.float64)
        mask = torch.zeros(s, dtype=torch.bool)
        for i, v in enumerate(vecs):
            tokens[i] = v
            mask[i] = True
        return TextFeature(tokens=tokens, mask=mask, summary=self.summary(text))

    def summary(self, text: str) -> torch.Tensor:
        vecs = self._token_vectors(text)
        if not vecs:
            return self._hash_vector("sum-empty", "", self.dims.text_dim)
        return torch.stack(vecs).mean(dim=0)

    def text_vector(self, text: str) -> torch.Tensor:
        vecs = [self._hash_vector("tv", t, self.dims.vector_dim) for t in self.tokenizer.tokenize(text)]
        if not vecs:
            return _normalize(self._hash_vector("tv-empty", "", self.dims.vector_dim))
        return _normalize(torch.stack(vecs).mean(dim=0))


def encode_reference(x: ImageSource, backend: EncoderBackend) -> torch.Tensor:
    """Visual feature matrix (C, D_I) of a reference or target image."""
    return backend.encode_image(x)


def encode_modtext(text: str, backend: EncoderBackend) -> TextFeature:
    """Token feature matrix (S, D_T) with padding mask and summary vector."""
    return backend.encode_text(text)


def _normalize(v: torch.Tensor, eps: float = 1e-12) -> torch.Tensor:
    return v / torch.linalg.vector_norm(v).clamp_min(eps)


normalize = _normalize
