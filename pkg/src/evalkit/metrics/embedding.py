"""Greedy embedding-matching similarity (BERTScore-style) over per-token
vectors supplied by a pluggable provider."""

from __future__ import annotations

import hashlib
from typing import Protocol

import numpy as np

from ..errors import ConfigurationError, MetricError
from .ngram import PRF, _f1
from .tokenizer import tokenize


class TokenEmbeddingProvider(Protocol):
    """Returns one unit-normalized vector per token of the given text."""

    def embed(self, text: str) -> tuple[list[str], np.ndarray]: ...


_EMBEDDERS: dict[str, TokenEmbeddingProvider] = {}


def register_embedder(name: str, provider: TokenEmbeddingProvider) -> None:
    _EMBEDDERS[name] = provider


def get_embedder(name: str) -> TokenEmbeddingProvider:
    if name not in _EMBEDDERS:
        raise ConfigurationError(
            f"unknown embedder {name!r}; registered: " + ", ".join(sorted(_EMBEDDERS))
        )
    return _EMBEDDERS[name]


def bert_score(
    candidate: str, reference: str, embedder: TokenEmbeddingProvider
) -> PRF:
    """Greedy matching of token embeddings by cosine similarity.

    Recall averages, over reference tokens, the best similarity to any
    candidate token; precision is symmetric; no idf weighting or baseline
    rescaling is applied.
    """
    cand_tokens, cand_vecs = embedder.embed(candidate)
    ref_tokens, ref_vecs = embedder.embed(reference)
    if not cand_tokens or not ref_tokens:
        return PRF(0.0, 0.0, 0.0)

    cand_vecs = _unit_rows(np.asarray(cand_vecs, dtype=np.float64))
    ref_vecs = _unit_rows(np.asarray(ref_vecs, dtype=np.float64))
    sim = cand_vecs @ ref_vecs.T
    precision = float(sim.max(axis=1).mean())
    recall = float(sim.max(axis=0).mean())
    return PRF(precision, recall, _f1(precision, recall))


def _unit_rows(vecs: np.ndarray) -> np.ndarray:
    if vecs.ndim != 2:
        raise MetricError(f"embedder must return a 2-D array, got shape {vecs.shape}")
    norms = np.linalg.norm(vecs, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise MetricError("embedder returned a zero vector")
    return vecs / norms


class HashEmbedder:
    """Deterministic context-free embedder: token bytes hash to a fixed
    pseudo-random unit vector. Identical tokens match exactly; distinct
    tokens land in near-orthogonal directions."""

    def __init__(self, dim: int = 32):
        self.dim = dim
        self._cache: dict[str, np.ndarray] = {}

    def _vector(self, token: str) -> np.ndarray:
        if token not in self._cache:
            need = self.dim * 2
            raw = b""
            counter = 0
            while len(raw) < need:
                raw += hashlib.sha256(f"{token}#{counter}".encode("utf-8")).digest()
                counter += 1
            ints = np.frombuffer(raw[:need], dtype=np.uint16).astype(np.float64)
            vec = ints / 65535.0 - 0.5
            self._cache[token] = vec / np.linalg.norm(vec)
        return self._cache[token]

    def embed(self, text: str) -> tuple[list[str], np.ndarray]:
        tokens = tokenize(text)
        if not tokens:
            return [], np.zeros((0, self.dim))
        return tokens, np.stack([self._vector(t) for t in tokens])


class FixedEmbedder:
    """Test embedder mapping each token to a preassigned vector."""

    def __init__(self, vectors: dict[str, tuple[float, ...]]):
        self.vectors = {k: np.asarray(v, dtype=np.float64) for k, v in vectors.items()}

    def embed(self, text: str) -> tuple[list[str], np.ndarray]:
        tokens = tokenize(text)
        missing = [t for t in tokens if t not in self.vectors]
        if missing:
            raise MetricError(f"no fixed vector for tokens: {missing}")
        if not tokens:
            return [], np.zeros((0, 1))
        return tokens, np.stack([self.vectors[t] for t in tokens])


register_embedder("hash", HashEmbedder())
