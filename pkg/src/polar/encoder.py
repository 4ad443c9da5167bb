"""Deterministic text embeddings and cosine similarity.

The builtin encoder lowercases the text, extracts character n-grams
(n=3 by default), and feature-hashes them into a fixed-width signed
vector: FNV-1a 64-bit picks the bucket (hash mod dim) and the top hash
bit picks the sign. The result is L2-normalized, so identical strings
always embed identically and unrelated strings are near-orthogonal.
Empty text maps to the zero vector, which scores 0 against everything.

A remote mode posts {"texts": [...]} to an HTTP endpoint and expects
{"embeddings": [[...], ...]} back, one vector per input text.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import requests

from .errors import EncoderUnavailable, RejectedInput

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a_64(data: bytes, seed: int = 0) -> int:
    """FNV-1a 64-bit hash; the seed is folded into the offset basis (seed 0 = canonical)."""
    h = _FNV_OFFSET ^ (seed & _MASK64)
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


@dataclass(frozen=True)
class EncoderConfig:
    mode: str = "builtin"  # "builtin" | "remote"
    dim: int = 256
    ngram: int = 3
    endpoint: str | None = None
    timeout_s: float = 5.0

    def __post_init__(self):
        if self.mode not in ("builtin", "remote"):
            raise RejectedInput(f"unknown encoder mode {self.mode!r}")
        if self.dim < 16:
            raise RejectedInput(f"embedding dim must be >= 16, got {self.dim}")
        if self.ngram < 2:
            raise RejectedInput(f"ngram size must be >= 2, got {self.ngram}")
        if self.mode == "remote" and not self.endpoint:
            raise RejectedInput("remote encoder mode requires an endpoint")


DEFAULT_ENCODER = EncoderConfig()


@lru_cache(maxsize=16384)
def _hash_text(dim: int, ngram: int, text: str) -> tuple[float, ...]:
    lowered = text.lower()
    if not lowered:
        return (0.0,) * dim
    if len(lowered) < ngram:
        grams = [lowered]  # whole short text as a single gram keeps non-empty => unit norm
    else:
        grams = [lowered[i : i + ngram] for i in range(len(lowered) - ngram + 1)]
    vec = [0.0] * dim
    for gram in grams:
        h = fnv1a_64(gram.encode("utf-8"))
        sign = 1.0 if (h >> 63) == 0 else -1.0
        vec[h % dim] += sign
    norm = math.sqrt(sum(v * v for v in vec))
    if norm == 0.0:
        # Pathological exact sign cancellation across distinct grams; fall back to a
        # single whole-text bucket so non-empty text is always unit norm.
        vec[fnv1a_64(lowered.encode("utf-8"), seed=1) % dim] = 1.0
        norm = 1.0
    return tuple(v / norm for v in vec)


def encode(text: str, config: EncoderConfig = DEFAULT_ENCODER) -> np.ndarray:
    """Embed one text. Builtin mode is pure and deterministic; remote mode may raise
    EncoderUnavailable."""
    if config.mode == "builtin":
        return np.array(_hash_text(config.dim, config.ngram, text), dtype=np.float64)
    return encode_batch([text], config)[0]


def encode_batch(texts: list[str], config: EncoderConfig = DEFAULT_ENCODER) -> list[np.ndarray]:
    if config.mode == "builtin":
        return [encode(t, config) for t in texts]
    try:
        resp = requests.post(config.endpoint, json={"texts": list(texts)}, timeout=config.timeout_s)
    except requests.RequestException as exc:
        raise EncoderUnavailable(f"encoder endpoint unreachable: {exc}") from exc
    if resp.status_code // 100 != 2:
        raise EncoderUnavailable(f"encoder endpoint returned HTTP {resp.status_code}")
    try:
        payload = resp.json()
        rows = payload["embeddings"]
    except (ValueError, KeyError, TypeError) as exc:
        raise EncoderUnavailable(f"malformed encoder response: {exc}") from exc
    if not isinstance(rows, list) or len(rows) != len(texts):
        raise EncoderUnavailable(
            f"encoder returned {len(rows) if isinstance(rows, list) else '?'} rows for {len(texts)} texts"
        )
    out = []
    for row in rows:
        arr = np.asarray(row, dtype=np.float64)
        if arr.ndim != 1 or arr.shape[0] != config.dim:
            raise EncoderUnavailable(f"embedding dimension mismatch: got {arr.shape}, want ({config.dim},)")
        out.append(arr)
    return out


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity in [-1, 1]; zero vectors score 0 against everything."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise RejectedInput(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(min(1.0, max(-1.0, float(np.dot(a, b)) / (na * nb))))
