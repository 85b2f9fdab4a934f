"""Tokenizing, chunking, and deterministic text embeddings.

A token is a whitespace-delimited word (punctuation stays attached).
Embeddings are hashed term frequencies over a fixed 256-bucket space with a
keyed 64-bit hash, so identical text embeds identically on every platform
and run; no model weights, no randomness.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

EMBEDDING_DIM = 256
DEFAULT_CHUNK_TOKENS = 700

_HASH_KEY = b"flexlane-embed-v1"


@dataclass(frozen=True)
class Chunk:
    source_id: str
    ordinal: int
    text: str
    token_count: int


def tokenize(text: str) -> list[str]:
    return text.split()


def chunk_document(text: str, max_tokens: int = DEFAULT_CHUNK_TOKENS,
                   source_id: str = "doc") -> list[Chunk]:
    """Greedy packing: each chunk takes the longest prefix of remaining
    tokens that fits, so all chunks except the last hold exactly max_tokens."""
    if max_tokens < 1:
        raise ValueError("max_tokens must be >= 1")
    tokens = tokenize(text)
    chunks: list[Chunk] = []
    for ordinal, start in enumerate(range(0, len(tokens), max_tokens)):
        piece = tokens[start:start + max_tokens]
        chunks.append(Chunk(
            source_id=source_id, ordinal=ordinal,
            text=" ".join(piece), token_count=len(piece),
        ))
    return chunks


def _bucket(token: str) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=_HASH_KEY).digest()
    return int.from_bytes(digest, "big") % EMBEDDING_DIM


def embed_text(text: str) -> tuple[float, ...]:
    """L2-normalized hashed term-frequency vector; zero vector for empty text."""
    counts = [0.0] * EMBEDDING_DIM
    tokens = tokenize(text)
    if not tokens:
        return tuple(counts)
    for token in tokens:
        counts[_bucket(token)] += 1.0
    norm = math.sqrt(sum(c * c for c in counts))
    return tuple(c / norm for c in counts)


def cosine(a: tuple[float, ...], b: tuple[float, ...]) -> float:
    return sum(x * y for x, y in zip(a, b))
