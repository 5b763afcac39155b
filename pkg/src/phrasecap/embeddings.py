"""Pre-trained word vectors and averaged phrase representations.

Phrase vectors initialize the phrase-side matrix of the bilinear model;
the word vectors themselves are ingested from file, never trained here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, TextIO

import numpy as np

from .corpus import Phrase, PhraseVocabulary

FALLBACK_SCALE = 0.05  # uniform init half-width for phrases with no known words


class EmbeddingFormatError(ValueError):
    """The embedding file violates the one-word-plus-m-reals line format."""


@dataclass
class EmbeddingTable:
    """Immutable word -> vector map with a single shared dimension."""

    dimension: int
    entries: dict[str, np.ndarray]

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, word: str) -> bool:
        return word in self.entries

    def vector(self, word: str) -> np.ndarray:
        return self.entries[word]


def parse_embeddings(source: Iterable[str] | TextIO) -> EmbeddingTable:
    """Read "word v1 .. vm" lines; the first line fixes the dimension m."""
    entries: dict[str, np.ndarray] = {}
    dimension = None
    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split(" ")
        word, values = parts[0], parts[1:]
        if dimension is None:
            if not values:
                raise EmbeddingFormatError(f"line {lineno}: no vector components")
            dimension = len(values)
        elif len(values) != dimension:
            raise EmbeddingFormatError(
                f"line {lineno}: expected {dimension} components, got {len(values)}"
            )
        if word in entries:
            raise EmbeddingFormatError(f"line {lineno}: duplicate word {word!r}")
        try:
            vector = np.array([float(v) for v in values], dtype=np.float64)
        except ValueError as exc:
            raise EmbeddingFormatError(f"line {lineno}: non-numeric component: {exc}") from exc
        entries[word] = vector
    if not entries:
        raise EmbeddingFormatError("no entries")
    return EmbeddingTable(dimension=dimension, entries=entries)


def load_embeddings(path) -> EmbeddingTable:
    with open(path, encoding="utf-8") as f:
        return parse_embeddings(f)


def phrase_vector(phrase: Phrase, table: EmbeddingTable) -> np.ndarray | None:
    """Mean of the phrase's in-table word vectors; None when no word is covered.

    Out-of-table words are skipped, so a partially covered phrase averages
    over its known words only.
    """
    vectors = [table.entries[w] for w in phrase.words if w in table.entries]
    if not vectors:
        return None
    return np.mean(vectors, axis=0)


def init_phrase_matrix(
    vocab: PhraseVocabulary,
    table: EmbeddingTable,
    seed: int = 0,
) -> tuple[np.ndarray, list[int]]:
    """Build the m x |C| phrase matrix, column per vocabulary id.

    Columns for phrases with no covered words are drawn from a seeded
    uniform(-0.05, 0.05) so they start near zero score; their ids are
    returned for reporting. Deterministic for a fixed seed.
    """
    if len(vocab) == 0:
        raise ValueError("vocabulary is empty")
    rng = np.random.default_rng(seed)
    matrix = np.empty((table.dimension, len(vocab)), dtype=np.float64)
    skipped = []
    for phrase_id, phrase in enumerate(vocab.phrases):
        vector = phrase_vector(phrase, table)
        if vector is None:
            skipped.append(phrase_id)
            vector = rng.uniform(-FALLBACK_SCALE, FALLBACK_SCALE, size=table.dimension)
        matrix[:, phrase_id] = vector
    return matrix, skipped
