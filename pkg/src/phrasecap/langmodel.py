"""Tag-factorized trigram language model over phrase sequences.

Sentence probability factors into P(phrase | tag, context) * P(tag | context)
per step, with contexts of two phrase ids, START padding at the front and a
predicted END transition at the period. Probabilities are exact count ratios;
no smoothing, unseen events have probability zero.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable

from .corpus import ChunkedSentence, PhraseVocabulary, extract_phrases

START_ID = -1
END_ID = -2
END_TAG = "END"

Context = tuple[int, int]


@dataclass(frozen=True)
class PhraseSequence:
    """Ordered (phrase id, tag) items ending in exactly one END marker."""

    items: tuple[tuple[int, str], ...]

    def __post_init__(self):
        if not self.items:
            raise ValueError("sequence is empty")
        if self.items[-1] != (END_ID, END_TAG):
            raise ValueError("sequence must end with the END marker")
        if any(pid == END_ID for pid, _ in self.items[:-1]):
            raise ValueError("END marker may only appear at the last position")

    @classmethod
    def from_phrases(cls, items: Iterable[tuple[int, str]]) -> "PhraseSequence":
        """Append the END marker to a nonempty sequence of (phrase id, tag) pairs."""
        items = tuple(items)
        if not items:
            raise ValueError("sequence has no phrases")
        return cls(items + ((END_ID, END_TAG),))

    @property
    def phrase_ids(self) -> tuple[int, ...]:
        return tuple(pid for pid, _ in self.items[:-1])


def sequences_from_corpus(
    corpus: Iterable[ChunkedSentence],
    vocab: PhraseVocabulary,
) -> list[PhraseSequence]:
    """Training sequences: per-sentence in-vocabulary phrase ids plus END.

    Out-of-vocabulary phrases are dropped (the sequence closes up around
    them); sentences left with no phrase are skipped entirely.
    """
    sequences = []
    for sentence in corpus:
        items = []
        for phrase in extract_phrases(sentence):
            phrase_id = vocab.get(phrase)
            if phrase_id is not None:
                items.append((phrase_id, phrase.tag))
        if items:
            sequences.append(PhraseSequence.from_phrases(items))
    return sequences


class TrigramModel:
    """Integer trigram count tables with on-demand ratio probabilities."""

    FORMAT = "phrase-trigram-counts"
    VERSION = 1

    def __init__(self, counts: dict[Context, dict[str, dict[int, int]]]):
        self._counts = counts
        self._tag_totals: dict[Context, dict[str, int]] = {}
        self._context_totals: dict[Context, int] = {}
        for ctx, by_tag in counts.items():
            totals = {tag: sum(by_phrase.values()) for tag, by_phrase in by_tag.items()}
            self._tag_totals[ctx] = totals
            self._context_totals[ctx] = sum(totals.values())

    @classmethod
    def estimate(cls, sequences: Iterable[PhraseSequence]) -> "TrigramModel":
        """Count (context, tag, phrase) events over START-padded sequences."""
        counts: dict[Context, dict[str, dict[int, int]]] = {}
        n = 0
        for seq in sequences:
            n += 1
            ctx: Context = (START_ID, START_ID)
            for phrase_id, tag in seq.items:
                by_tag = counts.setdefault(ctx, {})
                by_phrase = by_tag.setdefault(tag, {})
                by_phrase[phrase_id] = by_phrase.get(phrase_id, 0) + 1
                ctx = (ctx[1], phrase_id)
        if n == 0:
            raise ValueError("no sequences to estimate from")
        return cls(counts)

    def contexts(self) -> list[Context]:
        return list(self._counts.keys())

    def tag_prob(self, ctx: Context, tag: str) -> float:
        """P(tag | context) as a count ratio; 0.0 for unseen pairs."""
        total = self._context_totals.get(ctx, 0)
        if total == 0:
            return 0.0
        return self._tag_totals[ctx].get(tag, 0) / total

    def phrase_prob(self, ctx: Context, tag: str, phrase_id: int) -> float:
        """P(phrase | tag, context); 0.0 for unseen events."""
        tag_total = self._tag_totals.get(ctx, {}).get(tag, 0)
        if tag_total == 0:
            return 0.0
        return self._counts[ctx][tag].get(phrase_id, 0) / tag_total

    def transition_prob(self, ctx: Context, tag: str, phrase_id: int) -> float:
        """The factored step probability P(phrase | tag, ctx) * P(tag | ctx).

        The tag totals cancel, so this is computed as the single ratio
        n(ctx, tag, phrase) / n(ctx); one division keeps the factorization
        identity exact in floating point.
        """
        total = self._context_totals.get(ctx, 0)
        if total == 0:
            return 0.0
        return self._counts[ctx].get(tag, {}).get(phrase_id, 0) / total

    def tag_distribution(self, ctx: Context) -> dict[str, float]:
        total = self._context_totals.get(ctx, 0)
        if total == 0:
            return {}
        return {tag: c / total for tag, c in self._tag_totals[ctx].items()}

    def phrase_distribution(self, ctx: Context, tag: str) -> dict[int, float]:
        tag_total = self._tag_totals.get(ctx, {}).get(tag, 0)
        if tag_total == 0:
            return {}
        return {pid: c / tag_total for pid, c in self._counts[ctx][tag].items()}

    def transitions_from(
        self,
        ctx: Context,
        allowed_tags: Iterable[str],
    ) -> list[tuple[int, str, float]]:
        """All positive-probability continuations with a tag in the allowed set,
        sorted by descending probability (ties by phrase id, then tag)."""
        allowed = set(allowed_tags)
        total = self._context_totals.get(ctx, 0)
        out = []
        for tag, by_phrase in self._counts.get(ctx, {}).items():
            if tag not in allowed:
                continue
            for phrase_id, count in by_phrase.items():
                out.append((phrase_id, tag, count / total))
        out.sort(key=lambda e: (-e[2], e[0], e[1]))
        return out

    def sequence_log_prob(self, seq: PhraseSequence) -> float:
        """Natural-log probability of the sequence incl. the END transition; -inf on any zero factor."""
        logprob = 0.0
        ctx: Context = (START_ID, START_ID)
        for phrase_id, tag in seq.items:
            p = self.transition_prob(ctx, tag, phrase_id)
            if p == 0.0:
                return -math.inf
            logprob += math.log(p)
            ctx = (ctx[1], phrase_id)
        return logprob

    # -- persistence: integer counts only, so ratios survive a round trip --

    def as_dict(self) -> dict:
        contexts = {}
        for (a, b), by_tag in self._counts.items():
            contexts[f"{a},{b}"] = {
                tag: {str(pid): c for pid, c in by_phrase.items()}
                for tag, by_phrase in by_tag.items()
            }
        return {"format": self.FORMAT, "version": self.VERSION, "contexts": contexts}

    @classmethod
    def from_dict(cls, data: dict) -> "TrigramModel":
        if data.get("format") != cls.FORMAT:
            raise ValueError(f"not a {cls.FORMAT} file")
        if data.get("version") != cls.VERSION:
            raise ValueError(
                f"unsupported version {data.get('version')!r}, expected {cls.VERSION}"
            )
        counts: dict[Context, dict[str, dict[int, int]]] = {}
        for key, by_tag in data["contexts"].items():
            a, b = key.split(",")
            counts[(int(a), int(b))] = {
                tag: {int(pid): int(c) for pid, c in by_phrase.items()}
                for tag, by_phrase in by_tag.items()
            }
        return cls(counts)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.as_dict(), f, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path) -> "TrigramModel":
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    def __eq__(self, other):
        if not isinstance(other, TrigramModel):
            return NotImplemented
        return self._counts == other._counts
