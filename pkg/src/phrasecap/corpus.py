"""Chunk-annotated caption corpora: ingestion, phrase extraction, vocabulary, syntax statistics.

Captions arrive pre-chunked (IOB2 labels over NP/VP/PP/ADVP); nothing here
tokenizes or chunks raw text.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, TextIO

PHRASE_TAGS = ("NP", "VP", "PP")
CHUNK_TYPES = ("NP", "VP", "PP", "ADVP")
VALID_TAGS = frozenset(
    [f"{p}-{t}" for t in CHUNK_TYPES for p in ("B", "I")] + ["O"]
)


class CaptionFormatError(ValueError):
    """A caption record violates the file format or IOB invariants."""


@dataclass(frozen=True)
class ChunkedSentence:
    """One caption sentence with per-token IOB2 chunk labels."""

    image_id: str
    sentence_id: str
    tokens: tuple[str, ...]
    tags: tuple[str, ...]


@dataclass(frozen=True)
class Phrase:
    """A typed constituent: ordered words plus one of the NP/VP/PP tags.

    Equality and hashing go through ``canonical_key``, so two phrases with
    the same lowercase word sequence and tag are the same phrase.
    """

    words: tuple[str, ...]
    tag: str

    def __post_init__(self):
        if len(self.words) < 1:
            raise ValueError("phrase needs at least one word")
        if self.tag not in PHRASE_TAGS:
            raise ValueError(f"phrase tag must be one of {PHRASE_TAGS}, got {self.tag!r}")

    @property
    def canonical_key(self) -> str:
        return " ".join(w.lower() for w in self.words) + "|" + self.tag

    @property
    def text(self) -> str:
        return " ".join(self.words)

    def __eq__(self, other):
        if not isinstance(other, Phrase):
            return NotImplemented
        return self.canonical_key == other.canonical_key

    def __hash__(self):
        return hash(self.canonical_key)


@dataclass(frozen=True)
class SentenceStructure:
    """A tag pattern such as (NP, VP, NP) with its corpus count and rank stats."""

    pattern: tuple[str, ...]
    count: int
    frequency: float
    cumulative: float


@dataclass
class SyntaxStats:
    """Per-sentence phrase-count histograms and the ranked structure distribution."""

    sentence_count: int
    histograms: dict[str, list[int]]
    structures: list[SentenceStructure]

    def as_dict(self) -> dict:
        return {
            "sentence_count": self.sentence_count,
            "histograms": self.histograms,
            "structures": [
                {
                    "pattern": " ".join(s.pattern),
                    "count": s.count,
                    "frequency": s.frequency,
                    "cumulative": s.cumulative,
                }
                for s in self.structures
            ],
        }


@dataclass
class PhraseVocabulary:
    """Frequency-thresholded phrase inventory with dense, stable integer ids.

    Ids run 0..len-1 in sorted canonical-key order, so the same corpus and
    threshold always produce the same mapping.
    """

    phrases: list[Phrase]
    counts: list[int]
    threshold: int
    index: dict[str, int] = field(init=False)

    def __post_init__(self):
        self.index = {p.canonical_key: i for i, p in enumerate(self.phrases)}

    def __len__(self) -> int:
        return len(self.phrases)

    def __contains__(self, phrase: Phrase) -> bool:
        return phrase.canonical_key in self.index

    def id_of(self, phrase: Phrase) -> int:
        return self.index[phrase.canonical_key]

    def get(self, phrase: Phrase) -> int | None:
        return self.index.get(phrase.canonical_key)

    def phrase(self, phrase_id: int) -> Phrase:
        return self.phrases[phrase_id]

    def tag_of(self, phrase_id: int) -> str:
        return self.phrases[phrase_id].tag

    def ids_by_tag(self, tag: str) -> list[int]:
        return [i for i, p in enumerate(self.phrases) if p.tag == tag]

    def per_type_totals(self) -> dict[str, int]:
        """Number of distinct vocabulary phrases per type, plus the grand total."""
        totals = {tag: 0 for tag in PHRASE_TAGS}
        for p in self.phrases:
            totals[p.tag] += 1
        totals["total"] = len(self.phrases)
        return totals

    def fingerprint(self) -> bytes:
        """SHA-256 over the id-ordered canonical keys; binds models to this vocabulary."""
        payload = "\n".join(p.canonical_key for p in self.phrases)
        return hashlib.sha256(payload.encode("utf-8")).digest()

    def as_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "phrases": [
                {"words": list(p.words), "tag": p.tag, "count": c}
                for p, c in zip(self.phrases, self.counts)
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PhraseVocabulary":
        phrases = [Phrase(tuple(e["words"]), e["tag"]) for e in data["phrases"]]
        counts = [int(e["count"]) for e in data["phrases"]]
        return cls(phrases=phrases, counts=counts, threshold=int(data["threshold"]))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.as_dict(), f, indent=2)

    @classmethod
    def load(cls, path) -> "PhraseVocabulary":
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


def _validate_tags(tokens, tags):
    """Raise on invalid labels or an I- tag that does not continue its chunk."""
    if len(tokens) != len(tags):
        raise CaptionFormatError(f"{len(tokens)} tokens but {len(tags)} tags")
    for i, tag in enumerate(tags):
        if tag not in VALID_TAGS:
            raise CaptionFormatError(f"unknown chunk tag {tag!r} at position {i}")
        if tag.startswith("I-"):
            kind = tag[2:]
            prev = tags[i - 1] if i > 0 else None
            if prev not in (f"B-{kind}", f"I-{kind}"):
                raise CaptionFormatError(
                    f"I-{kind} at position {i} does not continue a {kind} chunk"
                )


def parse_captions(source: Iterable[str] | TextIO) -> list[ChunkedSentence]:
    """Parse a JSON Lines caption stream into validated ChunkedSentences.

    Each line is an object with string ``image_id`` and ``sentence_id`` and
    parallel ``tokens``/``tags`` arrays. Tokens are lowercased here so later
    embedding lookups see a single casing. Errors name the offending line.
    """
    sentences = []
    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CaptionFormatError(f"line {lineno}: invalid JSON: {exc}") from exc
        if not isinstance(record, dict):
            raise CaptionFormatError(f"line {lineno}: record is not an object")
        try:
            image_id = record["image_id"]
            sentence_id = record["sentence_id"]
            tokens = record["tokens"]
            tags = record["tags"]
        except KeyError as exc:
            raise CaptionFormatError(f"line {lineno}: missing field {exc.args[0]!r}") from exc
        if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
            raise CaptionFormatError(f"line {lineno}: tokens must be an array of strings")
        if not isinstance(tags, list) or not all(isinstance(t, str) for t in tags):
            raise CaptionFormatError(f"line {lineno}: tags must be an array of strings")
        try:
            _validate_tags(tokens, tags)
        except CaptionFormatError as exc:
            raise CaptionFormatError(f"line {lineno}: {exc}") from exc
        sentences.append(
            ChunkedSentence(
                image_id=str(image_id),
                sentence_id=str(sentence_id),
                tokens=tuple(t.lower() for t in tokens),
                tags=tuple(tags),
            )
        )
    return sentences


def load_captions(path) -> list[ChunkedSentence]:
    with open(path, encoding="utf-8") as f:
        return parse_captions(f)


def _chunk_spans(tags) -> list[tuple[int, int, str]]:
    """Maximal IOB2 spans as (start, end_exclusive, chunk_type), in order."""
    spans: list[list] = []
    for i, tag in enumerate(tags):
        if tag == "O":
            continue
        kind = tag[2:]
        if tag.startswith("I-") and spans and spans[-1][1] == i and spans[-1][2] == kind:
            spans[-1][1] = i + 1
        else:
            spans.append([i, i + 1, kind])
    return [tuple(s) for s in spans]


def extract_phrases(sentence: ChunkedSentence) -> list[Phrase]:
    """Turn chunk spans into Phrases, folding adverb chunks into adjacent verb chunks.

    An ADVP merges into one token-adjacent VP, preferring the following VP
    when both neighbors qualify; ADVPs with no adjacent VP are dropped, as are
    O tokens (the terminal period acts as the sentence-end marker downstream,
    never as a phrase).
    """
    spans = _chunk_spans(sentence.tags)
    absorb: dict[int, int] = {}  # ADVP span index -> receiving VP span index
    for idx, (start, end, kind) in enumerate(spans):
        if kind != "ADVP":
            continue
        nxt = spans[idx + 1] if idx + 1 < len(spans) else None
        prv = spans[idx - 1] if idx > 0 else None
        if nxt is not None and nxt[2] == "VP" and nxt[0] == end:
            absorb[idx] = idx + 1
        elif prv is not None and prv[2] == "VP" and prv[1] == start:
            absorb[idx] = idx - 1

    phrases = []
    for idx, (start, end, kind) in enumerate(spans):
        if kind not in PHRASE_TAGS:
            continue
        pieces = [(start, sentence.tokens[start:end])]
        for advp_idx, vp_idx in absorb.items():
            if vp_idx == idx:
                a_start, a_end, _ = spans[advp_idx]
                pieces.append((a_start, sentence.tokens[a_start:a_end]))
        pieces.sort()
        words = tuple(w for _, chunk in pieces for w in chunk)
        phrases.append(Phrase(words, kind))
    return phrases


def build_vocabulary(corpus: Iterable[ChunkedSentence], threshold: int = 10) -> PhraseVocabulary:
    """Count every extracted phrase and keep those occurring at least ``threshold`` times."""
    if threshold < 1:
        raise ValueError(f"threshold must be >= 1, got {threshold}")
    counts: Counter[Phrase] = Counter()
    for sentence in corpus:
        counts.update(extract_phrases(sentence))
    kept = sorted(
        (p for p, c in counts.items() if c >= threshold),
        key=lambda p: p.canonical_key,
    )
    return PhraseVocabulary(
        phrases=kept,
        counts=[counts[p] for p in kept],
        threshold=threshold,
    )


def syntax_stats(corpus: Iterable[ChunkedSentence]) -> SyntaxStats:
    """Histogram NP/VP/PP counts per sentence and rank the tag-pattern structures.

    Structure frequencies are over sentences with at least one phrase; the
    cumulative column is nondecreasing and ends at 1.0.
    """
    per_type: dict[str, list[int]] = {tag: [] for tag in PHRASE_TAGS}
    patterns: Counter[tuple[str, ...]] = Counter()
    n_sentences = 0
    for sentence in corpus:
        n_sentences += 1
        phrases = extract_phrases(sentence)
        tag_counts = Counter(p.tag for p in phrases)
        for tag in PHRASE_TAGS:
            per_type[tag].append(tag_counts.get(tag, 0))
        pattern = tuple(p.tag for p in phrases)
        if pattern:
            patterns[pattern] += 1

    histograms = {}
    for tag in PHRASE_TAGS:
        values = per_type[tag]
        buckets = [0] * (max(values) + 1 if values else 0)
        for v in values:
            buckets[v] += 1
        histograms[tag] = buckets

    total = sum(patterns.values())
    structures = []
    running = 0
    for pattern, count in sorted(patterns.items(), key=lambda kv: (-kv[1], kv[0])):
        running += count
        structures.append(
            SentenceStructure(
                pattern=pattern,
                count=count,
                frequency=count / total,
                cumulative=running / total,
            )
        )
    return SyntaxStats(sentence_count=n_sentences, histograms=histograms, structures=structures)


def group_by_image(corpus: Iterable[ChunkedSentence]) -> dict[str, list[ChunkedSentence]]:
    """Sentences grouped by image id, preserving corpus order."""
    grouped: dict[str, list[ChunkedSentence]] = {}
    for sentence in corpus:
        grouped.setdefault(sentence.image_id, []).append(sentence)
    return grouped


def ground_truth_phrases(
    image_id: str,
    corpus: Iterable[ChunkedSentence],
    vocab: PhraseVocabulary,
) -> set[int]:
    """Union of in-vocabulary phrase ids over all sentences describing the image."""
    found = False
    ids: set[int] = set()
    for sentence in corpus:
        if sentence.image_id != image_id:
            continue
        found = True
        for phrase in extract_phrases(sentence):
            phrase_id = vocab.get(phrase)
            if phrase_id is not None:
                ids.add(phrase_id)
    if not found:
        raise KeyError(f"unknown image id: {image_id!r}")
    return ids
