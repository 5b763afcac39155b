"""Sentence generation: per-type phrase prediction, constrained beam search, re-ranking.

The decoder walks a small automaton: a sentence starts with a noun phrase,
every noun phrase is followed by a verb phrase, a prepositional phrase, or
the terminal period, and every verb/prepositional phrase is followed by a
noun phrase. Complete sentences carry 2 to 4 noun phrases, never repeat a
phrase, and only use steps whose trigram transition probability clears the
threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .bilinear import BilinearModel, VocabularyMismatchError, score_all, _check_features
from .corpus import Phrase, PhraseVocabulary
from .langmodel import END_ID, END_TAG, START_ID, TrigramModel

EXPECT_NP = "expect_np"
AFTER_NP = "after_np"

MAX_NOUN_PHRASES = 4
MIN_NOUN_PHRASES = 2


@dataclass
class PhraseSelection:
    """Top-ranked phrase ids per type for one image, with their bilinear scores."""

    np_ids: list[int]
    vp_ids: list[int]
    pp_ids: list[int]
    scores: dict[int, float]

    def by_tag(self, tag: str) -> list[int]:
        return {"NP": self.np_ids, "VP": self.vp_ids, "PP": self.pp_ids}[tag]

    def __len__(self) -> int:
        return len(self.np_ids) + len(self.vp_ids) + len(self.pp_ids)


@dataclass(frozen=True)
class Hypothesis:
    """Partial sentence state during beam search."""

    items: tuple[tuple[int, str], ...]
    used: frozenset
    np_count: int
    log_prob: float
    state: str
    context: tuple[int, int]


@dataclass
class GeneratedSentence:
    """A completed decode: phrase sequence, LM log-probability, image-match score."""

    phrases: list[Phrase]
    phrase_ids: tuple[int, ...]
    log_prob: float
    text: str
    match_score: float | None = None


def predict_phrases(
    model: BilinearModel,
    vocab: PhraseVocabulary,
    z: np.ndarray,
    np_cap: int = 20,
    vp_cap: int = 5,
    pp_cap: int = 5,
) -> PhraseSelection:
    """Top-k phrases per type by bilinear score, ties broken toward smaller ids."""
    for name, cap in (("np_cap", np_cap), ("vp_cap", vp_cap), ("pp_cap", pp_cap)):
        if cap < 1:
            raise ValueError(f"{name} must be >= 1, got {cap}")
    if model.vocab_fingerprint != vocab.fingerprint():
        raise VocabularyMismatchError("model fingerprint does not match this vocabulary")
    scores = score_all(model, z)

    def top(tag: str, cap: int) -> list[int]:
        ids = vocab.ids_by_tag(tag)
        ids.sort(key=lambda i: (-scores[i], i))
        return ids[:cap]

    np_ids = top("NP", np_cap)
    vp_ids = top("VP", vp_cap)
    pp_ids = top("PP", pp_cap)
    selected = np_ids + vp_ids + pp_ids
    return PhraseSelection(
        np_ids=np_ids,
        vp_ids=vp_ids,
        pp_ids=pp_ids,
        scores={i: float(scores[i]) for i in selected},
    )


def render(sentence: GeneratedSentence) -> str:
    """Surface form: phrase words joined by spaces, then the final period token."""
    return render_phrases(sentence.phrases)


def render_phrases(phrases: list[Phrase]) -> str:
    if not phrases:
        raise ValueError("cannot render an empty sentence")
    return " ".join(w for p in phrases for w in p.words) + " ."


def decode(
    selection: PhraseSelection,
    vocab: PhraseVocabulary,
    lm: TrigramModel,
    beam_width: int = 100,
    prob_threshold: float = 0.01,
    max_sentences: int = 1000,
) -> list[GeneratedSentence]:
    """Beam search over the constrained automaton; returns completed sentences.

    Candidates are restricted to the selection; a step survives only when its
    transition probability P(c | t, ctx) * P(t | ctx) is strictly greater
    than ``prob_threshold``. An empty result just means no legal sentence
    exists. Output is sorted by descending log-probability and capped at
    ``max_sentences``.
    """
    if beam_width < 1:
        raise ValueError(f"beam_width must be >= 1, got {beam_width}")
    if not 0.0 <= prob_threshold < 1.0:
        raise ValueError(f"prob_threshold must be in [0, 1), got {prob_threshold}")

    noun_candidates = [(pid, "NP") for pid in selection.np_ids]
    connector_candidates = [(pid, "VP") for pid in selection.vp_ids] + [
        (pid, "PP") for pid in selection.pp_ids
    ]

    start = Hypothesis(
        items=(),
        used=frozenset(),
        np_count=0,
        log_prob=0.0,
        state=EXPECT_NP,
        context=(START_ID, START_ID),
    )
    frontier = [start]
    completed: list[Hypothesis] = []
    while frontier:
        expansions: list[Hypothesis] = []
        for hyp in frontier:
            if hyp.state == EXPECT_NP:
                if hyp.np_count >= MAX_NOUN_PHRASES:
                    continue
                candidates = noun_candidates
            else:
                candidates = connector_candidates
                if hyp.np_count >= MIN_NOUN_PHRASES:
                    p_end = lm.transition_prob(hyp.context, END_TAG, END_ID)
                    if p_end > prob_threshold:
                        completed.append(
                            replace(hyp, log_prob=hyp.log_prob + math.log(p_end))
                        )
            for pid, tag in candidates:
                if pid in hyp.used:
                    continue
                p = lm.transition_prob(hyp.context, tag, pid)
                if p <= prob_threshold:
                    continue
                expansions.append(
                    Hypothesis(
                        items=hyp.items + ((pid, tag),),
                        used=hyp.used | {pid},
                        np_count=hyp.np_count + (tag == "NP"),
                        log_prob=hyp.log_prob + math.log(p),
                        state=AFTER_NP if tag == "NP" else EXPECT_NP,
                        context=(hyp.context[1], pid),
                    )
                )
        # stable sort: ties keep construction order, lengths compete together
        expansions.sort(key=lambda h: -h.log_prob)
        frontier = expansions[:beam_width]

    completed.sort(key=lambda h: (-h.log_prob, tuple(pid for pid, _ in h.items)))
    sentences = []
    for hyp in completed[:max_sentences]:
        phrases = [vocab.phrase(pid) for pid, _ in hyp.items]
        sentences.append(
            GeneratedSentence(
                phrases=phrases,
                phrase_ids=tuple(pid for pid, _ in hyp.items),
                log_prob=hyp.log_prob,
                text=render_phrases(phrases),
            )
        )
    return sentences


def rerank(
    model: BilinearModel,
    z: np.ndarray,
    sentences: list[GeneratedSentence],
) -> tuple[GeneratedSentence, list[GeneratedSentence]]:
    """Score each sentence by the mean bilinear score of its phrases and rank.

    Ordering: descending match score, then descending log-probability, then
    text. Returns (winner, full ranking) with match scores filled in.
    """
    if not sentences:
        raise ValueError("no sentences to rank")
    z = _check_features(model, z)
    projected = model.V @ z
    scored = []
    for sentence in sentences:
        ids = list(sentence.phrase_ids)
        match = float(np.mean(model.U[:, ids].T @ projected))
        scored.append(replace(sentence, match_score=match))
    scored.sort(key=lambda s: (-s.match_score, -s.log_prob, s.text))
    return scored[0], scored
