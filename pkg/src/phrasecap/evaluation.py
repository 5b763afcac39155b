"""Evaluation metrics: phrase-retrieval recall, corpus BLEU, human agreement, novelty.

BLEU is the original corpus-level formulation: clipped modified n-gram
precisions aggregated over the corpus, uniform-weight geometric mean, and a
multiplicative brevity penalty using the closest reference length (ties going
to the shorter reference). No smoothing.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .corpus import PHRASE_TAGS, PhraseVocabulary
from .generator import PhraseSelection


@dataclass
class RecallReport:
    """Retrieved-over-total recall per phrase type plus the overall figures."""

    per_type: dict[str, dict]
    overall_micro: float
    overall_macro: float
    retrieved_total: int
    ground_truth_total: int

    def as_dict(self) -> dict:
        return {
            "per_type": self.per_type,
            "overall_micro": self.overall_micro,
            "overall_macro": self.overall_macro,
            "retrieved_total": self.retrieved_total,
            "ground_truth_total": self.ground_truth_total,
        }


@dataclass
class BleuReport:
    scores: list[float]  # B-1 .. B-max_n
    precisions: list[float]
    correct: list[int]
    total: list[int]
    brevity_penalty: float
    candidate_length: int
    reference_length: int

    def as_dict(self) -> dict:
        return {
            "scores": {f"B-{k + 1}": s for k, s in enumerate(self.scores)},
            "precisions": self.precisions,
            "correct": self.correct,
            "total": self.total,
            "brevity_penalty": self.brevity_penalty,
            "candidate_length": self.candidate_length,
            "reference_length": self.reference_length,
        }


def phrase_recall(
    predictions: Mapping[str, PhraseSelection],
    ground_truth: Mapping[str, set[int]],
    vocab: PhraseVocabulary,
) -> RecallReport:
    """How many ground-truth phrases the per-type top-k predictions retrieve.

    Recall per type sums intersections over images and divides by the summed
    ground-truth counts (set semantics per image). Overall is reported both
    micro (count-weighted) and macro (mean of per-type recalls).
    """
    retrieved = {tag: 0 for tag in PHRASE_TAGS}
    totals = {tag: 0 for tag in PHRASE_TAGS}
    for image_id, selection in predictions.items():
        if image_id not in ground_truth:
            raise ValueError(f"image {image_id!r} has predictions but no ground truth")
        truth = ground_truth[image_id]
        for tag in PHRASE_TAGS:
            truth_tag = {pid for pid in truth if vocab.tag_of(pid) == tag}
            predicted = set(selection.by_tag(tag))
            retrieved[tag] += len(predicted & truth_tag)
            totals[tag] += len(truth_tag)

    per_type = {}
    macro_terms = []
    for tag in PHRASE_TAGS:
        recall = retrieved[tag] / totals[tag] if totals[tag] else 0.0
        per_type[tag] = {"retrieved": retrieved[tag], "total": totals[tag], "recall": recall}
        if totals[tag]:
            macro_terms.append(recall)
    retrieved_total = sum(retrieved.values())
    ground_truth_total = sum(totals.values())
    return RecallReport(
        per_type=per_type,
        overall_micro=retrieved_total / ground_truth_total if ground_truth_total else 0.0,
        overall_macro=sum(macro_terms) / len(macro_terms) if macro_terms else 0.0,
        retrieved_total=retrieved_total,
        ground_truth_total=ground_truth_total,
    )


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def corpus_bleu(
    candidates: Sequence[str],
    references: Sequence[Sequence[str]],
    max_n: int = 4,
) -> BleuReport:
    """Corpus BLEU up to ``max_n``-grams over whitespace-tokenized texts.

    ``references[i]`` holds all reference texts for ``candidates[i]``.
    A B-k score of 0.0 means some order-j precision (j <= k) was zero.
    """
    if not candidates:
        raise ValueError("no candidates to evaluate")
    if len(candidates) != len(references):
        raise ValueError(
            f"{len(candidates)} candidates but {len(references)} reference groups"
        )
    correct = [0] * max_n
    total = [0] * max_n
    candidate_length = 0
    reference_length = 0
    for cand_text, refs in zip(candidates, references):
        if not refs:
            raise ValueError("every candidate needs at least one reference")
        cand = cand_text.split()
        ref_tokens = [r.split() for r in refs]
        candidate_length += len(cand)
        # closest reference length; ties resolve to the shorter one
        reference_length += min((abs(len(r) - len(cand)), len(r)) for r in ref_tokens)[1]
        for k in range(1, max_n + 1):
            cand_counts = _ngram_counts(cand, k)
            max_ref_counts: Counter = Counter()
            for r in ref_tokens:
                for gram, count in _ngram_counts(r, k).items():
                    if count > max_ref_counts[gram]:
                        max_ref_counts[gram] = count
            correct[k - 1] += sum(
                min(count, max_ref_counts[gram]) for gram, count in cand_counts.items()
            )
            total[k - 1] += max(0, len(cand) - k + 1)

    precisions = [c / t if t else 0.0 for c, t in zip(correct, total)]
    if candidate_length == 0:
        brevity_penalty = 0.0
    elif candidate_length > reference_length:
        brevity_penalty = 1.0
    else:
        brevity_penalty = math.exp(1.0 - reference_length / candidate_length)

    scores = []
    for k in range(1, max_n + 1):
        window = precisions[:k]
        if any(p == 0.0 for p in window):
            scores.append(0.0)
        else:
            scores.append(brevity_penalty * math.exp(sum(math.log(p) for p in window) / k))
    return BleuReport(
        scores=scores,
        precisions=precisions,
        correct=correct,
        total=total,
        brevity_penalty=brevity_penalty,
        candidate_length=candidate_length,
        reference_length=reference_length,
    )


def human_agreement(references: Mapping[str, Sequence[str]], max_n: int = 4) -> BleuReport:
    """BLEU of each image's first description against its remaining ones.

    Every image needs at least five reference descriptions so the candidate
    is scored against four or more.
    """
    candidates = []
    rest = []
    for image_id, refs in references.items():
        if len(refs) < 5:
            raise ValueError(
                f"image {image_id!r} has {len(refs)} references, need at least 5"
            )
        candidates.append(refs[0])
        rest.append(list(refs[1:]))
    return corpus_bleu(candidates, rest, max_n=max_n)


def _normalize(text: str) -> str:
    return " ".join(text.split())


def novelty_rate(generated: Iterable[str], training: Iterable[str]) -> float:
    """Fraction of generated texts present verbatim in the training captions.

    Comparison is exact string equality after whitespace normalization;
    lower means more novel output. An empty generated set yields 0.0.
    """
    training_set = {_normalize(t) for t in training}
    generated = list(generated)
    if not generated:
        return 0.0
    hits = sum(1 for g in generated if _normalize(g) in training_set)
    return hits / len(generated)
