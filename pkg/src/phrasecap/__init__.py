"""Phrase-based image captioning: bilinear phrase retrieval plus constrained generation."""

from .bilinear import (
    BilinearModel,
    TrainConfig,
    example_gradient,
    example_loss,
    init_projection,
    load_features,
    load_model,
    nearest_phrases,
    save_model,
    score,
    score_all,
    train,
)
from .corpus import (
    ChunkedSentence,
    Phrase,
    PhraseVocabulary,
    build_vocabulary,
    extract_phrases,
    load_captions,
    parse_captions,
    syntax_stats,
)
from .embeddings import EmbeddingTable, init_phrase_matrix, load_embeddings, phrase_vector
from .evaluation import corpus_bleu, human_agreement, novelty_rate, phrase_recall
from .generator import (
    GeneratedSentence,
    PhraseSelection,
    decode,
    predict_phrases,
    render,
    rerank,
)
from .langmodel import END_ID, END_TAG, START_ID, PhraseSequence, TrigramModel

__version__ = "0.1.0"

__all__ = [
    "BilinearModel",
    "ChunkedSentence",
    "EmbeddingTable",
    "END_ID",
    "END_TAG",
    "GeneratedSentence",
    "Phrase",
    "PhraseSelection",
    "PhraseSequence",
    "PhraseVocabulary",
    "START_ID",
    "TrainConfig",
    "TrigramModel",
    "build_vocabulary",
    "corpus_bleu",
    "decode",
    "example_gradient",
    "example_loss",
    "extract_phrases",
    "human_agreement",
    "init_phrase_matrix",
    "init_projection",
    "load_captions",
    "load_embeddings",
    "load_features",
    "load_model",
    "nearest_phrases",
    "novelty_rate",
    "parse_captions",
    "phrase_recall",
    "phrase_vector",
    "predict_phrases",
    "render",
    "rerank",
    "save_model",
    "score",
    "score_all",
    "syntax_stats",
    "train",
]
