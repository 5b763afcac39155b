"""Small builders shared across test modules."""

import numpy as np

from phrasecap.bilinear import BilinearModel
from phrasecap.corpus import ChunkedSentence, Phrase, PhraseVocabulary


def make_sentence(image_id, sentence_id, chunks):
    """ChunkedSentence from (words, kind) chunks; kind O emits O tags per token."""
    tokens, tags = [], []
    for words, kind in chunks:
        ws = words.split()
        tokens.extend(ws)
        if kind == "O":
            tags.extend(["O"] * len(ws))
        else:
            tags.extend([f"B-{kind}"] + [f"I-{kind}"] * (len(ws) - 1))
    return ChunkedSentence(image_id, sentence_id, tuple(tokens), tuple(tags))


def make_vocab(specs, threshold=1):
    """Vocabulary with ids in the given order; specs are (words, tag[, count])."""
    phrases, counts = [], []
    for spec in specs:
        words, tag = spec[0], spec[1]
        phrases.append(Phrase(tuple(words.split()), tag))
        counts.append(spec[2] if len(spec) > 2 else threshold)
    return PhraseVocabulary(phrases=phrases, counts=counts, threshold=threshold)


def make_model(vocab, m=4, n=3, seed=0, scale=1.0):
    rng = np.random.default_rng(seed)
    return BilinearModel(
        U=scale * rng.normal(size=(m, len(vocab))),
        V=scale * rng.normal(size=(m, n)),
        vocab_fingerprint=vocab.fingerprint(),
    )
