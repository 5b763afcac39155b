"""Regenerate the bundled toy fixture (chunked captions, embeddings, synthetic features).

The corpus is 3 images x 5 captions over a small closed vocabulary, shaped so
that every phrase clears a count threshold of 2 and the trigram model admits
legal sentences for each image. Features are near-orthogonal per image.
"""

import json
import os

import numpy as np

HERE = os.path.dirname(os.path.abspath(__file__))
OUT = os.path.join(HERE, "toy")

# (image, tokens, tags); the terminal period is a plain O token
SENTENCES = [
    ("img001", "a dog is chasing a ball .",
     "B-NP I-NP B-VP I-VP B-NP I-NP O"),
    ("img001", "a dog is chasing a ball on the grass .",
     "B-NP I-NP B-VP I-VP B-NP I-NP B-PP B-NP I-NP O"),
    ("img001", "a dog on the grass is chasing a ball .",
     "B-NP I-NP B-PP B-NP I-NP B-VP I-VP B-NP I-NP O"),
    ("img001", "a dog is holding a ball .",
     "B-NP I-NP B-VP I-VP B-NP I-NP O"),
    ("img001", "a dog runs happily .",
     "B-NP I-NP B-VP B-ADVP O"),
    ("img002", "a man is holding a stick .",
     "B-NP I-NP B-VP I-VP B-NP I-NP O"),
    ("img002", "a man is holding a stick in the park .",
     "B-NP I-NP B-VP I-VP B-NP I-NP B-PP B-NP I-NP O"),
    ("img002", "a man in the park is holding a stick .",
     "B-NP I-NP B-PP B-NP I-NP B-VP I-VP B-NP I-NP O"),
    ("img002", "a man is chasing a dog .",
     "B-NP I-NP B-VP I-VP B-NP I-NP O"),
    ("img002", "a man runs happily .",
     "B-NP I-NP B-VP B-ADVP O"),
    ("img003", "a cat is eating a fish .",
     "B-NP I-NP B-VP I-VP B-NP I-NP O"),
    ("img003", "a cat is eating a fish on the grass .",
     "B-NP I-NP B-VP I-VP B-NP I-NP B-PP B-NP I-NP O"),
    ("img003", "a cat on the grass is eating a fish .",
     "B-NP I-NP B-PP B-NP I-NP B-VP I-VP B-NP I-NP O"),
    ("img003", "a cat is chasing a ball .",
     "B-NP I-NP B-VP I-VP B-NP I-NP O"),
    ("img003", "a cat runs happily .",
     "B-NP I-NP B-VP B-ADVP O"),
]

EMBED_DIM = 8
FEATURE_DIM = 6


def main():
    os.makedirs(OUT, exist_ok=True)

    counters = {}
    with open(os.path.join(OUT, "captions.jsonl"), "w", encoding="utf-8") as f:
        for image_id, text, tags in SENTENCES:
            k = counters.get(image_id, 0)
            counters[image_id] = k + 1
            record = {
                "image_id": image_id,
                "sentence_id": f"{image_id}#{k}",
                "tokens": text.split(),
                "tags": tags.split(),
            }
            f.write(json.dumps(record) + "\n")

    # "happily" is deliberately absent so one phrase averages a partial cover
    words = sorted(
        {w for _, text, _ in SENTENCES for w in text.split()} - {".", "happily"}
    )
    rng = np.random.default_rng(11)
    with open(os.path.join(OUT, "embeddings.txt"), "w", encoding="utf-8") as f:
        for w in words:
            vec = rng.uniform(-0.5, 0.5, size=EMBED_DIM)
            f.write(w + " " + " ".join(f"{v:.4f}" for v in vec) + "\n")

    rng = np.random.default_rng(23)
    with open(os.path.join(OUT, "features.txt"), "w", encoding="utf-8") as f:
        f.write(f"n {FEATURE_DIM}\n")
        for i, image_id in enumerate(sorted(counters)):
            z = rng.uniform(-0.2, 0.2, size=FEATURE_DIM)
            z[i] += 2.0
            f.write(image_id + " " + " ".join(f"{v:.4f}" for v in z) + "\n")

    config = {
        "captions": "fixtures/toy/captions.jsonl",
        "embeddings": "fixtures/toy/embeddings.txt",
        "features": "fixtures/toy/features.txt",
        "vocab": "runs/toy/vocab.json",
        "model": "runs/toy/model.bin",
        "lm": "runs/toy/trigram.json",
        "vocab_threshold": 2,
        "learning_rate": 0.05,
        "epochs": 10,
        "negatives_per_positive": 5,
        "beam_width": 50,
        "seed": 7,
    }
    with open(os.path.join(OUT, "config.json"), "w", encoding="utf-8") as f:
        json.dump(config, f, indent=2)
        f.write("\n")

    print(f"wrote fixture to {OUT}")


if __name__ == "__main__":
    main()
