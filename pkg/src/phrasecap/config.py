"""Pipeline configuration: JSON file plus flag overrides, defaults from the reference setup."""

from __future__ import annotations

import json
from dataclasses import dataclass, fields, replace

import numpy as np


class ConfigError(ValueError):
    """Bad configuration file or invalid setting."""


@dataclass
class PipelineConfig:
    # input/output artifact paths
    captions: str | None = None
    embeddings: str | None = None
    features: str | None = None
    model: str | None = None
    lm: str | None = None
    vocab: str | None = None
    # vocabulary and selection
    vocab_threshold: int = 10
    np_cap: int = 20
    vp_cap: int = 5
    pp_cap: int = 5
    # decoding
    beam_width: int = 100
    prob_threshold: float = 0.01
    max_sentences: int = 1000
    # training
    learning_rate: float = 0.00025
    negatives_per_positive: int = 15
    epochs: int = 10
    seed: int = 0

    def validate(self) -> None:
        if self.vocab_threshold < 1:
            raise ConfigError("vocab_threshold must be >= 1")
        for name in ("np_cap", "vp_cap", "pp_cap", "beam_width", "max_sentences",
                     "negatives_per_positive", "epochs"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if not 0.0 <= self.prob_threshold < 1.0:
            raise ConfigError("prob_threshold must be in [0, 1)")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be >= 0")


_FIELD_NAMES = {f.name for f in fields(PipelineConfig)}


def load_config(path) -> PipelineConfig:
    """Read a flat JSON object of config keys; unknown keys are an error."""
    with open(path, encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    unknown = set(data) - _FIELD_NAMES
    if unknown:
        raise ConfigError(f"{path}: unknown config keys: {', '.join(sorted(unknown))}")
    return PipelineConfig(**data)


def apply_overrides(config: PipelineConfig, overrides: dict) -> PipelineConfig:
    """Command-line values win over file values; None means "not given"."""
    given = {k: v for k, v in overrides.items() if v is not None}
    unknown = set(given) - _FIELD_NAMES
    if unknown:
        raise ConfigError(f"unknown config overrides: {', '.join(sorted(unknown))}")
    return replace(config, **given)


def derive_seeds(seed: int) -> tuple[int, int, int]:
    """Expand the single pipeline seed into the three consumer seeds.

    Uses numpy's SeedSequence (documented, reproducible across platforms):
    state word 0 seeds the phrase-matrix fallback columns, word 1 the image
    projection init, word 2 the trainer's shuffling and negative sampling.
    """
    state = np.random.SeedSequence(seed).generate_state(3)
    return int(state[0]), int(state[1]), int(state[2])
