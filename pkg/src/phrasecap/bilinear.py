"""Bilinear phrase-image metric: scoring, negative-sampling logistic loss, SGD training.

The score of phrase c against image features z is u_c' V z, with U holding one
column per vocabulary phrase and V projecting image features into the phrase
space. Only U and V are learned; image features stay fixed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

MODEL_MAGIC = b"PBLM"
MODEL_VERSION = 1
_HEADER = struct.Struct("<4sIIII")  # magic, version, m, n, |C|
FINGERPRINT_BYTES = 32


class ModelIOError(ValueError):
    """Model file is not readable as a bilinear model."""


class ModelVersionError(ModelIOError):
    """Model file uses an unsupported format version."""


class ModelTruncatedError(ModelIOError):
    """Model file ends before all parameters are present."""


class VocabularyMismatchError(ModelIOError):
    """Model was saved against a different phrase vocabulary."""


class FeatureFormatError(ValueError):
    """Feature file violates the "n <dim>" header + one-record-per-line format."""


@dataclass(frozen=True)
class ImageFeatures:
    """Fixed CNN descriptor for one image."""

    image_id: str
    z: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.z)):
            raise ValueError(f"non-finite feature values for image {self.image_id!r}")


@dataclass
class TrainConfig:
    learning_rate: float = 0.00025
    negatives_per_positive: int = 15
    epochs: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.negatives_per_positive < 1:
            raise ValueError("negatives_per_positive must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass
class BilinearModel:
    """Parameters theta = {U, V} plus the fingerprint of the vocabulary they index."""

    U: np.ndarray  # m x |C|, column c is the representation of phrase c
    V: np.ndarray  # m x n image projection
    vocab_fingerprint: bytes

    def __post_init__(self):
        if self.U.ndim != 2 or self.V.ndim != 2:
            raise ValueError("U and V must be matrices")
        if self.U.shape[0] != self.V.shape[0]:
            raise ValueError(
                f"embedding dimension mismatch: U has {self.U.shape[0]} rows, V has {self.V.shape[0]}"
            )
        if not (np.all(np.isfinite(self.U)) and np.all(np.isfinite(self.V))):
            raise ValueError("model parameters contain non-finite values")
        if len(self.vocab_fingerprint) != FINGERPRINT_BYTES:
            raise ValueError(f"fingerprint must be {FINGERPRINT_BYTES} bytes")

    @property
    def m(self) -> int:
        return self.U.shape[0]

    @property
    def n(self) -> int:
        return self.V.shape[1]

    @property
    def num_phrases(self) -> int:
        return self.U.shape[1]

    def copy(self) -> "BilinearModel":
        return BilinearModel(self.U.copy(), self.V.copy(), self.vocab_fingerprint)


def init_projection(m: int, n: int, seed=0) -> np.ndarray:
    """Seeded uniform(-1/sqrt(n), +1/sqrt(n)) init for the image projection V."""
    scale = 1.0 / np.sqrt(n)
    return np.random.default_rng(seed).uniform(-scale, scale, size=(m, n))


def _check_features(model: BilinearModel, z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (model.n,):
        raise ValueError(f"feature vector has shape {z.shape}, expected ({model.n},)")
    return z


def score(model: BilinearModel, phrase_id: int, z: np.ndarray) -> float:
    """u_c' (V z) for one phrase."""
    if not 0 <= phrase_id < model.num_phrases:
        raise IndexError(f"phrase id {phrase_id} out of range [0, {model.num_phrases})")
    z = _check_features(model, z)
    return float(model.U[:, phrase_id] @ (model.V @ z))


def score_all(model: BilinearModel, z: np.ndarray) -> np.ndarray:
    """Scores of every vocabulary phrase against one image, as a length-|C| vector."""
    z = _check_features(model, z)
    return model.U.T @ (model.V @ z)


def _softplus(x: float) -> float:
    # log(1 + e^x) without overflow: max(x, 0) + log1p(e^-|x|)
    return float(max(x, 0.0) + np.log1p(np.exp(-abs(x))))


def _sigmoid(x: float) -> float:
    if x >= 0:
        return float(1.0 / (1.0 + np.exp(-x)))
    e = np.exp(x)
    return float(e / (1.0 + e))


def _check_example(positive_id: int, negative_ids) -> np.ndarray:
    negative_ids = np.asarray(negative_ids, dtype=np.intp)
    if negative_ids.size == 0:
        raise ValueError("need at least one negative phrase")
    if np.any(negative_ids == positive_id):
        raise ValueError(f"positive phrase {positive_id} appears among the negatives")
    return negative_ids


def example_loss(
    model: BilinearModel,
    positive_id: int,
    negative_ids: Iterable[int],
    z: np.ndarray,
) -> float:
    """Logistic loss of one (image, positive, negatives) example.

    log(1 + e^{-f(pos)}) + sum over negatives of log(1 + e^{+f(neg)});
    always strictly positive.
    """
    negative_ids = _check_example(positive_id, negative_ids)
    z = _check_features(model, z)
    projected = model.V @ z
    loss = _softplus(-float(model.U[:, positive_id] @ projected))
    for neg in negative_ids:
        loss += _softplus(float(model.U[:, neg] @ projected))
    return loss


def example_gradient(
    model: BilinearModel,
    positive_id: int,
    negative_ids: Iterable[int],
    z: np.ndarray,
) -> tuple[dict[int, np.ndarray], np.ndarray]:
    """Analytic gradient of example_loss.

    Returns (per-column gradients of U keyed by phrase id, gradient of V).
    Only the positive and negative columns of U are touched; duplicate
    negative ids accumulate.
    """
    negative_ids = _check_example(positive_id, negative_ids)
    z = _check_features(model, z)
    projected = model.V @ z

    # d loss / d score: sigmoid(s)-1 for the positive, sigmoid(s) per negative
    u_grads: dict[int, np.ndarray] = {}
    coeff_sum_u = np.zeros(model.m, dtype=np.float64)

    s_pos = float(model.U[:, positive_id] @ projected)
    c_pos = _sigmoid(s_pos) - 1.0
    u_grads[positive_id] = c_pos * projected
    coeff_sum_u += c_pos * model.U[:, positive_id]

    for neg in negative_ids:
        s_neg = float(model.U[:, neg] @ projected)
        c_neg = _sigmoid(s_neg)
        grad = c_neg * projected
        if neg in u_grads:
            u_grads[neg] = u_grads[neg] + grad
        else:
            u_grads[int(neg)] = grad
        coeff_sum_u += c_neg * model.U[:, neg]

    v_grad = np.outer(coeff_sum_u, z)
    return u_grads, v_grad


def train(
    model: BilinearModel,
    positives_by_image: Mapping[str, Iterable[int]],
    features: Mapping[str, np.ndarray],
    config: TrainConfig,
) -> tuple[BilinearModel, list[float]]:
    """Per-example SGD over (image, positive phrase) steps with resampled negatives.

    Each epoch shuffles the step order; every step draws fresh negatives
    uniformly (without replacement) from the vocabulary minus the image's
    whole positive set. Returns a new model and the per-epoch mean of the
    pre-update example losses. Deterministic for a fixed config seed.

    Raises before any update if an image lacks features, has no positives,
    or its positives cover the entire vocabulary.
    """
    image_ids = sorted(positives_by_image.keys())
    all_ids = np.arange(model.num_phrases)
    steps: list[tuple[str, int]] = []
    complements: dict[str, np.ndarray] = {}
    feature_vectors: dict[str, np.ndarray] = {}
    for image_id in image_ids:
        if image_id not in features:
            raise ValueError(f"image {image_id!r} has no feature vector")
        positives = sorted(set(positives_by_image[image_id]))
        if not positives:
            raise ValueError(f"image {image_id!r} has no positive phrases")
        complement = np.setdiff1d(all_ids, positives)
        if complement.size == 0:
            raise ValueError(
                f"image {image_id!r}: positives cover the whole vocabulary, nothing to sample"
            )
        complements[image_id] = complement
        feature_vectors[image_id] = _check_features(model, features[image_id])
        steps.extend((image_id, pos) for pos in positives)

    trained = model.copy()
    rng = np.random.default_rng(config.seed)
    epoch_losses: list[float] = []
    for _ in range(config.epochs):
        order = rng.permutation(len(steps))
        total = 0.0
        for idx in order:
            image_id, positive_id = steps[idx]
            complement = complements[image_id]
            k = min(config.negatives_per_positive, complement.size)
            negatives = rng.choice(complement, size=k, replace=False)
            z = feature_vectors[image_id]
            total += example_loss(trained, positive_id, negatives, z)
            u_grads, v_grad = example_gradient(trained, positive_id, negatives, z)
            for phrase_id, grad in u_grads.items():
                trained.U[:, phrase_id] -= config.learning_rate * grad
            trained.V -= config.learning_rate * v_grad
        epoch_losses.append(float(total / len(steps)))
    return trained, epoch_losses


def nearest_phrases(model: BilinearModel, phrase_id: int, k: int) -> list[int]:
    """Ids of the k nearest phrases by cosine similarity of U columns.

    The query itself is excluded; ties break toward the smaller id.
    Zero-norm columns get similarity 0.
    """
    if k <= 0:
        raise ValueError(f"k must be positive, got {k}")
    if k >= model.num_phrases:
        raise ValueError(f"k must be < |C| = {model.num_phrases}, got {k}")
    if not 0 <= phrase_id < model.num_phrases:
        raise IndexError(f"phrase id {phrase_id} out of range")
    query = model.U[:, phrase_id]
    norms = np.linalg.norm(model.U, axis=0)
    q_norm = norms[phrase_id]
    denom = norms * q_norm
    with np.errstate(divide="ignore", invalid="ignore"):
        sims = np.where(denom > 0, (model.U.T @ query) / denom, 0.0)
    order = sorted(
        (i for i in range(model.num_phrases) if i != phrase_id),
        key=lambda i: (-sims[i], i),
    )
    return order[:k]


# -- persistence ----------------------------------------------------------


def save_model(model: BilinearModel, sink) -> None:
    """Write the versioned binary model format (column-major float64 parameters)."""
    if hasattr(sink, "write"):
        _write_model(model, sink)
    else:
        with open(sink, "wb") as f:
            _write_model(model, f)


def _write_model(model: BilinearModel, f) -> None:
    f.write(_HEADER.pack(MODEL_MAGIC, MODEL_VERSION, model.m, model.n, model.num_phrases))
    f.write(model.vocab_fingerprint)
    f.write(np.ascontiguousarray(model.U, dtype="<f8").tobytes(order="F"))
    f.write(np.ascontiguousarray(model.V, dtype="<f8").tobytes(order="F"))


def load_model(source, expected_fingerprint: bytes | None = None) -> BilinearModel:
    """Read a model back, optionally checking it against a vocabulary fingerprint."""
    if hasattr(source, "read"):
        return _read_model(source, expected_fingerprint)
    with open(source, "rb") as f:
        return _read_model(f, expected_fingerprint)


def _read_exact(f, size: int, what: str) -> bytes:
    data = f.read(size)
    if len(data) != size:
        raise ModelTruncatedError(f"truncated model file while reading {what}")
    return data


def _read_model(f, expected_fingerprint: bytes | None) -> BilinearModel:
    header = _read_exact(f, _HEADER.size, "header")
    magic, version, m, n, num_phrases = _HEADER.unpack(header)
    if magic != MODEL_MAGIC:
        raise ModelIOError("not a bilinear model file (bad magic bytes)")
    if version != MODEL_VERSION:
        raise ModelVersionError(f"unsupported model version {version}, expected {MODEL_VERSION}")
    fingerprint = _read_exact(f, FINGERPRINT_BYTES, "vocabulary fingerprint")
    u_bytes = _read_exact(f, 8 * m * num_phrases, "U")
    v_bytes = _read_exact(f, 8 * m * n, "V")
    if f.read(1):
        raise ModelIOError("trailing data after model parameters")
    if expected_fingerprint is not None and fingerprint != expected_fingerprint:
        raise VocabularyMismatchError(
            "model was saved against a different phrase vocabulary"
        )
    U = np.frombuffer(u_bytes, dtype="<f8").reshape((m, num_phrases), order="F").copy()
    V = np.frombuffer(v_bytes, dtype="<f8").reshape((m, n), order="F").copy()
    return BilinearModel(U=U, V=V, vocab_fingerprint=fingerprint)


# -- feature files --------------------------------------------------------


def parse_features(source) -> dict[str, np.ndarray]:
    """Read the feature file: header "n <dim>", then "image_id v1 .. vn" per line."""
    lines = iter(enumerate(source, start=1))
    try:
        _, header = next(lines)
    except StopIteration:
        raise FeatureFormatError("empty feature file") from None
    parts = header.split()
    if len(parts) != 2 or parts[0] != "n":
        raise FeatureFormatError('line 1: header must be "n <dimension>"')
    try:
        dim = int(parts[1])
    except ValueError:
        raise FeatureFormatError(f"line 1: bad dimension {parts[1]!r}") from None
    if dim < 1:
        raise FeatureFormatError(f"line 1: dimension must be positive, got {dim}")

    store: dict[str, np.ndarray] = {}
    for lineno, raw in lines:
        line = raw.strip()
        if not line:
            continue
        fields = line.split(" ")
        image_id, values = fields[0], fields[1:]
        if len(values) != dim:
            raise FeatureFormatError(
                f"line {lineno}: expected {dim} values for image {image_id!r}, got {len(values)}"
            )
        if image_id in store:
            raise FeatureFormatError(f"line {lineno}: duplicate image id {image_id!r}")
        try:
            store[image_id] = np.array([float(v) for v in values], dtype=np.float64)
        except ValueError as exc:
            raise FeatureFormatError(f"line {lineno}: non-numeric value: {exc}") from exc
    return store


def load_features(path) -> dict[str, np.ndarray]:
    with open(path, encoding="utf-8") as f:
        return parse_features(f)


def save_features(features: Mapping[str, np.ndarray], path) -> None:
    items = list(features.items())
    if not items:
        raise ValueError("no features to write")
    dim = len(items[0][1])
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"n {dim}\n")
        for image_id, z in items:
            f.write(image_id + " " + " ".join(repr(float(v)) for v in z) + "\n")
