"""Command line pipeline: stats, build-vocab, train, predict-phrases, generate, evaluate.

Report-producing subcommands write machine-readable output (JSON or JSON
Lines) into --out together with rendered figures. Exit codes: 0 on success,
1 when some requested items failed (generate: when all of them failed),
2 on configuration or input errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import fields

from . import bilinear, corpus, embeddings, evaluation, generator, langmodel, plots
from .config import (
    ConfigError,
    PipelineConfig,
    apply_overrides,
    derive_seeds,
    load_config,
)

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_USAGE = 2


class InputError(Exception):
    """Configuration or input-file problem; maps to exit code 2."""


def _require(value, what: str) -> str:
    if value is None:
        raise InputError(f"no {what} path given (flag --{what} or config file)")
    if not os.path.exists(value):
        raise InputError(f"{what} file does not exist: {value}")
    return value


def _ensure_out(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _write_json(path: str, payload) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")


def _write_jsonl(path: str, records) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record, ensure_ascii=False) + "\n")


# -- subcommands -----------------------------------------------------------


def cmd_stats(cfg: PipelineConfig, args) -> int:
    sentences = corpus.load_captions(_require(cfg.captions, "captions"))
    stats = corpus.syntax_stats(sentences)
    out = _ensure_out(args.out)
    _write_json(os.path.join(out, "stats.json"), stats.as_dict())
    plots.save_phrase_histograms(stats, os.path.join(out, "phrase_histograms.png"))
    plots.save_structure_distribution(stats, os.path.join(out, "sentence_structures.png"))
    print(
        f"{stats.sentence_count} sentences, {len(stats.structures)} distinct structures"
        f" -> {os.path.join(out, 'stats.json')}"
    )
    return EXIT_OK


def cmd_build_vocab(cfg: PipelineConfig, args) -> int:
    sentences = corpus.load_captions(_require(cfg.captions, "captions"))
    vocab = corpus.build_vocabulary(sentences, threshold=cfg.vocab_threshold)
    out = _ensure_out(args.out)
    vocab.save(os.path.join(out, "vocab.json"))
    totals = vocab.per_type_totals()
    print(f"phrases kept at count >= {vocab.threshold}:")
    for tag in corpus.PHRASE_TAGS:
        print(f"  {tag:<6}{totals[tag]}")
    print(f"  total {totals['total']}")
    return EXIT_OK


def cmd_train(cfg: PipelineConfig, args) -> int:
    sentences = corpus.load_captions(_require(cfg.captions, "captions"))
    table = embeddings.load_embeddings(_require(cfg.embeddings, "embeddings"))
    features = bilinear.load_features(_require(cfg.features, "features"))

    vocab = corpus.build_vocabulary(sentences, threshold=cfg.vocab_threshold)
    if len(vocab) == 0:
        raise InputError(
            f"no phrase reaches the count threshold {cfg.vocab_threshold}; nothing to train"
        )

    u_seed, v_seed, train_seed = derive_seeds(cfg.seed)
    U, fallback_ids = embeddings.init_phrase_matrix(vocab, table, seed=u_seed)

    positives: dict[str, set[int]] = {}
    dropped: list[str] = []
    for image_id, group in corpus.group_by_image(sentences).items():
        ids = set()
        for sentence in group:
            for phrase in corpus.extract_phrases(sentence):
                pid = vocab.get(phrase)
                if pid is not None:
                    ids.add(pid)
        if not ids:
            dropped.append(image_id)
            continue
        if image_id not in features:
            raise InputError(f"training image {image_id!r} has no feature vector")
        positives[image_id] = ids
    if not positives:
        raise InputError("no training image has an in-vocabulary phrase")

    n = len(next(iter(features.values())))
    model = bilinear.BilinearModel(
        U=U,
        V=bilinear.init_projection(table.dimension, n, seed=v_seed),
        vocab_fingerprint=vocab.fingerprint(),
    )
    train_config = bilinear.TrainConfig(
        learning_rate=cfg.learning_rate,
        negatives_per_positive=cfg.negatives_per_positive,
        epochs=cfg.epochs,
        seed=train_seed,
    )
    trained, losses = bilinear.train(model, positives, features, train_config)
    lm = langmodel.TrigramModel.estimate(langmodel.sequences_from_corpus(sentences, vocab))

    out = _ensure_out(args.out)
    vocab.save(os.path.join(out, "vocab.json"))
    bilinear.save_model(trained, os.path.join(out, "model.bin"))
    lm.save(os.path.join(out, "trigram.json"))
    with open(os.path.join(out, "loss_trace.csv"), "w", encoding="utf-8") as f:
        f.write("epoch,mean_loss\n")
        for epoch, loss in enumerate(losses, start=1):
            f.write(f"{epoch},{loss!r}\n")
    plots.save_loss_trace(losses, os.path.join(out, "loss_trace.png"))

    if dropped:
        print(
            f"warning: skipped {len(dropped)} image(s) with no in-vocabulary phrase",
            file=sys.stderr,
        )
    if args.verbose and fallback_ids:
        print(
            f"{len(fallback_ids)} phrase(s) lacked embedding coverage, columns seeded randomly",
            file=sys.stderr,
        )
    steps = sum(len(ids) for ids in positives.values())
    print(
        f"trained {cfg.epochs} epochs over {steps} steps ({len(positives)} images, "
        f"|C| = {len(vocab)}); mean loss {losses[0]:.4f} -> {losses[-1]:.4f}"
    )
    print(f"artifacts in {out}: vocab.json model.bin trigram.json loss_trace.csv loss_trace.png")
    return EXIT_OK


def _load_model_stack(cfg: PipelineConfig):
    vocab = corpus.PhraseVocabulary.load(_require(cfg.vocab, "vocab"))
    model = bilinear.load_model(
        _require(cfg.model, "model"), expected_fingerprint=vocab.fingerprint()
    )
    features = bilinear.load_features(_require(cfg.features, "features"))
    return vocab, model, features


def cmd_predict_phrases(cfg: PipelineConfig, args) -> int:
    vocab, model, features = _load_model_stack(cfg)
    image_ids = list(args.images) or list(features)

    records = []
    failures = 0
    for image_id in image_ids:
        z = features.get(image_id)
        if z is None:
            records.append({"image_id": image_id, "error": "no feature vector"})
            failures += 1
            continue
        selection = generator.predict_phrases(
            model, vocab, z, np_cap=cfg.np_cap, vp_cap=cfg.vp_cap, pp_cap=cfg.pp_cap
        )
        records.append(
            {
                "image_id": image_id,
                "phrases": {
                    tag: [
                        {
                            "id": pid,
                            "text": vocab.phrase(pid).text,
                            "score": selection.scores[pid],
                        }
                        for pid in selection.by_tag(tag)
                    ]
                    for tag in corpus.PHRASE_TAGS
                },
            }
        )
    out = _ensure_out(args.out)
    _write_jsonl(os.path.join(out, "predictions.jsonl"), records)
    print(
        f"{len(records) - failures}/{len(records)} images predicted"
        f" -> {os.path.join(out, 'predictions.jsonl')}"
    )
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_generate(cfg: PipelineConfig, args) -> int:
    vocab, model, features = _load_model_stack(cfg)
    lm = langmodel.TrigramModel.load(_require(cfg.lm, "lm"))
    image_ids = list(args.images) or list(features)

    records = []
    failures = 0
    for image_id in image_ids:
        z = features.get(image_id)
        if z is None:
            records.append({"image_id": image_id, "error": "no feature vector"})
            failures += 1
            continue
        selection = generator.predict_phrases(
            model, vocab, z, np_cap=cfg.np_cap, vp_cap=cfg.vp_cap, pp_cap=cfg.pp_cap
        )
        sentences = generator.decode(
            selection,
            vocab,
            lm,
            beam_width=cfg.beam_width,
            prob_threshold=cfg.prob_threshold,
            max_sentences=cfg.max_sentences,
        )
        if not sentences:
            records.append(
                {
                    "image_id": image_id,
                    "text": None,
                    "reason": "no legal sentence above the transition threshold",
                }
            )
            continue
        best, ranked = generator.rerank(model, z, sentences)
        record = {
            "image_id": image_id,
            "text": best.text,
            "phrase_ids": list(best.phrase_ids),
            "log_prob": best.log_prob,
            "match_score": best.match_score,
        }
        if args.verbose:
            record["candidates"] = [
                {
                    "text": s.text,
                    "phrase_ids": list(s.phrase_ids),
                    "log_prob": s.log_prob,
                    "match_score": s.match_score,
                }
                for s in ranked
            ]
        records.append(record)

    out = _ensure_out(args.out)
    _write_jsonl(os.path.join(out, "captions.jsonl"), records)
    for record in records:
        note = record.get("text") or record.get("error") or record.get("reason")
        print(f"{record['image_id']}\t{note}")
    if records and failures == len(records):
        return EXIT_PARTIAL
    return EXIT_OK


def _load_candidates(path: str) -> list[tuple[str, str | None]]:
    """Generation output: (image_id, text) pairs, text None for failed records."""
    pairs = []
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}: line {lineno}: invalid JSON: {exc}") from exc
            if not isinstance(record, dict) or "image_id" not in record:
                raise InputError(f"{path}: line {lineno}: record needs an image_id")
            pairs.append((str(record["image_id"]), record.get("text")))
    return pairs


def _load_predictions(path: str, vocab) -> dict[str, generator.PhraseSelection]:
    predictions = {}
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            record = json.loads(line)
            if "error" in record:
                continue
            by_tag = {}
            scores = {}
            for tag in corpus.PHRASE_TAGS:
                entries = record.get("phrases", {}).get(tag, [])
                ids = []
                for entry in entries:
                    pid = int(entry["id"])
                    if not 0 <= pid < len(vocab):
                        raise InputError(
                            f"{path}: line {lineno}: phrase id {pid} outside the vocabulary"
                        )
                    ids.append(pid)
                    scores[pid] = float(entry.get("score", 0.0))
                by_tag[tag] = ids
            predictions[str(record["image_id"])] = generator.PhraseSelection(
                np_ids=by_tag["NP"], vp_ids=by_tag["VP"], pp_ids=by_tag["PP"], scores=scores
            )
    return predictions


def _print_metrics(metrics: dict) -> None:
    if "recall" in metrics:
        recall = metrics["recall"]
        parts = [
            f"{tag} {entry['recall']:.3f} ({entry['retrieved']}/{entry['total']})"
            for tag, entry in recall["per_type"].items()
        ]
        print("recall      " + "  ".join(parts))
        print(
            f"            micro {recall['overall_micro']:.3f}"
            f"  macro {recall['overall_macro']:.3f}"
        )
    for label, key in (("BLEU model", "bleu"), ("BLEU human", "human_agreement")):
        block = metrics.get(key)
        if not block:
            continue
        if "error" in block:
            print(f"{label:<12}{block['error']}")
            continue
        scores = "  ".join(f"{k} {v:.3f}" for k, v in block["scores"].items())
        print(f"{label:<12}{scores}  (BP {block['brevity_penalty']:.3f})")
    if "novelty" in metrics:
        block = metrics["novelty"]
        print(
            f"novelty     {block['in_training_rate']:.1%} of {block['generated']}"
            " generated captions appear verbatim in the training set"
        )


def cmd_evaluate(cfg: PipelineConfig, args) -> int:
    reference_sentences = corpus.load_captions(_require(args.references, "references"))
    grouped = corpus.group_by_image(reference_sentences)
    reference_texts = {
        image_id: [" ".join(s.tokens) for s in group] for image_id, group in grouped.items()
    }

    candidate_pairs = _load_candidates(_require(args.candidates, "candidates"))
    candidates, aligned_refs = [], []
    skipped = 0
    for image_id, text in candidate_pairs:
        if text is None:
            skipped += 1
            continue
        if image_id not in reference_texts:
            raise InputError(f"candidate image {image_id!r} has no reference captions")
        candidates.append(text)
        aligned_refs.append(reference_texts[image_id])
    if not candidates:
        raise InputError("no scoreable candidate captions (all records failed)")

    metrics: dict = {"candidates": len(candidates), "skipped": skipped}
    bleu = evaluation.corpus_bleu(candidates, aligned_refs)
    metrics["bleu"] = bleu.as_dict()
    figure_blocks = {"model": bleu.scores}

    try:
        human = evaluation.human_agreement(reference_texts)
        metrics["human_agreement"] = human.as_dict()
        figure_blocks["human"] = human.scores
    except ValueError as exc:
        metrics["human_agreement"] = {"error": str(exc)}

    training_path = args.training_captions or cfg.captions
    if training_path:
        training = corpus.load_captions(_require(training_path, "training-captions"))
        rate = evaluation.novelty_rate(candidates, (" ".join(s.tokens) for s in training))
        metrics["novelty"] = {
            "in_training_rate": rate,
            "novel_rate": 1.0 - rate,
            "generated": len(candidates),
        }

    if args.predictions:
        vocab = corpus.PhraseVocabulary.load(_require(cfg.vocab, "vocab"))
        predictions = _load_predictions(_require(args.predictions, "predictions"), vocab)
        ground_truth = {}
        for image_id in predictions:
            if image_id not in grouped:
                raise InputError(f"predicted image {image_id!r} has no reference captions")
            ids = set()
            for sentence in grouped[image_id]:
                for phrase in corpus.extract_phrases(sentence):
                    pid = vocab.get(phrase)
                    if pid is not None:
                        ids.add(pid)
            ground_truth[image_id] = ids
        metrics["recall"] = evaluation.phrase_recall(predictions, ground_truth, vocab).as_dict()

    out = _ensure_out(args.out)
    _write_json(os.path.join(out, "metrics.json"), metrics)
    plots.save_bleu_scores(figure_blocks, os.path.join(out, "bleu_scores.png"))
    _print_metrics(metrics)
    return EXIT_OK


# -- argument parsing ------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int, help="pipeline seed (overrides config)")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--verbose", action="store_true")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phrasecap",
        description="Phrase-based caption generation from image features.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="corpus syntax statistics and figures")
    _add_common(p)
    p.add_argument("--captions", help="chunked caption JSONL")

    p = sub.add_parser("build-vocab", help="frequency-thresholded phrase vocabulary")
    _add_common(p)
    p.add_argument("--captions")
    p.add_argument("--threshold", type=int, dest="vocab_threshold")

    p = sub.add_parser("train", help="train the bilinear model and trigram LM")
    _add_common(p)
    p.add_argument("--captions")
    p.add_argument("--embeddings")
    p.add_argument("--features")
    p.add_argument("--threshold", type=int, dest="vocab_threshold")
    p.add_argument("--learning-rate", type=float, dest="learning_rate")
    p.add_argument("--negatives", type=int, dest="negatives_per_positive")
    p.add_argument("--epochs", type=int)

    p = sub.add_parser("predict-phrases", help="top phrases per type for each image")
    _add_common(p)
    p.add_argument("--features")
    p.add_argument("--model")
    p.add_argument("--vocab")
    p.add_argument("--np-cap", type=int, dest="np_cap")
    p.add_argument("--vp-cap", type=int, dest="vp_cap")
    p.add_argument("--pp-cap", type=int, dest="pp_cap")
    p.add_argument("images", nargs="*", help="image ids (default: all in the feature file)")

    p = sub.add_parser("generate", help="generate one caption per image")
    _add_common(p)
    p.add_argument("--features")
    p.add_argument("--model")
    p.add_argument("--vocab")
    p.add_argument("--lm")
    p.add_argument("--np-cap", type=int, dest="np_cap")
    p.add_argument("--vp-cap", type=int, dest="vp_cap")
    p.add_argument("--pp-cap", type=int, dest="pp_cap")
    p.add_argument("--beam-width", type=int, dest="beam_width")
    p.add_argument("--prob-threshold", type=float, dest="prob_threshold")
    p.add_argument("--max-sentences", type=int, dest="max_sentences")
    p.add_argument("images", nargs="*", help="image ids (default: all in the feature file)")

    p = sub.add_parser("evaluate", help="BLEU, recall, agreement and novelty report")
    _add_common(p)
    p.add_argument("--candidates", required=True, help="generation output JSONL")
    p.add_argument("--references", required=True, help="chunked reference caption JSONL")
    p.add_argument("--predictions", help="predict-phrases output, enables the recall block")
    p.add_argument("--vocab", help="vocabulary for the recall block")
    p.add_argument(
        "--training-captions",
        dest="training_captions",
        help="training caption JSONL for the novelty block (default: config captions)",
    )
    return parser


_CONFIG_FIELDS = {f.name for f in fields(PipelineConfig)}

_COMMANDS = {
    "stats": cmd_stats,
    "build-vocab": cmd_build_vocab,
    "train": cmd_train,
    "predict-phrases": cmd_predict_phrases,
    "generate": cmd_generate,
    "evaluate": cmd_evaluate,
}


def _resolve_config(args) -> PipelineConfig:
    if getattr(args, "config", None):
        if not os.path.exists(args.config):
            raise InputError(f"config file does not exist: {args.config}")
        cfg = load_config(args.config)
    else:
        cfg = PipelineConfig()
    overrides = {
        name: getattr(args, name) for name in _CONFIG_FIELDS if hasattr(args, name)
    }
    cfg = apply_overrides(cfg, overrides)
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
        return _COMMANDS[args.command](cfg, args)
    except (InputError, ConfigError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
