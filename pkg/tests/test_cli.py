"""End-to-end CLI behavior on the bundled toy fixture: outputs, exit codes, figures."""

import json
import os

import pytest

from phrasecap import cli
from phrasecap.bilinear import load_model
from phrasecap.corpus import PhraseVocabulary

PNG_MAGIC = b"\x89PNG"


def run(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def read_jsonl(path):
    with open(path) as f:
        return [json.loads(line) for line in f if line.strip()]


@pytest.fixture(scope="session")
def toy_config(tmp_path_factory, toy_paths):
    """Config with absolute fixture paths and a shared artifact directory."""
    run_dir = tmp_path_factory.mktemp("toyrun")
    cfg = {
        "captions": toy_paths["captions"],
        "embeddings": toy_paths["embeddings"],
        "features": toy_paths["features"],
        "vocab": str(run_dir / "vocab.json"),
        "model": str(run_dir / "model.bin"),
        "lm": str(run_dir / "trigram.json"),
        "vocab_threshold": 2,
        "learning_rate": 0.05,
        "epochs": 10,
        "negatives_per_positive": 5,
        "beam_width": 50,
        "seed": 7,
    }
    path = run_dir / "config.json"
    path.write_text(json.dumps(cfg))
    return {"path": str(path), "run_dir": str(run_dir), "values": cfg}


@pytest.fixture(scope="session")
def trained(toy_config):
    """Train once per session; later commands read the artifacts."""
    code = cli.main(
        ["train", "--config", toy_config["path"], "--out", toy_config["run_dir"]]
    )
    assert code == cli.EXIT_OK
    return toy_config


class TestStats:
    def test_report_and_figures(self, toy_config, tmp_path, capsys):
        out = tmp_path / "stats"
        code, stdout, _ = run(
            capsys, "stats", "--config", toy_config["path"], "--out", str(out)
        )
        assert code == cli.EXIT_OK
        stats = json.loads((out / "stats.json").read_text())
        assert stats["sentence_count"] == 15
        assert stats["structures"][0]["cumulative"] <= 1.0
        for figure in ("phrase_histograms.png", "sentence_structures.png"):
            assert (out / figure).read_bytes()[:4] == PNG_MAGIC
        assert "15 sentences" in stdout

    def test_missing_captions_file(self, tmp_path, capsys):
        code, _, err = run(
            capsys, "stats", "--captions", "/nonexistent/c.jsonl", "--out", str(tmp_path)
        )
        assert code == cli.EXIT_USAGE
        assert err.startswith("error:")
        assert "captions" in err


class TestBuildVocab:
    def test_totals_match_saved_vocabulary(self, toy_config, tmp_path, capsys):
        out = tmp_path / "vocab"
        code, stdout, _ = run(
            capsys, "build-vocab", "--config", toy_config["path"], "--out", str(out)
        )
        assert code == cli.EXIT_OK
        assert "phrases kept at count >= 2:" in stdout
        vocab = PhraseVocabulary.load(out / "vocab.json")
        totals = vocab.per_type_totals()
        for tag in ("NP", "VP", "PP"):
            assert f"{tag:<6}{totals[tag]}" in stdout
        assert f"total {totals['total']}" in stdout

    def test_threshold_flag_overrides_config(self, toy_config, tmp_path, capsys):
        out = tmp_path / "vocab"
        code, stdout, _ = run(
            capsys,
            "build-vocab",
            "--config", toy_config["path"],
            "--threshold", "1",
            "--out", str(out),
        )
        assert code == cli.EXIT_OK
        assert "count >= 1:" in stdout
        loose = PhraseVocabulary.load(out / "vocab.json")
        assert loose.threshold == 1


class TestTrain:
    def test_artifacts(self, trained):
        run_dir = trained["run_dir"]
        for name in ("vocab.json", "model.bin", "trigram.json", "loss_trace.csv"):
            assert os.path.exists(os.path.join(run_dir, name))
        assert open(os.path.join(run_dir, "loss_trace.png"), "rb").read(4) == PNG_MAGIC

        with open(os.path.join(run_dir, "loss_trace.csv")) as f:
            header = f.readline().strip()
            rows = [line.strip().split(",") for line in f if line.strip()]
        assert header == "epoch,mean_loss"
        assert [int(epoch) for epoch, _ in rows] == list(range(1, 11))
        losses = [float(loss) for _, loss in rows]
        assert losses[-1] < losses[0]

        vocab = PhraseVocabulary.load(os.path.join(run_dir, "vocab.json"))
        model = load_model(
            os.path.join(run_dir, "model.bin"), expected_fingerprint=vocab.fingerprint()
        )
        assert model.num_phrases == len(vocab)

    def test_same_seed_retrain_byte_identical(self, trained, tmp_path, capsys):
        out = tmp_path / "retrain"
        code, stdout, _ = run(
            capsys, "train", "--config", trained["path"], "--out", str(out)
        )
        assert code == cli.EXIT_OK
        assert "trained 10 epochs" in stdout
        for name in ("model.bin", "vocab.json", "trigram.json", "loss_trace.csv"):
            first = open(os.path.join(trained["run_dir"], name), "rb").read()
            again = (out / name).read_bytes()
            assert first == again, f"{name} not reproducible"

    def test_seed_flag_changes_model(self, trained, tmp_path, capsys):
        out = tmp_path / "reseed"
        code, _, _ = run(
            capsys, "train", "--config", trained["path"], "--seed", "8", "--out", str(out)
        )
        assert code == cli.EXIT_OK
        first = open(os.path.join(trained["run_dir"], "model.bin"), "rb").read()
        assert (out / "model.bin").read_bytes() != first

    def test_missing_embeddings(self, toy_config, tmp_path, capsys):
        code, _, err = run(
            capsys,
            "train",
            "--config", toy_config["path"],
            "--embeddings", "/nonexistent/e.txt",
            "--out", str(tmp_path / "x"),
        )
        assert code == cli.EXIT_USAGE
        assert "embeddings" in err


class TestPredictPhrases:
    def test_all_images_by_default(self, trained, tmp_path, capsys):
        out = tmp_path / "pred"
        code, stdout, _ = run(
            capsys, "predict-phrases", "--config", trained["path"], "--out", str(out)
        )
        assert code == cli.EXIT_OK
        records = read_jsonl(out / "predictions.jsonl")
        assert [r["image_id"] for r in records] == ["img001", "img002", "img003"]
        for record in records:
            for tag in ("NP", "VP", "PP"):
                entries = record["phrases"][tag]
                scores = [e["score"] for e in entries]
                assert scores == sorted(scores, reverse=True)
        assert "3/3 images predicted" in stdout

    def test_unknown_image_partial_failure(self, trained, tmp_path, capsys):
        out = tmp_path / "pred"
        code, _, _ = run(
            capsys,
            "predict-phrases", "--config", trained["path"], "--out", str(out),
            "img001", "imgX",
        )
        assert code == cli.EXIT_PARTIAL
        records = read_jsonl(out / "predictions.jsonl")
        assert records[0]["image_id"] == "img001"
        assert records[1] == {"image_id": "imgX", "error": "no feature vector"}


class TestGenerate:
    def test_requested_images_in_order(self, trained, tmp_path, capsys):
        out = tmp_path / "gen"
        code, stdout, _ = run(
            capsys,
            "generate", "--config", trained["path"], "--out", str(out),
            "img002", "img001",
        )
        assert code == cli.EXIT_OK
        records = read_jsonl(out / "captions.jsonl")
        assert [r["image_id"] for r in records] == ["img002", "img001"]
        for record in records:
            assert record["text"].endswith(" .")
            assert record["log_prob"] <= 0.0
            assert isinstance(record["match_score"], float)
            assert f"{record['image_id']}\t{record['text']}" in stdout

    def test_no_legal_sentence_is_not_a_failure(self, trained, tmp_path, capsys):
        out = tmp_path / "gen"
        code, _, _ = run(
            capsys,
            "generate", "--config", trained["path"],
            "--prob-threshold", "0.97",
            "--out", str(out),
            "img001",
        )
        assert code == cli.EXIT_OK
        record = read_jsonl(out / "captions.jsonl")[0]
        assert record["text"] is None
        assert record["reason"] == "no legal sentence above the transition threshold"

    def test_all_unknown_images_fail(self, trained, tmp_path, capsys):
        code, _, _ = run(
            capsys,
            "generate", "--config", trained["path"], "--out", str(tmp_path / "g"),
            "imgX", "imgY",
        )
        assert code == cli.EXIT_PARTIAL

    def test_one_good_image_rescues_the_run(self, trained, tmp_path, capsys):
        out = tmp_path / "g"
        code, _, _ = run(
            capsys,
            "generate", "--config", trained["path"], "--out", str(out),
            "imgX", "img001",
        )
        assert code == cli.EXIT_OK
        records = read_jsonl(out / "captions.jsonl")
        assert records[0] == {"image_id": "imgX", "error": "no feature vector"}
        assert records[1]["text"]

    def test_verbose_includes_ranked_candidates(self, trained, tmp_path, capsys):
        out = tmp_path / "gen"
        code, _, _ = run(
            capsys,
            "generate", "--config", trained["path"], "--verbose", "--out", str(out),
            "img001",
        )
        assert code == cli.EXIT_OK
        record = read_jsonl(out / "captions.jsonl")[0]
        assert record["candidates"]
        assert record["candidates"][0]["text"] == record["text"]
        matches = [c["match_score"] for c in record["candidates"]]
        assert matches == sorted(matches, reverse=True)


@pytest.fixture(scope="session")
def generated(trained, tmp_path_factory):
    gen_dir = tmp_path_factory.mktemp("gen")
    pred_dir = tmp_path_factory.mktemp("pred")
    assert cli.main(["generate", "--config", trained["path"], "--out", str(gen_dir)]) == 0
    assert (
        cli.main(["predict-phrases", "--config", trained["path"], "--out", str(pred_dir)])
        == 0
    )
    return {
        "candidates": str(gen_dir / "captions.jsonl"),
        "predictions": str(pred_dir / "predictions.jsonl"),
    }


class TestEvaluate:
    def test_full_report(self, trained, generated, toy_paths, tmp_path, capsys):
        out = tmp_path / "eval"
        code, stdout, _ = run(
            capsys,
            "evaluate",
            "--config", trained["path"],
            "--candidates", generated["candidates"],
            "--references", toy_paths["captions"],
            "--predictions", generated["predictions"],
            "--out", str(out),
        )
        assert code == cli.EXIT_OK
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["candidates"] == 3
        assert set(metrics["bleu"]["scores"]) == {"B-1", "B-2", "B-3", "B-4"}
        assert "error" not in metrics["human_agreement"]
        assert metrics["novelty"]["in_training_rate"] + metrics["novelty"]["novel_rate"] == 1.0
        assert metrics["recall"]["overall_micro"] > 0.0
        assert (out / "bleu_scores.png").read_bytes()[:4] == PNG_MAGIC
        for label in ("recall", "BLEU model", "BLEU human", "novelty"):
            assert label in stdout

    def test_reference_copies_score_perfect_bleu(self, trained, toy_paths, tmp_path, capsys):
        # candidates lifted verbatim from each image's first reference
        from phrasecap.corpus import group_by_image, load_captions

        grouped = group_by_image(load_captions(toy_paths["captions"]))
        cand_path = tmp_path / "copies.jsonl"
        with open(cand_path, "w") as f:
            for image_id, group in grouped.items():
                text = " ".join(group[0].tokens)
                f.write(json.dumps({"image_id": image_id, "text": text}) + "\n")
        out = tmp_path / "eval"
        code, _, _ = run(
            capsys,
            "evaluate",
            "--config", trained["path"],
            "--candidates", str(cand_path),
            "--references", toy_paths["captions"],
            "--out", str(out),
        )
        assert code == cli.EXIT_OK
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["bleu"]["scores"]["B-1"] == 1.0
        assert metrics["novelty"]["in_training_rate"] == 1.0

    def test_failed_candidates_are_skipped(self, trained, toy_paths, tmp_path, capsys):
        cand_path = tmp_path / "cands.jsonl"
        with open(cand_path, "w") as f:
            f.write(json.dumps({"image_id": "img001", "text": "a dog ."}) + "\n")
            f.write(json.dumps({"image_id": "img002", "text": None, "reason": "x"}) + "\n")
        out = tmp_path / "eval"
        code, _, _ = run(
            capsys,
            "evaluate",
            "--config", trained["path"],
            "--candidates", str(cand_path),
            "--references", toy_paths["captions"],
            "--out", str(out),
        )
        assert code == cli.EXIT_OK
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["candidates"] == 1
        assert metrics["skipped"] == 1

    def test_candidate_without_references_rejected(self, trained, toy_paths, tmp_path, capsys):
        cand_path = tmp_path / "cands.jsonl"
        cand_path.write_text(json.dumps({"image_id": "ghost", "text": "a dog ."}) + "\n")
        code, _, err = run(
            capsys,
            "evaluate",
            "--config", trained["path"],
            "--candidates", str(cand_path),
            "--references", toy_paths["captions"],
            "--out", str(tmp_path / "eval"),
        )
        assert code == cli.EXIT_USAGE
        assert "ghost" in err


class TestErrorHandling:
    def test_unknown_config_key(self, tmp_path, capsys):
        bad = tmp_path / "config.json"
        bad.write_text(json.dumps({"epohcs": 3}))
        code, _, err = run(
            capsys, "stats", "--config", str(bad), "--out", str(tmp_path / "o")
        )
        assert code == cli.EXIT_USAGE
        assert "epohcs" in err

    def test_missing_config_file(self, tmp_path, capsys):
        code, _, err = run(
            capsys, "stats", "--config", "/nonexistent/config.json",
            "--out", str(tmp_path / "o"),
        )
        assert code == cli.EXIT_USAGE
        assert "does not exist" in err

    def test_invalid_setting_rejected(self, toy_config, tmp_path, capsys):
        code, _, err = run(
            capsys,
            "generate", "--config", toy_config["path"],
            "--beam-width", "0",
            "--out", str(tmp_path / "o"),
        )
        assert code == cli.EXIT_USAGE
        assert "beam_width" in err

    def test_missing_out_flag_is_a_usage_error(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            cli.main(["stats"])
        assert excinfo.value.code == 2

    def test_unknown_subcommand(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            cli.main(["frobnicate"])
        assert excinfo.value.code == 2
