"""Extraction pipeline: format conformance, pooling, determinism."""

import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from embedder.extract import (
    ExtractionError,
    ExtractionSpec,
    extract,
    stratified_cap,
)
from conftest import HIDDEN_SIZE, write_corpus


def toy_spec(corpus, encoder, out, **overrides) -> ExtractionSpec:
    fields = dict(
        data_source=str(corpus),
        model=str(encoder),
        pooling="CLS",
        output_dir=str(out),
        dataset_name="toy",
        model_name="tiny-encoder",
        max_length=16,
        batch_size=2,
    )
    fields.update(overrides)
    return ExtractionSpec(**fields)


def read_manifest(directory) -> dict:
    return json.loads((Path(directory) / "manifest.json").read_text())


def run_validate(directory) -> subprocess.CompletedProcess:
    return subprocess.run(
        [sys.executable, "-m", "alforge.cli", "validate", str(directory)],
        capture_output=True,
        text=True,
    )


class TestAcceptanceContract:
    def test_output_passes_primary_validation(self, toy_corpus_dir, tiny_encoder_dir, tmp_path):
        out = extract(toy_spec(toy_corpus_dir, tiny_encoder_dir, tmp_path / "ds"))
        result = run_validate(out)
        assert result.returncode == 0, result.stderr
        assert "toy" in result.stdout

    def test_dimension_is_model_hidden_size_and_n_matches(
        self, toy_corpus_dir, tiny_encoder_dir, tmp_path
    ):
        out = extract(toy_spec(toy_corpus_dir, tiny_encoder_dir, tmp_path / "ds"))
        manifest = read_manifest(out)
        assert manifest["embedding_dim"] == HIDDEN_SIZE
        assert manifest["num_train"] == 2
        assert manifest["num_test"] == 2
        assert manifest["num_classes"] == 2
        assert manifest["pooling"] == "CLS"

    def test_reextraction_reproduces_identical_checksum(
        self, toy_corpus_dir, tiny_encoder_dir, tmp_path
    ):
        first = extract(toy_spec(toy_corpus_dir, tiny_encoder_dir, tmp_path / "a"))
        second = extract(toy_spec(toy_corpus_dir, tiny_encoder_dir, tmp_path / "b"))
        checksum_a = read_manifest(first)["source_checksum"]
        checksum_b = read_manifest(second)["source_checksum"]
        assert checksum_a == checksum_b
        for name in ("train.emb", "train.lbl", "test.emb", "test.lbl"):
            assert (Path(first) / name).read_bytes() == (Path(second) / name).read_bytes()


class TestPooling:
    def test_mean_equals_cls_on_single_token_input(
        self, tiny_encoder_dir, tmp_path
    ):
        corpus = write_corpus(
            tmp_path / "single",
            [("cat", 0), ("dog", 1)],
            [("mat", 0), ("bird", 1)],
        )
        outputs = {}
        for pooling in ("CLS", "MEAN", "EOS"):
            out = extract(
                toy_spec(
                    corpus, tiny_encoder_dir, tmp_path / pooling.lower(),
                    pooling=pooling, add_special_tokens=False,
                )
            )
            blob = (Path(out) / "train.emb").read_bytes()
            outputs[pooling] = np.frombuffer(blob[21:], dtype="<f4")
        np.testing.assert_array_equal(outputs["MEAN"], outputs["CLS"])
        np.testing.assert_array_equal(outputs["EOS"], outputs["CLS"])

    def test_eos_takes_last_non_padding_token(
        self, toy_corpus_dir, tiny_encoder_dir, tmp_path
    ):
        import torch
        from transformers import AutoModel, AutoTokenizer

        out = extract(
            toy_spec(toy_corpus_dir, tiny_encoder_dir, tmp_path / "eos", pooling="EOS")
        )
        blob = (Path(out) / "train.emb").read_bytes()
        stored = np.frombuffer(blob[21:], dtype="<f4").reshape(2, HIDDEN_SIZE)

        tokenizer = AutoTokenizer.from_pretrained(tiny_encoder_dir)
        model = AutoModel.from_pretrained(tiny_encoder_dir)
        model.eval()
        texts = ["the cat sat on a mat", "a robot sang a loud song"]
        encoded = tokenizer(
            texts, padding=True, truncation=True, max_length=16, return_tensors="pt"
        )
        with torch.no_grad():
            hidden = model(**encoded).last_hidden_state
        last = encoded["attention_mask"].sum(dim=1) - 1
        expected = hidden[torch.arange(2), last].to(torch.float32).numpy()
        np.testing.assert_array_equal(stored, expected)

    def test_mean_ignores_padding(self, tiny_encoder_dir, tmp_path):
        # a batch with uneven lengths must pool the same rows as
        # single-text batches, or padding would leak into the mean
        corpus_batched = write_corpus(
            tmp_path / "batched",
            [("the cat sat on a mat", 0), ("a dog", 1)],
            [("a dog ran fast", 0), ("the quiet bird sang", 1)],
        )
        together = extract(
            toy_spec(corpus_batched, tiny_encoder_dir, tmp_path / "mt",
                     pooling="MEAN", batch_size=2)
        )
        separate = extract(
            toy_spec(corpus_batched, tiny_encoder_dir, tmp_path / "ms",
                     pooling="MEAN", batch_size=1)
        )
        blob_a = (Path(together) / "train.emb").read_bytes()
        blob_b = (Path(separate) / "train.emb").read_bytes()
        a = np.frombuffer(blob_a[21:], dtype="<f4").reshape(2, HIDDEN_SIZE)
        b = np.frombuffer(blob_b[21:], dtype="<f4").reshape(2, HIDDEN_SIZE)
        np.testing.assert_allclose(a, b, atol=1e-5)

    def test_documented_convention_enforced(self, tiny_encoder_dir, tmp_path):
        # a checkpoint whose directory name matches a known model must use
        # its documented pooling token
        lookalike = tmp_path / "bert-base-uncased"
        shutil.copytree(tiny_encoder_dir, lookalike)
        with pytest.raises(ExtractionError, match="CLS pooling by convention"):
            toy_spec(tmp_path, lookalike, tmp_path / "x", pooling="EOS").validate()


class TestCorpusHandling:
    def test_truncation_counts_in_manifest_extras(
        self, tiny_encoder_dir, tmp_path
    ):
        corpus = write_corpus(
            tmp_path / "long",
            [("the cat sat on a mat the cat sat on a mat", 0), ("a dog", 1)],
            [("a dog ran fast", 0), ("the quiet bird sang", 1)],
        )
        out = extract(
            toy_spec(corpus, tiny_encoder_dir, tmp_path / "ds", max_length=6)
        )
        extras = read_manifest(out)["extras"]
        assert extras["truncated_train"] == 1
        assert extras["truncated_test"] == 0
        # primary loader must tolerate and surface the extras
        result = run_validate(out)
        assert result.returncode == 0, result.stderr

    def test_stratified_cap_quota_and_determinism(self):
        labels = [0] * 8 + [1] * 4
        keep = stratified_cap(labels, 6)
        kept = np.asarray(labels)[keep]
        assert len(keep) == 6
        assert (kept == 0).sum() == 4
        assert (kept == 1).sum() == 2
        assert np.array_equal(keep, stratified_cap(labels, 6))

    def test_row_cap_applied_per_split(self, tiny_encoder_dir, tmp_path):
        corpus = write_corpus(
            tmp_path / "many",
            [("the cat", 0), ("a dog", 1), ("a mat", 0), ("robot sang", 1),
             ("loud song", 0), ("quiet bird", 1)],
            [("a dog ran", 0), ("the bird", 1)],
        )
        out = extract(
            toy_spec(corpus, tiny_encoder_dir, tmp_path / "capped", row_cap=4)
        )
        manifest = read_manifest(out)
        assert manifest["num_train"] == 4
        assert manifest["num_test"] == 2

    def test_missing_split_file(self, tiny_encoder_dir, tmp_path):
        corpus = tmp_path / "empty"
        corpus.mkdir()
        with pytest.raises(ExtractionError, match="missing split file"):
            extract(toy_spec(corpus, tiny_encoder_dir, tmp_path / "x"))

    def test_bad_pooling_rejected(self, toy_corpus_dir, tiny_encoder_dir, tmp_path):
        with pytest.raises(ExtractionError, match="pooling"):
            toy_spec(toy_corpus_dir, tiny_encoder_dir, tmp_path, pooling="SUM").validate()


class TestCli:
    def test_cli_round_trip(self, toy_corpus_dir, tiny_encoder_dir, tmp_path):
        from embedder.cli import main

        config = tmp_path / "spec.json"
        config.write_text(
            json.dumps(
                {
                    "data_source": str(toy_corpus_dir),
                    "model": str(tiny_encoder_dir),
                    "pooling": "MEAN",
                    "output_dir": str(tmp_path / "out"),
                    "dataset_name": "toy",
                    "model_name": "tiny-encoder",
                    "max_length": 16,
                }
            )
        )
        assert main(["--config", str(config)]) == 0
        assert run_validate(tmp_path / "out").returncode == 0

    def test_cli_missing_config(self):
        from embedder.cli import main

        assert main(["--config", "/nope.json"]) == 2


@pytest.mark.skipif(
    subprocess.run(
        [sys.executable, "-c",
         "import socket; socket.gethostbyname('huggingface.co')"],
        capture_output=True,
    ).returncode != 0,
    reason="public model hub unreachable",
)
def test_hub_model_extraction(toy_corpus_dir, tmp_path):
    spec = ExtractionSpec(
        data_source=str(toy_corpus_dir),
        model="prajjwal1/bert-tiny",
        pooling="CLS",
        output_dir=str(tmp_path / "hub"),
        max_length=32,
    )
    out = extract(spec)
    assert run_validate(out).returncode == 0
