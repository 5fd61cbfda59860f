import json
import os

import pytest

os.environ.setdefault("HF_HUB_OFFLINE", "1")

TOY_VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "the", "cat", "sat", "on", "a", "mat", "dog", "ran", "fast",
    "robot", "sang", "quiet", "song", "loud", "bird",
]

HIDDEN_SIZE = 32


@pytest.fixture(scope="session")
def tiny_encoder_dir(tmp_path_factory):
    """A local transformer checkpoint: 2-layer BERT with a toy vocabulary."""
    import torch
    from tokenizers import Tokenizer
    from tokenizers.models import WordPiece
    from tokenizers.normalizers import BertNormalizer
    from tokenizers.pre_tokenizers import BertPreTokenizer
    from tokenizers.processors import TemplateProcessing
    from transformers import BertConfig, BertModel, PreTrainedTokenizerFast

    vocab = {word: i for i, word in enumerate(TOY_VOCAB)}
    backend = Tokenizer(WordPiece(vocab, unk_token="[UNK]"))
    backend.normalizer = BertNormalizer(lowercase=True)
    backend.pre_tokenizer = BertPreTokenizer()
    backend.post_processor = TemplateProcessing(
        single="[CLS] $A [SEP]",
        pair="[CLS] $A [SEP] $B [SEP]",
        special_tokens=[("[CLS]", vocab["[CLS]"]), ("[SEP]", vocab["[SEP]"])],
    )
    tokenizer = PreTrainedTokenizerFast(
        tokenizer_object=backend,
        unk_token="[UNK]",
        pad_token="[PAD]",
        cls_token="[CLS]",
        sep_token="[SEP]",
        mask_token="[MASK]",
    )

    config = BertConfig(
        vocab_size=len(TOY_VOCAB),
        hidden_size=HIDDEN_SIZE,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=64,
    )
    torch.manual_seed(1234)
    model = BertModel(config)
    model.eval()

    out = tmp_path_factory.mktemp("encoder") / "tiny-encoder"
    model.save_pretrained(out)
    tokenizer.save_pretrained(out)
    return str(out)


def write_corpus(directory, train_rows, test_rows):
    directory.mkdir(parents=True, exist_ok=True)
    for split, rows in (("train", train_rows), ("test", test_rows)):
        with open(directory / f"{split}.jsonl", "w", encoding="utf-8") as handle:
            for text, label in rows:
                handle.write(json.dumps({"text": text, "label": label}) + "\n")
    return str(directory)


@pytest.fixture(scope="session")
def toy_corpus_dir(tmp_path_factory):
    """Two-sentence train split, two-sentence test split, two classes."""
    return write_corpus(
        tmp_path_factory.mktemp("corpus") / "toy",
        [("the cat sat on a mat", 0), ("a robot sang a loud song", 1)],
        [("a dog ran fast", 0), ("the quiet bird sang", 1)],
    )
