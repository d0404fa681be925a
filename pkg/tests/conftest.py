import os
import random

import pytest

from aggdetect.corpus import (
    Corpus,
    Label,
    LabeledComment,
    Language,
    Provenance,
    Split,
)

os.environ.setdefault("HF_HUB_OFFLINE", "1")
os.environ.setdefault("TRANSFORMERS_OFFLINE", "1")

# Word pools that make the synthetic labels learnable: each label has its
# own signal vocabulary plus shared filler words.
_SIGNAL = {
    Label.NAG: ["peace", "friend", "lovely", "thanks", "agree", "nice", "support"],
    Label.OAG: ["idiot", "stupid", "shut", "hate", "trash", "loser", "garbage"],
    Label.CAG: ["sure", "genius", "classy", "brave", "wow", "special", "bless"],
}
_FILLER = ["the", "you", "this", "is", "a", "so", "very", "really", "and", "people"]


def make_comment(i, label, language=Language.EN, text=None, provenance=Provenance.RAW,
                 source_id=None):
    return LabeledComment(
        id=f"c{i}",
        text=text or f"comment number {i}",
        label=label,
        language=language,
        provenance=provenance,
        source_id=source_id,
    )


def synthetic_comment(i, label, rng, language=Language.EN, prefix="s"):
    n = rng.randint(4, 9)
    words = []
    for _ in range(n):
        pool = _SIGNAL[label] if rng.random() < 0.6 else _FILLER
        words.append(rng.choice(pool))
    return LabeledComment(
        id=f"{prefix}{label.value}{i}", text=" ".join(words), label=label,
        language=language
    )


def synthetic_corpus(per_label, seed=0, language=Language.EN, split=Split.TRAINING,
                     prefix="s"):
    """Balanced synthetic corpus whose labels are predictable from the text."""
    rng = random.Random(seed)
    comments = []
    for label in Label:
        for i in range(per_label):
            comments.append(synthetic_comment(i, label, rng, language, prefix))
    return Corpus(tuple(comments), split, language)


def counts_corpus(n_nag, n_oag, n_cag, seed=0, language=Language.EN,
                  split=Split.TRAINING):
    """Synthetic corpus with an exact per-label distribution."""
    rng = random.Random(seed)
    comments = []
    for label, n in ((Label.NAG, n_nag), (Label.OAG, n_oag), (Label.CAG, n_cag)):
        for i in range(n):
            comments.append(synthetic_comment(i, label, rng, language))
    return Corpus(tuple(comments), split, language)


@pytest.fixture(scope="session")
def tiny_bert_checkpoint(tmp_path_factory):
    """Local stand-in encoder checkpoint so tests never touch the network."""
    from transformers import BertConfig, BertForSequenceClassification, BertTokenizer

    root = tmp_path_factory.mktemp("tiny_bert")
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
    vocab += sorted({w for pool in _SIGNAL.values() for w in pool} | set(_FILLER))
    vocab += ["##" + c for c in "abcdefghijklmnopqrstuvwxyz"]
    vocab += list("abcdefghijklmnopqrstuvwxyz0123456789")
    vocab_file = root / "vocab.txt"
    vocab_file.write_text("\n".join(vocab) + "\n", encoding="utf-8")
    tokenizer = BertTokenizer(str(vocab_file))
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=64,
        num_labels=3,
    )
    import torch

    torch.manual_seed(0)
    model = BertForSequenceClassification(config)
    out = root / "checkpoint"
    model.save_pretrained(out)
    tokenizer.save_pretrained(out)
    return str(out)


@pytest.fixture(scope="session")
def tiny_gpt2_checkpoint(tmp_path_factory):
    """Local stand-in decoder checkpoint (byte-level tokenizer, no merges)."""
    import json

    from transformers import GPT2Config, GPT2ForSequenceClassification, GPT2Tokenizer

    def bytes_to_unicode():
        # byte -> printable-unicode map used by GPT-2's byte-level BPE
        bs = (
            list(range(ord("!"), ord("~") + 1))
            + list(range(ord("\xa1"), ord("\xac") + 1))
            + list(range(ord("\xae"), ord("\xff") + 1))
        )
        cs = bs[:]
        n = 0
        for b in range(2**8):
            if b not in bs:
                bs.append(b)
                cs.append(2**8 + n)
                n += 1
        return dict(zip(bs, [chr(c) for c in cs]))

    root = tmp_path_factory.mktemp("tiny_gpt2")
    byte_chars = list(bytes_to_unicode().values())
    vocab = {ch: i for i, ch in enumerate(byte_chars)}
    vocab["<|endoftext|>"] = len(vocab)
    (root / "vocab.json").write_text(json.dumps(vocab), encoding="utf-8")
    (root / "merges.txt").write_text("#version: 0.2\n", encoding="utf-8")
    tokenizer = GPT2Tokenizer(str(root / "vocab.json"), str(root / "merges.txt"))
    config = GPT2Config(
        vocab_size=len(vocab),
        n_embd=32,
        n_layer=2,
        n_head=2,
        n_positions=64,
        num_labels=3,
        pad_token_id=vocab["<|endoftext|>"],
        bos_token_id=vocab["<|endoftext|>"],
        eos_token_id=vocab["<|endoftext|>"],
    )
    import torch

    torch.manual_seed(0)
    model = GPT2ForSequenceClassification(config)
    out = root / "checkpoint"
    model.save_pretrained(out)
    tokenizer.save_pretrained(out)
    return str(out)
