"""Numeric input representation: word-index padded sequences for the
recurrent models and subword sequences with classification/separator
markers for the transformer models.

Word-index tokenization is Unicode-aware (Bangla and Devanagari word
characters survive) and lowercases Latin-script tokens only; casing is a
Latin-script concept and must not touch other scripts.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .corpus import Corpus

__all__ = [
    "PAD_INDEX",
    "UNK_INDEX",
    "Scheme",
    "Vocabulary",
    "TokenizedBatch",
    "FeatureError",
    "word_tokenize",
    "fit_vocabulary",
    "encode_word_index",
    "decode_word_index",
    "encode_transformer",
]

PAD_INDEX = 0
UNK_INDEX = 1

# \w alone drops combining marks (Mn), which would split Bangla/Devanagari
# words at every vowel sign; include marks explicitly.
_WORD_RE = re.compile(r"[\wऀ-ॿঀ-৿‍']+", re.UNICODE)
_LATIN_RE = re.compile(r"[A-Za-z0-9_']+")


class FeatureError(Exception):
    pass


class Scheme(str, Enum):
    WORD_INDEX = "word_index"
    TRANSFORMER_SUBWORD = "transformer_subword"


def word_tokenize(text: str) -> list[str]:
    """Split on whitespace/punctuation; lowercase Latin-script tokens only."""
    tokens = _WORD_RE.findall(text)
    return [t.lower() if _LATIN_RE.fullmatch(t) else t for t in tokens]


@dataclass(frozen=True)
class Vocabulary:
    """word -> contiguous index map with PAD=0 and UNK=1 reserved."""

    index: dict[str, int]
    max_size: int

    def __post_init__(self):
        indices = sorted(self.index.values())
        if indices != list(range(2, 2 + len(indices))):
            raise FeatureError("vocabulary indices must be contiguous from 2")
        if len(self.index) + 2 > self.max_size:
            raise FeatureError("vocabulary exceeds max_size")

    def __len__(self):
        return len(self.index) + 2  # PAD and UNK

    def lookup(self, token: str) -> int:
        return self.index.get(token, UNK_INDEX)

    def inverse(self) -> dict[int, str]:
        return {i: w for w, i in self.index.items()}

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for word, idx in sorted(self.index.items(), key=lambda kv: kv[1]):
                fh.write(f"{word}\t{idx}\n")

    @classmethod
    def load(cls, path: str | Path, max_size: int | None = None) -> "Vocabulary":
        index = {}
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if line:
                word, _, idx = line.rpartition("\t")
                index[word] = int(idx)
        return cls(index, max_size or len(index) + 2)


def fit_vocabulary(
    corpus: Corpus, max_size: int = 20000, min_frequency: int = 1
) -> Vocabulary:
    """Keep the max_size-2 most frequent tokens with frequency >= min_frequency.

    Ties break by first occurrence in the corpus, so refitting on the same
    corpus is reproducible.
    """
    if max_size < 3:
        raise FeatureError("max_size must leave room for PAD, UNK, and one word")
    if len(corpus) == 0:
        raise FeatureError("cannot fit a vocabulary on an empty corpus")
    counts: dict[str, int] = {}
    first_seen: dict[str, int] = {}
    position = 0
    for comment in corpus:
        for tok in word_tokenize(comment.text):
            counts[tok] = counts.get(tok, 0) + 1
            if tok not in first_seen:
                first_seen[tok] = position
            position += 1
    kept = [w for w, c in counts.items() if c >= min_frequency]
    kept.sort(key=lambda w: (-counts[w], first_seen[w]))
    kept = kept[: max_size - 2]
    return Vocabulary({w: i + 2 for i, w in enumerate(kept)}, max_size)


@dataclass(frozen=True)
class TokenizedBatch:
    """Padded integer token matrix with its mask and true lengths.

    Post-padding convention: mask[i][j] == 1 iff j < lengths[i].
    """

    token_ids: np.ndarray  # int64 [batch, max_len]
    attention_mask: np.ndarray  # int64 {0,1}, same shape
    lengths: np.ndarray  # int64 [batch]
    scheme: Scheme

    def __post_init__(self):
        if self.token_ids.shape != self.attention_mask.shape:
            raise FeatureError("token_ids and attention_mask shapes differ")
        if self.lengths.shape != (self.token_ids.shape[0],):
            raise FeatureError("lengths must have one entry per row")
        expected = (
            np.arange(self.token_ids.shape[1])[None, :] < self.lengths[:, None]
        ).astype(np.int64)
        if not np.array_equal(self.attention_mask, expected):
            raise FeatureError("mask inconsistent with lengths (post-padding rule)")

    def __len__(self):
        return self.token_ids.shape[0]


def encode_word_index(
    texts: list[str], vocab: Vocabulary, max_len: int = 100
) -> TokenizedBatch:
    """Map texts to padded index rows; OOV -> UNK, truncation keeps the head."""
    if max_len < 1:
        raise FeatureError("max_len must be >= 1")
    ids = np.full((len(texts), max_len), PAD_INDEX, dtype=np.int64)
    lengths = np.zeros(len(texts), dtype=np.int64)
    for i, text in enumerate(texts):
        toks = word_tokenize(text)[:max_len]
        for j, tok in enumerate(toks):
            ids[i, j] = vocab.lookup(tok)
        lengths[i] = len(toks)
    mask = (np.arange(max_len)[None, :] < lengths[:, None]).astype(np.int64)
    return TokenizedBatch(ids, mask, lengths, Scheme.WORD_INDEX)


def decode_word_index(batch: TokenizedBatch, vocab: Vocabulary) -> list[list[str]]:
    """Inverse of encode_word_index for in-vocabulary tokens (UNK stays a marker)."""
    inv = vocab.inverse()
    out = []
    for row, n in zip(batch.token_ids, batch.lengths):
        out.append([inv.get(int(t), "<unk>") for t in row[:n]])
    return out


def encode_transformer(
    texts: list[str], subword_tokenizer, max_len: int = 128
) -> TokenizedBatch:
    """Encode with a pretrained subword tokenizer into marker-framed rows.

    Every row starts with the classification marker and its content ends
    with the separator marker; truncation preserves both. The tokenizer
    must define both markers (encoder-style checkpoints).
    """
    if max_len < 3:
        raise FeatureError("max_len must fit the two markers plus content")
    if subword_tokenizer.cls_token_id is None or subword_tokenizer.sep_token_id is None:
        raise FeatureError(
            "tokenizer lacks classification/separator markers; wrong model family"
        )
    if not texts:
        empty = np.zeros((0, max_len), dtype=np.int64)
        return TokenizedBatch(
            empty, empty.copy(), np.zeros(0, dtype=np.int64), Scheme.TRANSFORMER_SUBWORD
        )
    enc = subword_tokenizer(
        texts,
        padding="max_length",
        truncation=True,
        max_length=max_len,
        return_attention_mask=True,
    )
    ids = np.asarray(enc["input_ids"], dtype=np.int64)
    mask = np.asarray(enc["attention_mask"], dtype=np.int64)
    if ids.size == 0:
        ids = ids.reshape(0, max_len)
        mask = mask.reshape(0, max_len)
    lengths = mask.sum(axis=1).astype(np.int64)
    return TokenizedBatch(ids, mask, lengths, Scheme.TRANSFORMER_SUBWORD)
