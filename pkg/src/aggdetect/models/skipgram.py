"""Skip-gram word embeddings trained with negative sampling.

For each center word the model learns to score true context words (within
a window) above negative words drawn from the unigram^(3/4) distribution.
Gradients are analytic and the update is plain SGD, so training is exactly
reproducible for a fixed seed; the loss/gradient pair is exposed on its
own so it can be checked against finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..corpus import Corpus
from ..features import PAD_INDEX, UNK_INDEX, Vocabulary, fit_vocabulary, word_tokenize
from .recurrent import EmbeddingMatrix, sigmoid

__all__ = ["SkipgramResult", "sgns_loss_and_grads", "skipgram_train"]


@dataclass(frozen=True)
class SkipgramResult:
    embeddings: EmbeddingMatrix  # center-word (input) vectors
    context_vectors: np.ndarray  # context (output) vectors, same shape
    vocab: Vocabulary

    def affinity(self, center: str, context: str) -> float:
        """sigmoid(v_center . u_context): trained co-occurrence score."""
        i = self.vocab.lookup(center)
        j = self.vocab.lookup(context)
        return float(sigmoid(self.embeddings.vectors[i] @ self.context_vectors[j]))


def sgns_loss_and_grads(center_vec, context_vec, negative_vecs):
    """Negative-sampling loss for one (center, context, negatives) triple.

    loss = -log sigmoid(v.u) - sum_k log sigmoid(-v.n_k)

    Returns (loss, grad_center, grad_context, grad_negatives).
    """
    center_vec = np.asarray(center_vec, dtype=float)
    context_vec = np.asarray(context_vec, dtype=float)
    negative_vecs = np.asarray(negative_vecs, dtype=float)
    s_pos = sigmoid(center_vec @ context_vec)
    s_neg = sigmoid(negative_vecs @ center_vec)  # [K]
    eps = 1e-12
    loss = -np.log(s_pos + eps) - np.sum(np.log(1.0 - s_neg + eps))
    grad_center = (s_pos - 1.0) * context_vec + s_neg @ negative_vecs
    grad_context = (s_pos - 1.0) * center_vec
    grad_negatives = s_neg[:, None] * center_vec[None, :]
    return float(loss), grad_center, grad_context, grad_negatives


def _training_stream(corpus: Corpus, vocab: Vocabulary) -> list[list[int]]:
    """Comment texts as in-vocabulary index sequences (OOV dropped)."""
    stream = []
    for comment in corpus:
        ids = [vocab.lookup(t) for t in word_tokenize(comment.text)]
        ids = [i for i in ids if i not in (PAD_INDEX, UNK_INDEX)]
        if ids:
            stream.append(ids)
    return stream


def skipgram_train(
    corpus: Corpus,
    dim: int = 100,
    window: int = 5,
    negatives: int = 5,
    epochs: int = 5,
    seed: int = 0,
    vocab: Vocabulary | None = None,
    learning_rate: float = 0.025,
    max_vocab: int = 20000,
) -> SkipgramResult:
    """Train skip-gram with negative sampling; deterministic per seed.

    With epochs=0 the returned embeddings are the seeded initialization.
    """
    if min(dim, window, negatives) < 1:
        raise ValueError("dim, window, and negatives must all be >= 1")
    if len(corpus) == 0:
        raise ValueError("corpus is empty")
    if vocab is None:
        vocab = fit_vocabulary(corpus, max_size=max_vocab)
    n_words = len(vocab.index)
    if n_words < negatives + 1:
        raise ValueError(
            f"vocabulary of {n_words} words cannot support {negatives} negatives"
        )
    rng = np.random.default_rng(seed)
    size = n_words + 2
    W = rng.uniform(-0.5 / dim, 0.5 / dim, (size, dim))
    W[PAD_INDEX] = 0.0
    C = np.zeros((size, dim))

    stream = _training_stream(corpus, vocab)
    counts = np.zeros(size)
    for ids in stream:
        for i in ids:
            counts[i] += 1
    weights = counts**0.75
    total = weights.sum()
    if total == 0:
        raise ValueError("corpus has no in-vocabulary tokens")
    cumulative = np.cumsum(weights / total)

    def sample_negatives(exclude: int) -> np.ndarray:
        out = np.empty(negatives, dtype=np.int64)
        k = 0
        while k < negatives:
            cand = int(np.searchsorted(cumulative, rng.random()))
            if cand != exclude:
                out[k] = cand
                k += 1
        return out

    for _ in range(epochs):
        for ids in stream:
            for pos, center in enumerate(ids):
                lo = max(0, pos - window)
                hi = min(len(ids), pos + window + 1)
                for ctx_pos in range(lo, hi):
                    if ctx_pos == pos:
                        continue
                    context = ids[ctx_pos]
                    negs = sample_negatives(context)
                    _, g_w, g_c, g_n = sgns_loss_and_grads(
                        W[center], C[context], C[negs]
                    )
                    W[center] -= learning_rate * g_w
                    C[context] -= learning_rate * g_c
                    # duplicate negatives accumulate, matching the loss
                    np.subtract.at(C, negs, learning_rate * g_n)
    W[PAD_INDEX] = 0.0
    return SkipgramResult(EmbeddingMatrix(W), C, vocab)
