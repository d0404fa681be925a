"""Reference implementations of the LSTM cell and the bidirectional pass.

These are plain numpy functions written directly from the gate equations:

    f_t = sigmoid(W_f . [h_{t-1}, x_t] + b_f)
    i_t = sigmoid(W_i . [h_{t-1}, x_t] + b_i)
    c~_t = tanh(W_c . [h_{t-1}, x_t] + b_c)
    C_t = C_{t-1} * f_t + c~_t * i_t
    o_t = sigmoid(W_o . [h_{t-1}, x_t] + b_o)
    h_t = o_t * tanh(C_t)

The bidirectional pass supports two modes: "gated" runs a full LSTM in
each direction (what the classifiers use); "plain" runs the simplified
single-weight recurrences h_f = f(w_f1 x + w_f2 h_prev) and
h_b = f(w_b1 x + w_b2 h_next) so the math can be checked by hand.
Per-position combined outputs are O = g(w_o1 h_f + w_o2 h_b).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "LstmParams",
    "LstmState",
    "BiLstmParams",
    "BiLstmOutput",
    "EmbeddingMatrix",
    "sigmoid",
    "lstm_step",
    "lstm_forward",
    "bilstm_forward",
]


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


@dataclass(frozen=True)
class LstmParams:
    """Gate weights over the concatenation [h_{t-1}, x_t] plus biases."""

    W_f: np.ndarray
    W_i: np.ndarray
    W_c: np.ndarray
    W_o: np.ndarray
    b_f: np.ndarray
    b_i: np.ndarray
    b_c: np.ndarray
    b_o: np.ndarray

    def __post_init__(self):
        h = self.hidden_size
        concat = self.W_f.shape[1]
        for name in ("W_f", "W_i", "W_c", "W_o"):
            if getattr(self, name).shape != (h, concat):
                raise ValueError(f"{name} shape mismatch")
        for name in ("b_f", "b_i", "b_c", "b_o"):
            if getattr(self, name).shape != (h,):
                raise ValueError(f"{name} shape mismatch")

    @property
    def hidden_size(self) -> int:
        return self.W_f.shape[0]

    @property
    def input_size(self) -> int:
        return self.W_f.shape[1] - self.hidden_size

    @classmethod
    def zeros(cls, input_size: int, hidden_size: int) -> "LstmParams":
        w = lambda: np.zeros((hidden_size, hidden_size + input_size))
        b = lambda: np.zeros(hidden_size)
        return cls(w(), w(), w(), w(), b(), b(), b(), b())

    @classmethod
    def random(cls, input_size: int, hidden_size: int, rng: np.random.Generator,
               scale: float = 0.5) -> "LstmParams":
        w = lambda: rng.normal(0, scale, (hidden_size, hidden_size + input_size))
        b = lambda: rng.normal(0, scale, hidden_size)
        return cls(w(), w(), w(), w(), b(), b(), b(), b())


@dataclass(frozen=True)
class LstmState:
    h: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        if self.h.shape != self.c.shape:
            raise ValueError("hidden and cell vectors must have the same size")

    @classmethod
    def zeros(cls, hidden_size: int) -> "LstmState":
        return cls(np.zeros(hidden_size), np.zeros(hidden_size))


def lstm_step(x_t: np.ndarray, state: LstmState, params: LstmParams) -> LstmState:
    """One LSTM cell update; x_t may be [input] or [batch, input]."""
    batched = x_t.ndim == 2
    h_prev = state.h if state.h.ndim == x_t.ndim else state.h[None, :]
    c_prev = state.c if state.c.ndim == x_t.ndim else state.c[None, :]
    z = np.concatenate([h_prev, x_t], axis=-1)
    if z.shape[-1] != params.hidden_size + params.input_size:
        raise ValueError(
            f"input size {x_t.shape[-1]} incompatible with params "
            f"({params.input_size} expected)"
        )
    f_t = sigmoid(z @ params.W_f.T + params.b_f)
    i_t = sigmoid(z @ params.W_i.T + params.b_i)
    c_tilde = np.tanh(z @ params.W_c.T + params.b_c)
    c_t = c_prev * f_t + c_tilde * i_t
    o_t = sigmoid(z @ params.W_o.T + params.b_o)
    h_t = o_t * np.tanh(c_t)
    if not batched and h_t.ndim == 2:
        h_t, c_t = h_t[0], c_t[0]
    return LstmState(h_t, c_t)


@dataclass(frozen=True)
class EmbeddingMatrix:
    """vocab_size x dim real matrix; the PAD row (0) is frozen at zero."""

    vectors: np.ndarray

    def __post_init__(self):
        if self.vectors.ndim != 2:
            raise ValueError("embedding matrix must be 2-D")
        if np.any(self.vectors[0] != 0.0):
            raise ValueError("PAD row (index 0) must stay zero")

    @property
    def vocab_size(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @classmethod
    def random(cls, vocab_size: int, dim: int, rng: np.random.Generator,
               scale: float | None = None) -> "EmbeddingMatrix":
        scale = scale if scale is not None else 0.5 / dim
        vectors = rng.uniform(-scale, scale, (vocab_size, dim))
        vectors[0] = 0.0
        return cls(vectors)


def lstm_forward(batch, embeddings: EmbeddingMatrix, params: LstmParams) -> np.ndarray:
    """Run the cell over unmasked positions; returns final h per row [B, H].

    Padded positions never touch the state, so trailing PAD is a no-op.
    """
    from ..features import Scheme

    if batch.scheme is not Scheme.WORD_INDEX:
        raise ValueError("lstm_forward expects a word_index batch")
    n, max_len = batch.token_ids.shape
    h = np.zeros((n, params.hidden_size))
    c = np.zeros((n, params.hidden_size))
    x = embeddings.vectors[batch.token_ids]  # [B, L, D]
    for t in range(max_len):
        active = batch.attention_mask[:, t].astype(bool)
        if not active.any():
            break
        new = lstm_step(x[:, t, :], LstmState(h, c), params)
        h = np.where(active[:, None], new.h, h)
        c = np.where(active[:, None], new.c, c)
    return h


@dataclass(frozen=True)
class BiLstmParams:
    """Forward/backward direction parameters plus the output combiner.

    The plain-mode recurrences use scalar-per-unit weights w_f1, w_f2
    (forward) and w_b1, w_b2 (backward); the combiner applies w_o1, w_o2.
    """

    forward: LstmParams
    backward: LstmParams
    w_o1: np.ndarray
    w_o2: np.ndarray
    w_f1: np.ndarray | None = None
    w_f2: np.ndarray | None = None
    w_b1: np.ndarray | None = None
    w_b2: np.ndarray | None = None

    def __post_init__(self):
        if self.forward.hidden_size != self.backward.hidden_size:
            raise ValueError("forward and backward hidden sizes must match")

    @property
    def hidden_size(self) -> int:
        return self.forward.hidden_size


@dataclass(frozen=True)
class BiLstmOutput:
    h_forward_final: np.ndarray  # [B, H]
    h_backward_final: np.ndarray  # [B, H]
    combined: np.ndarray  # [B, 2H] concat of the two finals
    outputs: np.ndarray  # [B, L, H] per-position combined O


def _plain_direction(x, mask, w1, w2, reverse: bool) -> np.ndarray:
    """h_t = tanh(w1 x_t + w2 h_prev) over unmasked positions; [B, L, H]."""
    n, max_len, _ = x.shape
    hidden = w1.shape[0]
    h = np.zeros((n, hidden))
    states = np.zeros((n, max_len, hidden))
    steps = range(max_len - 1, -1, -1) if reverse else range(max_len)
    for t in steps:
        active = mask[:, t].astype(bool)
        new = np.tanh(x[:, t, :] @ w1.T + h @ w2.T)
        h = np.where(active[:, None], new, h)
        states[:, t, :] = h
    return states


def _gated_direction(x, mask, params: LstmParams, reverse: bool) -> np.ndarray:
    n, max_len, _ = x.shape
    h = np.zeros((n, params.hidden_size))
    c = np.zeros((n, params.hidden_size))
    states = np.zeros((n, max_len, params.hidden_size))
    steps = range(max_len - 1, -1, -1) if reverse else range(max_len)
    for t in steps:
        active = mask[:, t].astype(bool)
        new = lstm_step(x[:, t, :], LstmState(h, c), params)
        h = np.where(active[:, None], new.h, h)
        c = np.where(active[:, None], new.c, c)
        states[:, t, :] = h
    return states


def bilstm_forward(
    batch, embeddings: EmbeddingMatrix, params: BiLstmParams, mode: str = "gated"
) -> BiLstmOutput:
    """Forward pass over t=1..n, backward over t=n..1, tanh combiner.

    The per-sequence representation is the concatenation of the final
    forward state (at each row's true last position) and the final
    backward state (at position 0).
    """
    from ..features import Scheme

    if batch.scheme is not Scheme.WORD_INDEX:
        raise ValueError("bilstm_forward expects a word_index batch")
    x = embeddings.vectors[batch.token_ids]
    mask = batch.attention_mask
    if mode == "plain":
        if params.w_f1 is None:
            raise ValueError("plain mode requires w_f1/w_f2/w_b1/w_b2")
        fwd = _plain_direction(x, mask, params.w_f1, params.w_f2, reverse=False)
        bwd = _plain_direction(x, mask, params.w_b1, params.w_b2, reverse=True)
    elif mode == "gated":
        fwd = _gated_direction(x, mask, params.forward, reverse=False)
        bwd = _gated_direction(x, mask, params.backward, reverse=True)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    outputs = np.tanh(fwd @ params.w_o1.T + bwd @ params.w_o2.T)
    outputs *= mask[:, :, None]
    n = batch.token_ids.shape[0]
    last = np.maximum(batch.lengths - 1, 0)
    h_fwd_final = fwd[np.arange(n), last, :]
    h_bwd_final = bwd[:, 0, :]
    empty = (batch.lengths == 0)[:, None]
    h_fwd_final = np.where(empty, 0.0, h_fwd_final)
    h_bwd_final = np.where(empty, 0.0, h_bwd_final)
    return BiLstmOutput(
        h_fwd_final,
        h_bwd_final,
        np.concatenate([h_fwd_final, h_bwd_final], axis=1),
        outputs,
    )
