"""Trainable classifier networks built on torch autograd.

The recurrent cell here computes the same gate equations as the numpy
reference in :mod:`.recurrent` (single weight matrix per gate over the
concatenation [h_prev, x]); a test cross-checks the two. Padding never
touches the recurrent state, so appending PAD tokens cannot change the
output.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from .recurrent import LstmParams

__all__ = [
    "GateLstmCell",
    "LstmClassifier",
    "BiLstmClassifier",
    "LstmAutoencoder",
    "AutoencoderClassifier",
]


class GateLstmCell(nn.Module):
    """LSTM cell with explicit forget/input/candidate/output gates."""

    def __init__(self, input_size: int, hidden_size: int):
        super().__init__()
        self.input_size = input_size
        self.hidden_size = hidden_size
        concat = hidden_size + input_size
        scale = 1.0 / concat**0.5
        for gate in ("f", "i", "c", "o"):
            w = torch.empty(hidden_size, concat).uniform_(-scale, scale)
            b = torch.zeros(hidden_size)
            self.register_parameter(f"W_{gate}", nn.Parameter(w))
            self.register_parameter(f"b_{gate}", nn.Parameter(b))

    def forward(self, x, h_prev, c_prev):
        z = torch.cat([h_prev, x], dim=-1)
        f_t = torch.sigmoid(z @ self.W_f.T + self.b_f)
        i_t = torch.sigmoid(z @ self.W_i.T + self.b_i)
        c_tilde = torch.tanh(z @ self.W_c.T + self.b_c)
        c_t = c_prev * f_t + c_tilde * i_t
        o_t = torch.sigmoid(z @ self.W_o.T + self.b_o)
        h_t = o_t * torch.tanh(c_t)
        return h_t, c_t

    def load_numpy_params(self, params: LstmParams) -> None:
        with torch.no_grad():
            for gate in ("f", "i", "c", "o"):
                getattr(self, f"W_{gate}").copy_(
                    torch.as_tensor(getattr(params, f"W_{gate}"), dtype=self.W_f.dtype)
                )
                getattr(self, f"b_{gate}").copy_(
                    torch.as_tensor(getattr(params, f"b_{gate}"), dtype=self.b_f.dtype)
                )


def _run_cell(cell: GateLstmCell, x, mask, reverse: bool = False):
    """Iterate a cell over time with mask-gated state updates; returns final h."""
    batch, max_len, _ = x.shape
    h = x.new_zeros(batch, cell.hidden_size)
    c = x.new_zeros(batch, cell.hidden_size)
    steps = range(max_len - 1, -1, -1) if reverse else range(max_len)
    for t in steps:
        m = mask[:, t].unsqueeze(1)
        h_new, c_new = cell(x[:, t, :], h, c)
        h = m * h_new + (1 - m) * h
        c = m * c_new + (1 - m) * c
    return h


def _make_embedding(vocab_size, dim, pretrained: np.ndarray | None, freeze: bool):
    emb = nn.Embedding(vocab_size, dim, padding_idx=0)
    if pretrained is not None:
        with torch.no_grad():
            emb.weight.copy_(torch.as_tensor(pretrained, dtype=emb.weight.dtype))
    emb.weight.requires_grad_(not freeze)
    return emb


class LstmClassifier(nn.Module):
    def __init__(self, vocab_size, embedding_dim=128, hidden_size=128, num_classes=3,
                 dropout=0.3, pretrained_embeddings: np.ndarray | None = None,
                 freeze_embeddings=False):
        super().__init__()
        self.embedding = _make_embedding(
            vocab_size, embedding_dim, pretrained_embeddings, freeze_embeddings
        )
        self.cell = GateLstmCell(embedding_dim, hidden_size)
        self.dropout = nn.Dropout(dropout)
        self.head = nn.Linear(hidden_size, num_classes)

    def forward(self, token_ids, attention_mask):
        x = self.embedding(token_ids)
        h = _run_cell(self.cell, x, attention_mask.to(x.dtype))
        return self.head(self.dropout(h))


class BiLstmClassifier(nn.Module):
    def __init__(self, vocab_size, embedding_dim=128, hidden_size=128, num_classes=3,
                 dropout=0.3, pretrained_embeddings: np.ndarray | None = None,
                 freeze_embeddings=False):
        super().__init__()
        self.embedding = _make_embedding(
            vocab_size, embedding_dim, pretrained_embeddings, freeze_embeddings
        )
        self.forward_cell = GateLstmCell(embedding_dim, hidden_size)
        self.backward_cell = GateLstmCell(embedding_dim, hidden_size)
        self.dropout = nn.Dropout(dropout)
        self.head = nn.Linear(2 * hidden_size, num_classes)

    def forward(self, token_ids, attention_mask):
        x = self.embedding(token_ids)
        m = attention_mask.to(x.dtype)
        h_f = _run_cell(self.forward_cell, x, m)
        h_b = _run_cell(self.backward_cell, x, m, reverse=True)
        return self.head(self.dropout(torch.cat([h_f, h_b], dim=1)))


class LstmAutoencoder(nn.Module):
    """Encoder-decoder over token sequences trained to reconstruct them.

    The encoder's final hidden state summarizes the sequence; the decoder
    receives that summary at every step and predicts the token at each
    position.
    """

    def __init__(self, vocab_size, embedding_dim=128, hidden_size=128, dropout=0.3):
        super().__init__()
        self.embedding = _make_embedding(vocab_size, embedding_dim, None, False)
        self.encoder = GateLstmCell(embedding_dim, hidden_size)
        self.decoder = GateLstmCell(hidden_size, hidden_size)
        self.dropout = nn.Dropout(dropout)
        self.out = nn.Linear(hidden_size, vocab_size)
        self.hidden_size = hidden_size

    def encode(self, token_ids, attention_mask):
        x = self.embedding(token_ids)
        return _run_cell(self.encoder, x, attention_mask.to(x.dtype))

    def forward(self, token_ids, attention_mask):
        """Per-position reconstruction logits [B, L, vocab]."""
        summary = self.encode(token_ids, attention_mask)
        batch, max_len = token_ids.shape
        h = summary.new_zeros(batch, self.hidden_size)
        c = summary.new_zeros(batch, self.hidden_size)
        logits = []
        for _ in range(max_len):
            h, c = self.decoder(summary, h, c)
            logits.append(self.out(self.dropout(h)))
        return torch.stack(logits, dim=1)


class AutoencoderClassifier(nn.Module):
    """Classification head over a (pre)trained autoencoder's summary vector."""

    def __init__(self, autoencoder: LstmAutoencoder, num_classes=3, dropout=0.3,
                 freeze_encoder=False):
        super().__init__()
        self.autoencoder = autoencoder
        self.dropout = nn.Dropout(dropout)
        self.head = nn.Linear(autoencoder.hidden_size, num_classes)
        self.freeze_encoder = freeze_encoder
        if freeze_encoder:
            for p in self.autoencoder.parameters():
                p.requires_grad_(False)

    def forward(self, token_ids, attention_mask):
        summary = self.autoencoder.encode(token_ids, attention_mask)
        if self.freeze_encoder:
            summary = summary.detach()
        return self.head(self.dropout(summary))
