"""Model specs, the shared seeded training loop, prediction, and checkpoints.

Seven classifier kinds share one epoch loop: cross-entropy loss, Adam,
early stopping on validation loss, best-checkpoint restore, and per-epoch
train/validation curves. Everything is seeded so two runs with the same
inputs produce the same curves.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
import torch
from torch import nn

from ..corpus import Corpus, Label, Language
from ..features import (
    Scheme,
    TokenizedBatch,
    Vocabulary,
    encode_transformer,
    encode_word_index,
    fit_vocabulary,
)
from .networks import (
    AutoencoderClassifier,
    BiLstmClassifier,
    LstmAutoencoder,
    LstmClassifier,
)
from .pretrained import load_pretrained_classifier
from .skipgram import skipgram_train

__all__ = [
    "ModelKind",
    "ModelSpec",
    "ModelHandle",
    "TrainingRun",
    "TrainingError",
    "LABEL_ORDER",
    "build_classifier",
    "train",
    "predict",
    "autoencoder_pretrain",
    "save_checkpoint",
    "load_checkpoint",
]

LABEL_ORDER = (Label.NAG, Label.OAG, Label.CAG)
_LABEL_TO_INDEX = {l: i for i, l in enumerate(LABEL_ORDER)}


class TrainingError(Exception):
    pass


class ModelKind(str, Enum):
    LSTM = "lstm"
    BILSTM = "bilstm"
    LSTM_AUTOENCODER = "lstm_autoencoder"
    WORD2VEC_CLASSIFIER = "word2vec_classifier"
    BERT_BASE = "bert_base"
    BERT_MULTILINGUAL = "bert_multilingual"
    GPT2_MEDIUM = "gpt2_medium"


_RECURRENT = {
    ModelKind.LSTM,
    ModelKind.BILSTM,
    ModelKind.LSTM_AUTOENCODER,
    ModelKind.WORD2VEC_CLASSIFIER,
}
_PRETRAINED = {ModelKind.BERT_BASE, ModelKind.BERT_MULTILINGUAL, ModelKind.GPT2_MEDIUM}

_RECURRENT_DEFAULTS = {
    "embedding_dim": 128,
    "hidden_size": 128,
    "dropout": 0.3,
    "batch_size": 32,
    "learning_rate": 1e-3,
    "epochs": 30,
    "patience": 3,
    "max_len": 100,
    "vocab_size": 20000,
    "freeze_embeddings": False,
    "freeze_encoder": False,
    "skipgram_window": 5,
    "skipgram_negatives": 5,
    "skipgram_epochs": 3,
    "pretrain_epochs": 5,
}
_TRANSFORMER_DEFAULTS = {
    "learning_rate": 2e-5,
    "batch_size": 16,
    "epochs": 4,
    "patience": 3,
    "max_len": 128,
    "dropout": 0.1,
}


@dataclass(frozen=True)
class ModelSpec:
    kind: ModelKind
    hyperparameters: dict = field(default_factory=dict)
    num_classes: int = 3
    language: Language | None = None
    checkpoint: str | None = None

    def __post_init__(self):
        defaults = (
            _RECURRENT_DEFAULTS if self.kind in _RECURRENT else _TRANSFORMER_DEFAULTS
        )
        merged = {**defaults, **self.hyperparameters}
        object.__setattr__(self, "hyperparameters", merged)

    @property
    def scheme(self) -> Scheme:
        return Scheme.WORD_INDEX if self.kind in _RECURRENT else Scheme.TRANSFORMER_SUBWORD

    def hp(self, name: str):
        return self.hyperparameters[name]

    def to_manifest(self) -> dict:
        return {
            "kind": self.kind.value,
            "hyperparameters": dict(sorted(self.hyperparameters.items())),
            "num_classes": self.num_classes,
            "language": self.language.value if self.language else None,
            "checkpoint": self.checkpoint,
        }


@dataclass
class ModelHandle:
    """A built model plus everything needed to encode and predict."""

    spec: ModelSpec
    module: nn.Module
    vocab: Vocabulary | None = None
    tokenizer: object | None = None

    def encode(self, texts: list[str]) -> TokenizedBatch:
        max_len = self.spec.hp("max_len")
        if self.spec.scheme is Scheme.WORD_INDEX:
            return encode_word_index(texts, self.vocab, max_len)
        if self.spec.kind is ModelKind.GPT2_MEDIUM:
            return _encode_causal(texts, self.tokenizer, max_len)
        return encode_transformer(texts, self.tokenizer, max_len)


def _encode_causal(texts, tokenizer, max_len) -> TokenizedBatch:
    """Right-padded causal encoding (no classification/separator markers)."""
    enc = tokenizer(
        texts, padding="max_length", truncation=True, max_length=max_len,
        return_attention_mask=True,
    )
    ids = np.asarray(enc["input_ids"], dtype=np.int64).reshape(-1, max_len)
    mask = np.asarray(enc["attention_mask"], dtype=np.int64).reshape(-1, max_len)
    lengths = mask.sum(axis=1).astype(np.int64)
    return TokenizedBatch(ids, mask, lengths, Scheme.TRANSFORMER_SUBWORD)


@dataclass
class TrainingRun:
    spec: ModelSpec
    seed: int
    train_loss: list[float]
    train_accuracy: list[float]
    val_loss: list[float]
    val_accuracy: list[float]
    best_epoch: int
    corpus_manifest: str | None = None
    checkpoint_dir: str | None = None

    @property
    def epochs_trained(self) -> int:
        return len(self.train_loss)

    def to_manifest(self) -> dict:
        return {
            "spec": self.spec.to_manifest(),
            "seed": self.seed,
            "train_loss": self.train_loss,
            "train_accuracy": self.train_accuracy,
            "val_loss": self.val_loss,
            "val_accuracy": self.val_accuracy,
            "best_epoch": self.best_epoch,
            "corpus_manifest": self.corpus_manifest,
        }


def build_classifier(
    spec: ModelSpec,
    vocab: Vocabulary | None = None,
    train_corpus: Corpus | None = None,
    seed: int = 0,
) -> ModelHandle:
    """Construct a model handle for any of the seven kinds.

    Recurrent kinds need a vocabulary (fitted from ``train_corpus`` when
    not given). The word2vec kind trains skip-gram embeddings on the
    training corpus first and initializes the encoder's embedding with
    them.
    """
    torch.manual_seed(seed)
    if spec.kind in _PRETRAINED:
        tokenizer, model = load_pretrained_classifier(
            spec.kind.value,
            language=spec.language,
            checkpoint=spec.checkpoint,
            num_classes=spec.num_classes,
        )
        return ModelHandle(spec, model, tokenizer=tokenizer)

    if vocab is None:
        if train_corpus is None:
            raise TrainingError(f"{spec.kind.value} needs a vocabulary or a corpus")
        vocab = fit_vocabulary(train_corpus, max_size=spec.hp("vocab_size"))
    common = dict(
        vocab_size=len(vocab),
        embedding_dim=spec.hp("embedding_dim"),
        hidden_size=spec.hp("hidden_size"),
        dropout=spec.hp("dropout"),
    )
    if spec.kind is ModelKind.LSTM:
        module = LstmClassifier(num_classes=spec.num_classes, **common)
    elif spec.kind is ModelKind.BILSTM:
        module = BiLstmClassifier(num_classes=spec.num_classes, **common)
    elif spec.kind is ModelKind.LSTM_AUTOENCODER:
        auto = LstmAutoencoder(**common)
        module = AutoencoderClassifier(
            auto,
            num_classes=spec.num_classes,
            dropout=spec.hp("dropout"),
            freeze_encoder=spec.hp("freeze_encoder"),
        )
    elif spec.kind is ModelKind.WORD2VEC_CLASSIFIER:
        if train_corpus is None:
            # architecture only (checkpoint loading overwrites the weights)
            module = LstmClassifier(num_classes=spec.num_classes, **common)
            return ModelHandle(spec, module, vocab=vocab)
        result = skipgram_train(
            train_corpus,
            dim=spec.hp("embedding_dim"),
            window=spec.hp("skipgram_window"),
            negatives=spec.hp("skipgram_negatives"),
            epochs=spec.hp("skipgram_epochs"),
            seed=seed,
            vocab=vocab,
        )
        module = LstmClassifier(
            num_classes=spec.num_classes,
            pretrained_embeddings=result.embeddings.vectors,
            freeze_embeddings=spec.hp("freeze_embeddings"),
            **common,
        )
    else:
        raise TrainingError(f"unknown model kind {spec.kind}")
    return ModelHandle(spec, module, vocab=vocab)


def _labels_tensor(corpus: Corpus) -> torch.Tensor:
    return torch.tensor([_LABEL_TO_INDEX[c.label] for c in corpus], dtype=torch.long)


def _forward_logits(handle: ModelHandle, ids: torch.Tensor, mask: torch.Tensor):
    if handle.spec.kind in _PRETRAINED:
        return handle.module(input_ids=ids, attention_mask=mask).logits
    return handle.module(ids, mask)


def _epoch_eval(handle, ids, mask, labels, batch_size, loss_fn):
    handle.module.eval()
    total_loss, correct = 0.0, 0
    with torch.no_grad():
        for start in range(0, len(labels), batch_size):
            sl = slice(start, start + batch_size)
            logits = _forward_logits(handle, ids[sl], mask[sl])
            total_loss += loss_fn(logits, labels[sl]).item() * (logits.shape[0])
            correct += int((logits.argmax(dim=1) == labels[sl]).sum())
    n = len(labels)
    return total_loss / n, correct / n


def train(
    handle: ModelHandle,
    train_corpus: Corpus,
    val_corpus: Corpus,
    seed: int = 0,
) -> TrainingRun:
    """Seeded epoch loop with early stopping and best-checkpoint restore."""
    if len(train_corpus) == 0 or len(val_corpus) == 0:
        raise TrainingError("training and validation corpora must be non-empty")
    spec = handle.spec
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)

    train_batch = handle.encode([c.text for c in train_corpus])
    val_batch = handle.encode([c.text for c in val_corpus])
    train_ids = torch.as_tensor(train_batch.token_ids)
    train_mask = torch.as_tensor(train_batch.attention_mask)
    val_ids = torch.as_tensor(val_batch.token_ids)
    val_mask = torch.as_tensor(val_batch.attention_mask)
    y_train = _labels_tensor(train_corpus)
    y_val = _labels_tensor(val_corpus)

    batch_size = spec.hp("batch_size")
    loss_fn = nn.CrossEntropyLoss()
    optimizer = torch.optim.Adam(
        [p for p in handle.module.parameters() if p.requires_grad],
        lr=spec.hp("learning_rate"),
    )

    run = TrainingRun(spec, seed, [], [], [], [], best_epoch=-1)
    best_val_loss = float("inf")
    best_state = None
    patience_left = spec.hp("patience")
    n = len(train_corpus)

    for epoch in range(spec.hp("epochs")):
        handle.module.train()
        order = rng.permutation(n)
        epoch_loss, correct = 0.0, 0
        for start in range(0, n, batch_size):
            idx = torch.as_tensor(order[start : start + batch_size])
            logits = _forward_logits(handle, train_ids[idx], train_mask[idx])
            loss = loss_fn(logits, y_train[idx])
            if not torch.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            epoch_loss += loss.item() * len(idx)
            correct += int((logits.argmax(dim=1) == y_train[idx]).sum())
        run.train_loss.append(epoch_loss / n)
        run.train_accuracy.append(correct / n)
        vl, va = _epoch_eval(handle, val_ids, val_mask, y_val, batch_size, loss_fn)
        run.val_loss.append(vl)
        run.val_accuracy.append(va)
        if vl < best_val_loss:
            best_val_loss = vl
            run.best_epoch = epoch
            best_state = {
                k: v.detach().clone() for k, v in handle.module.state_dict().items()
            }
            patience_left = spec.hp("patience")
        else:
            patience_left -= 1
            if patience_left <= 0:
                break
    if best_state is not None:
        handle.module.load_state_dict(best_state)
    return run


def predict(handle: ModelHandle, batch: TokenizedBatch):
    """Class probabilities and argmax labels (lowest index wins ties)."""
    if batch.scheme is not handle.spec.scheme:
        raise TrainingError(
            f"batch scheme {batch.scheme.value} does not match model "
            f"scheme {handle.spec.scheme.value}"
        )
    if len(batch) == 0:
        return np.zeros((0, handle.spec.num_classes)), []
    handle.module.eval()
    with torch.no_grad():
        logits = _forward_logits(
            handle,
            torch.as_tensor(batch.token_ids),
            torch.as_tensor(batch.attention_mask),
        )
        probs = torch.softmax(logits, dim=1).numpy()
    labels = [LABEL_ORDER[i] for i in probs.argmax(axis=1)]
    return probs, labels


@dataclass
class PretrainResult:
    autoencoder: LstmAutoencoder
    loss_curve: list[float]
    vocab: Vocabulary

    def reconstruction_accuracy(self, corpus: Corpus, max_len: int = 100) -> float:
        batch = encode_word_index([c.text for c in corpus], self.vocab, max_len)
        ids = torch.as_tensor(batch.token_ids)
        mask = torch.as_tensor(batch.attention_mask)
        self.autoencoder.eval()
        with torch.no_grad():
            pred = self.autoencoder(ids, mask).argmax(dim=2)
        m = mask.bool()
        return float((pred[m] == ids[m]).float().mean())


def autoencoder_pretrain(
    corpus: Corpus, spec: ModelSpec, seed: int = 0, vocab: Vocabulary | None = None
) -> PretrainResult:
    """Train the encoder-decoder to reconstruct input token sequences."""
    if spec.kind is not ModelKind.LSTM_AUTOENCODER:
        raise TrainingError("autoencoder_pretrain requires the lstm_autoencoder kind")
    torch.manual_seed(seed)
    if vocab is None:
        vocab = fit_vocabulary(corpus, max_size=spec.hp("vocab_size"))
    auto = LstmAutoencoder(
        vocab_size=len(vocab),
        embedding_dim=spec.hp("embedding_dim"),
        hidden_size=spec.hp("hidden_size"),
        dropout=0.0,
    )
    batch = encode_word_index([c.text for c in corpus], vocab, spec.hp("max_len"))
    ids = torch.as_tensor(batch.token_ids)
    mask = torch.as_tensor(batch.attention_mask)
    loss_fn = nn.CrossEntropyLoss(ignore_index=0)
    optimizer = torch.optim.Adam(auto.parameters(), lr=spec.hp("learning_rate"))
    curve = []
    rng = np.random.default_rng(seed)
    batch_size = spec.hp("batch_size")
    n = len(corpus)
    for epoch in range(spec.hp("pretrain_epochs")):
        auto.train()
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            idx = torch.as_tensor(order[start : start + batch_size])
            logits = auto(ids[idx], mask[idx])
            loss = loss_fn(logits.flatten(0, 1), ids[idx].flatten())
            if not torch.isfinite(loss):
                raise TrainingError(f"autoencoder diverged at epoch {epoch}")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total += loss.item() * len(idx)
        curve.append(total / n)
    return PretrainResult(auto, curve, vocab)


def save_checkpoint(handle: ModelHandle, run: TrainingRun, run_dir: str | Path) -> Path:
    """Persist module weights, spec, vocabulary, and the run manifest."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    if handle.spec.kind in _PRETRAINED:
        handle.module.save_pretrained(run_dir / "model")
        handle.tokenizer.save_pretrained(run_dir / "model")
    else:
        torch.save(handle.module.state_dict(), run_dir / "model.pt")
        handle.vocab.save(run_dir / "vocab.tsv")
    (run_dir / "run.json").write_text(
        json.dumps(run.to_manifest(), indent=2, sort_keys=True), encoding="utf-8"
    )
    run.checkpoint_dir = str(run_dir)
    return run_dir


def load_checkpoint(run_dir: str | Path) -> ModelHandle:
    run_dir = Path(run_dir)
    manifest = json.loads((run_dir / "run.json").read_text(encoding="utf-8"))
    spec_m = manifest["spec"]
    spec = ModelSpec(
        kind=ModelKind(spec_m["kind"]),
        hyperparameters=spec_m["hyperparameters"],
        num_classes=spec_m["num_classes"],
        language=Language(spec_m["language"]) if spec_m["language"] else None,
        checkpoint=spec_m["checkpoint"],
    )
    if spec.kind in _PRETRAINED:
        handle = build_classifier(
            ModelSpec(
                spec.kind,
                spec.hyperparameters,
                spec.num_classes,
                spec.language,
                checkpoint=str(run_dir / "model"),
            )
        )
        return handle
    vocab = Vocabulary.load(run_dir / "vocab.tsv", max_size=spec.hp("vocab_size"))
    handle = build_classifier(spec, vocab=vocab)
    handle.module.load_state_dict(torch.load(run_dir / "model.pt", weights_only=True))
    return handle
