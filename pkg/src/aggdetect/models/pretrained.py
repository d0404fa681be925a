"""Fine-tunable pretrained transformer classifiers (encoder and decoder).

Encoder checkpoints classify from the output embedding of the leading
classification marker; the decoder (GPT-2) classifies from the final
non-padded position, which under causal attention is the only position
that has seen the whole sequence. The multilingual encoder is mandatory
for Bangla and Hindi; the English-only base checkpoint is rejected for
those languages.
"""

from __future__ import annotations

from ..corpus import Language

__all__ = [
    "PretrainedError",
    "DEFAULT_CHECKPOINTS",
    "load_pretrained_classifier",
    "check_tokenizer_fingerprint",
]


class PretrainedError(Exception):
    pass


DEFAULT_CHECKPOINTS = {
    "bert_base": "bert-base-uncased",
    "bert_multilingual": "bert-base-multilingual-cased",
    "gpt2_medium": "gpt2-medium",
}


def check_tokenizer_fingerprint(tokenizer, model) -> None:
    """Reject tokenizer/model pairs whose vocabularies disagree."""
    tok_size = len(tokenizer)
    model_size = model.config.vocab_size
    if tok_size > model_size:
        raise PretrainedError(
            f"tokenizer vocabulary ({tok_size}) exceeds model vocabulary "
            f"({model_size}); tokenizer/model family mismatch"
        )


def load_pretrained_classifier(
    kind: str,
    language: Language | None = None,
    checkpoint: str | None = None,
    num_classes: int = 3,
):
    """Load (tokenizer, model) for one of the pretrained kinds.

    ``checkpoint`` may be a hub id or a local directory (offline stand-in
    checkpoints for CI use the latter).
    """
    if kind not in DEFAULT_CHECKPOINTS:
        raise PretrainedError(f"unknown pretrained kind {kind!r}")
    if kind == "bert_base" and language in (Language.BN, Language.HI):
        raise PretrainedError(
            f"the English-only encoder cannot classify {language.value}; "
            "use the multilingual encoder for Bangla/Hindi"
        )
    from transformers import (
        AutoModelForSequenceClassification,
        AutoTokenizer,
    )

    checkpoint = checkpoint or DEFAULT_CHECKPOINTS[kind]
    try:
        tokenizer = AutoTokenizer.from_pretrained(checkpoint)
        model = AutoModelForSequenceClassification.from_pretrained(
            checkpoint, num_labels=num_classes
        )
    except OSError as exc:
        raise PretrainedError(f"cannot resolve checkpoint {checkpoint!r}: {exc}") from exc
    if kind == "gpt2_medium":
        # GPT-2 has no pad token; reuse end-of-text so right padding is inert.
        if tokenizer.pad_token is None:
            tokenizer.pad_token = tokenizer.eos_token
        model.config.pad_token_id = tokenizer.pad_token_id
    check_tokenizer_fingerprint(tokenizer, model)
    return tokenizer, model
