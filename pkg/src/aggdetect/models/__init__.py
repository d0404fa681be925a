"""Classifier families and the shared training loop."""

from .recurrent import (
    BiLstmOutput,
    BiLstmParams,
    EmbeddingMatrix,
    LstmParams,
    LstmState,
    bilstm_forward,
    lstm_forward,
    lstm_step,
    sigmoid,
)
from .networks import (
    AutoencoderClassifier,
    BiLstmClassifier,
    GateLstmCell,
    LstmAutoencoder,
    LstmClassifier,
)
from .skipgram import SkipgramResult, sgns_loss_and_grads, skipgram_train
from .training import (
    LABEL_ORDER,
    ModelHandle,
    ModelKind,
    ModelSpec,
    TrainingError,
    TrainingRun,
    autoencoder_pretrain,
    build_classifier,
    load_checkpoint,
    predict,
    save_checkpoint,
    train,
)

__all__ = [
    "BiLstmOutput",
    "BiLstmParams",
    "EmbeddingMatrix",
    "LstmParams",
    "LstmState",
    "bilstm_forward",
    "lstm_forward",
    "lstm_step",
    "sigmoid",
    "AutoencoderClassifier",
    "BiLstmClassifier",
    "GateLstmCell",
    "LstmAutoencoder",
    "LstmClassifier",
    "SkipgramResult",
    "sgns_loss_and_grads",
    "skipgram_train",
    "LABEL_ORDER",
    "ModelHandle",
    "ModelKind",
    "ModelSpec",
    "TrainingError",
    "TrainingRun",
    "autoencoder_pretrain",
    "build_classifier",
    "load_checkpoint",
    "predict",
    "save_checkpoint",
    "train",
]
