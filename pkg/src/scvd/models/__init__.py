"""Classifier architectures, pretraining and checkpoints."""

from .base import Classifier, infer_lengths, torch_seed
from .checkpoint import load_checkpoint, read_manifest, save_checkpoint
from .config import (
    ENCODER_PRESETS,
    MODEL_KINDS,
    RECURRENT_BASELINE,
    TRANSFORMER_FINETUNE,
    EncoderConfig,
    ModelConfig,
)
from .recurrent import RecurrentClassifier, build_recurrent_classifier
from .transformer import (
    TransformerClassifier,
    build_transformer_classifier,
    initialize_encoder,
    load_encoder_checkpoint,
    pretrain_encoder,
    save_encoder_checkpoint,
)


def predict_proba(model: Classifier, batch, lengths=None, batch_size: int = 64):
    """Row-stochastic probabilities for an encoded batch or EncodedDataset."""
    from ..data import EncodedDataset
    from ..errors import ShapeError

    if isinstance(batch, EncodedDataset):
        if batch.encoding != model.encoding:
            raise ShapeError(
                f"dataset encoded as {batch.encoding!r} but model expects "
                f"{model.encoding!r}"
            )
        return model.predict_proba(batch.ids, batch.lengths, batch_size)
    return model.predict_proba(batch, lengths, batch_size)


__all__ = [
    "Classifier",
    "EncoderConfig",
    "ENCODER_PRESETS",
    "MODEL_KINDS",
    "ModelConfig",
    "RECURRENT_BASELINE",
    "RecurrentClassifier",
    "TRANSFORMER_FINETUNE",
    "TransformerClassifier",
    "build_recurrent_classifier",
    "build_transformer_classifier",
    "infer_lengths",
    "initialize_encoder",
    "load_checkpoint",
    "load_encoder_checkpoint",
    "predict_proba",
    "pretrain_encoder",
    "read_manifest",
    "save_checkpoint",
    "save_encoder_checkpoint",
    "torch_seed",
]
