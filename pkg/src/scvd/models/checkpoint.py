"""Classifier checkpoint directories: config, weights, tokenizer/vocab, manifest."""

from __future__ import annotations

import json
from pathlib import Path

import torch

from ..errors import CheckpointError, VocabMismatch
from ..preprocess import load_vocab, save_vocab
from ..subword import SubwordTokenizer
from .config import RECURRENT_BASELINE, TRANSFORMER_FINETUNE, EncoderConfig, ModelConfig
from .recurrent import RecurrentClassifier, RecurrentNet
from .transformer import (
    TransformerClassifier,
    TransformerClassifierNet,
    TransformerEncoderNet,
    _content_hash,
)

CHECKPOINT_FORMAT_VERSION = 1


def save_checkpoint(classifier, dest: str | Path) -> str:
    """Write a loadable checkpoint directory; returns its content hash."""
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    config = classifier.config
    with open(dest / "config.json", "w", encoding="utf-8") as f:
        json.dump(config.to_dict(), f, indent=2)
    torch.save(classifier.net.state_dict(), dest / "weights.pt")
    files = ["config.json", "weights.pt"]
    if config.kind == RECURRENT_BASELINE:
        if classifier.vocab is not None:
            save_vocab(classifier.vocab, dest / "vocab.json")
            files.append("vocab.json")
    else:
        classifier.tokenizer.save(dest / "tokenizer.json")
        files.append("tokenizer.json")
        with open(dest / "encoder_config.json", "w", encoding="utf-8") as f:
            json.dump(classifier.encoder_config.to_dict(), f, indent=2)
        files.append("encoder_config.json")
    content_hash = _content_hash(dest, files)
    manifest = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "kind": config.kind,
        "files": files,
        "content_hash": content_hash,
        "parameter_count": classifier.parameter_count,
    }
    with open(dest / "manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2)
    return content_hash


def read_manifest(path: str | Path) -> dict:
    path = Path(path)
    manifest_path = path / "manifest.json"
    if not manifest_path.is_file():
        raise CheckpointError(f"{path}: not a checkpoint directory (no manifest)")
    with open(manifest_path, encoding="utf-8") as f:
        return json.load(f)


def load_checkpoint(path: str | Path):
    """Reconstruct a classifier from a checkpoint directory.

    Predictions of the loaded model reproduce the saved one bit-for-bit
    (state_dict round-trip is exact on a fixed runtime).
    """
    path = Path(path)
    manifest = read_manifest(path)
    kind = manifest.get("kind")
    if kind not in (RECURRENT_BASELINE, TRANSFORMER_FINETUNE):
        raise CheckpointError(f"{path}: not a classifier checkpoint (kind {kind!r})")
    for name in manifest["files"]:
        if not (path / name).is_file():
            raise CheckpointError(f"{path}: missing checkpoint file {name}")
    if _content_hash(path, manifest["files"]) != manifest["content_hash"]:
        raise CheckpointError(f"{path}: content hash mismatch (corrupt checkpoint)")

    with open(path / "config.json", encoding="utf-8") as f:
        config = ModelConfig.from_dict(json.load(f)).validate()
    if config.kind != kind:
        raise CheckpointError(f"{path}: manifest kind {kind!r} != config kind {config.kind!r}")
    state = torch.load(path / "weights.pt", map_location="cpu", weights_only=True)

    if kind == RECURRENT_BASELINE:
        vocab = None
        if "vocab.json" in manifest["files"]:
            vocab = load_vocab(path / "vocab.json")
            if len(vocab) != config.vocab_size:
                raise VocabMismatch(
                    f"{path}: vocab has {len(vocab)} entries, config says "
                    f"{config.vocab_size}"
                )
        net = RecurrentNet(config)
        classifier = RecurrentClassifier(config, net, vocab)
    else:
        with open(path / "encoder_config.json", encoding="utf-8") as f:
            encoder_cfg = EncoderConfig.from_dict(json.load(f)).validate()
        tokenizer = SubwordTokenizer.load(path / "tokenizer.json")
        if tokenizer.vocab_size != encoder_cfg.vocab_size:
            raise VocabMismatch(
                f"{path}: tokenizer has {tokenizer.vocab_size} pieces but encoder "
                f"embeds {encoder_cfg.vocab_size}"
            )
        net = TransformerClassifierNet(
            TransformerEncoderNet(encoder_cfg), config.num_classes, config.head_dropout
        )
        classifier = TransformerClassifier(config, net, tokenizer, encoder_cfg)

    try:
        classifier.net.load_state_dict(state)
    except RuntimeError as e:
        raise CheckpointError(f"{path}: weights do not fit the config ({e})") from None
    classifier.net.eval()
    return classifier
