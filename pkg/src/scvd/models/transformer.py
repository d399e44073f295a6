"""Transformer-encoder classifiers fine-tuned from local pretrained checkpoints.

Checkpoints are directories holding the encoder config, weights, the
checkpoint's own subword tokenizer and a hashed manifest. Two size presets
exist ("distilled" and "full"); the distilled one is strictly smaller.
"""

from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..data import SUBWORD
from ..errors import CheckpointError, ConfigError, VocabMismatch
from ..hashutil import sha256_file
from ..subword import SubwordTokenizer
from .base import Classifier, torch_seed
from .config import (
    ENCODER_PRESETS,
    TRANSFORMER_FINETUNE,
    EncoderConfig,
    ModelConfig,
)

ENCODER_MANIFEST_KIND = "transformer_encoder"
ENCODER_FILES = ("config.json", "weights.pt", "tokenizer.json")


class TransformerEncoderNet(nn.Module):
    """Token + position embeddings into a pre-norm transformer stack."""

    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        self.cfg = cfg
        self.token_emb = nn.Embedding(cfg.vocab_size, cfg.hidden_dim, padding_idx=0)
        self.pos_emb = nn.Embedding(cfg.max_positions, cfg.hidden_dim)
        self.input_norm = nn.LayerNorm(cfg.hidden_dim)
        self.input_drop = nn.Dropout(cfg.dropout)
        self.layers = nn.ModuleList(
            nn.TransformerEncoderLayer(
                d_model=cfg.hidden_dim,
                nhead=cfg.num_heads,
                dim_feedforward=cfg.ff_dim,
                dropout=cfg.dropout,
                activation="gelu",
                batch_first=True,
                norm_first=True,
            )
            for _ in range(cfg.num_layers)
        )
        self.output_norm = nn.LayerNorm(cfg.hidden_dim)

    def forward(self, ids: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        batch, seq_len = ids.shape
        positions = torch.arange(seq_len, device=ids.device)
        pad_mask = positions.unsqueeze(0) >= lengths.clamp(min=1).unsqueeze(1)
        x = self.token_emb(ids) + self.pos_emb(positions)
        x = self.input_drop(self.input_norm(x))
        for layer in self.layers:
            x = layer(x, src_key_padding_mask=pad_mask)
        return self.output_norm(x)


class TransformerClassifierNet(nn.Module):
    """Pretrained encoder + classification head over the [CLS] position."""

    def __init__(self, encoder: TransformerEncoderNet, num_classes: int, head_dropout: float):
        super().__init__()
        self.encoder = encoder
        self.head_drop = nn.Dropout(head_dropout)
        self.head = nn.Linear(encoder.cfg.hidden_dim, num_classes)

    def forward(self, ids, lengths):
        hidden = self.encoder(ids, lengths)
        return self.head(self.head_drop(hidden[:, 0]))


class TransformerClassifier(Classifier):
    encoding = SUBWORD

    def __init__(self, config: ModelConfig, net: TransformerClassifierNet,
                 tokenizer: SubwordTokenizer, encoder_config: EncoderConfig):
        super().__init__(config, net)
        self.tokenizer = tokenizer
        self.encoder_config = encoder_config
        self.effective_max_positions = min(config.max_positions, encoder_config.max_positions)

    def _forward(self, ids, lengths):
        limit = self.effective_max_positions
        if ids.shape[1] > limit:  # too-long inputs are truncated, not rejected
            ids = ids[:, :limit]
            lengths = lengths.clamp(max=limit)
        return self.net(ids, lengths)


# -- encoder checkpoints -----------------------------------------------------


def _content_hash(directory: Path, files) -> str:
    import hashlib

    h = hashlib.sha256()
    for name in files:
        h.update(name.encode("utf-8"))
        h.update(bytes.fromhex(sha256_file(directory / name)))
    return h.hexdigest()


def save_encoder_checkpoint(
    encoder: TransformerEncoderNet,
    tokenizer: SubwordTokenizer,
    dest: str | Path,
    extra_manifest: dict | None = None,
) -> Path:
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    with open(dest / "config.json", "w", encoding="utf-8") as f:
        json.dump(encoder.cfg.to_dict(), f, indent=2)
    torch.save(encoder.state_dict(), dest / "weights.pt")
    tokenizer.save(dest / "tokenizer.json")
    manifest = {
        "format_version": 1,
        "kind": ENCODER_MANIFEST_KIND,
        "files": list(ENCODER_FILES),
        "content_hash": _content_hash(dest, ENCODER_FILES),
        "parameter_count": sum(p.numel() for p in encoder.parameters()),
    }
    manifest.update(extra_manifest or {})
    with open(dest / "manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2)
    return dest


def load_encoder_checkpoint(
    path: str | Path,
) -> tuple[TransformerEncoderNet, SubwordTokenizer, dict]:
    path = Path(path)
    manifest_path = path / "manifest.json"
    if not manifest_path.is_file():
        raise CheckpointError(f"{path}: not a checkpoint directory (no manifest)")
    with open(manifest_path, encoding="utf-8") as f:
        manifest = json.load(f)
    if manifest.get("kind") != ENCODER_MANIFEST_KIND:
        raise CheckpointError(
            f"{path}: expected a {ENCODER_MANIFEST_KIND} checkpoint, "
            f"got kind {manifest.get('kind')!r}"
        )
    for name in manifest["files"]:
        if not (path / name).is_file():
            raise CheckpointError(f"{path}: missing checkpoint file {name}")
    if _content_hash(path, manifest["files"]) != manifest["content_hash"]:
        raise CheckpointError(f"{path}: content hash mismatch (corrupt checkpoint)")
    with open(path / "config.json", encoding="utf-8") as f:
        cfg = EncoderConfig.from_dict(json.load(f)).validate()
    tokenizer = SubwordTokenizer.load(path / "tokenizer.json")
    if tokenizer.vocab_size != cfg.vocab_size:
        raise VocabMismatch(
            f"{path}: tokenizer has {tokenizer.vocab_size} pieces but encoder "
            f"embeds {cfg.vocab_size}"
        )
    encoder = TransformerEncoderNet(cfg)
    state = torch.load(path / "weights.pt", map_location="cpu", weights_only=True)
    try:
        encoder.load_state_dict(state)
    except RuntimeError as e:
        raise CheckpointError(f"{path}: weights do not fit the config ({e})") from None
    return encoder, tokenizer, manifest


def initialize_encoder(
    tokenizer: SubwordTokenizer,
    preset: str = "distilled",
    max_positions: int = 192,
    seed: int = 0,
    dropout: float = 0.1,
) -> TransformerEncoderNet:
    if preset not in ENCODER_PRESETS:
        raise ConfigError(f"unknown encoder preset {preset!r}")
    cfg = EncoderConfig(
        vocab_size=tokenizer.vocab_size,
        max_positions=max_positions,
        dropout=dropout,
        **ENCODER_PRESETS[preset],
    ).validate()
    with torch_seed(seed):
        return TransformerEncoderNet(cfg)


def pretrain_encoder(
    encoder: TransformerEncoderNet,
    tokenizer: SubwordTokenizer,
    ids: np.ndarray,
    lengths: np.ndarray,
    epochs: int = 3,
    batch_size: int = 32,
    learning_rate: float = 3e-4,
    mask_prob: float = 0.15,
    seed: int = 0,
    log=None,
) -> list[float]:
    """Masked-token pretraining in place; returns per-epoch mean losses.

    Standard masking: of the sampled positions, 80% become [MASK], 10% a
    random piece, 10% stay. Special positions (CLS/SEP/PAD) are never masked.
    """
    mlm_head = nn.Linear(encoder.cfg.hidden_dim, encoder.cfg.vocab_size)
    with torch_seed(seed):
        mlm_head.reset_parameters()
    params = list(encoder.parameters()) + list(mlm_head.parameters())
    optimizer = torch.optim.AdamW(params, lr=learning_rate, weight_decay=0.01)

    special = torch.zeros(tokenizer.vocab_size, dtype=torch.bool)
    for sid in tokenizer.special_ids:
        special[sid] = True

    history = []
    n = len(ids)
    for epoch in range(epochs):
        epoch_seed = (seed * 1_000_003 + epoch) % (2**31)
        torch.manual_seed(epoch_seed)
        order = np.random.default_rng(epoch_seed).permutation(n)
        encoder.train()
        total, count = 0.0, 0
        start_time = time.monotonic()
        for b in range(0, n, batch_size):
            idx = order[b : b + batch_size]
            blen = lengths[idx]
            cut = max(int(blen.max()), 2)
            batch = torch.from_numpy(ids[idx][:, :cut].copy())
            blent = torch.from_numpy(blen.copy())

            maskable = ~special[batch]
            sampled = (torch.rand(batch.shape) < mask_prob) & maskable
            if not sampled.any():
                continue
            targets = batch.clone()
            targets[~sampled] = -100
            corrupted = batch.clone()
            action = torch.rand(batch.shape)
            corrupted[sampled & (action < 0.8)] = tokenizer.mask_id
            random_ids = torch.randint(
                len(tokenizer.special_ids), tokenizer.vocab_size, batch.shape
            )
            swap = sampled & (action >= 0.8) & (action < 0.9)
            corrupted[swap] = random_ids[swap]

            optimizer.zero_grad()
            hidden = encoder(corrupted, blent)
            loss = F.cross_entropy(
                mlm_head(hidden).view(-1, encoder.cfg.vocab_size),
                targets.view(-1),
                ignore_index=-100,
            )
            loss.backward()
            optimizer.step()
            total += float(loss.detach()) * len(idx)
            count += len(idx)
        mean_loss = total / max(count, 1)
        history.append(mean_loss)
        if log:
            log(
                f"pretrain epoch {epoch + 1}/{epochs}: mlm_loss {mean_loss:.4f} "
                f"({time.monotonic() - start_time:.1f}s)"
            )
    encoder.eval()
    return history


def build_transformer_classifier(config: ModelConfig) -> TransformerClassifier:
    """Load the pretrained encoder named by the config and attach a fresh head.

    All parameters stay trainable (full fine-tuning).
    """
    if config.kind != TRANSFORMER_FINETUNE:
        raise ConfigError(f"expected a {TRANSFORMER_FINETUNE} config, got {config.kind}")
    config.validate()
    encoder, tokenizer, _ = load_encoder_checkpoint(config.checkpoint_name)
    with torch_seed(config.seed):
        net = TransformerClassifierNet(encoder, config.num_classes, config.head_dropout)
    return TransformerClassifier(config, net, tokenizer, encoder.cfg)
