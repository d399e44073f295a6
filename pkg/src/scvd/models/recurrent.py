"""Convolution + bidirectional-LSTM + attention baseline classifier."""

from __future__ import annotations

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..data import LEXER_VOCAB
from ..errors import ConfigError, ShapeError
from ..preprocess import Vocab
from .base import Classifier, torch_seed
from .config import RECURRENT_BASELINE, ModelConfig


def _valid_mask(lengths: torch.Tensor, max_len: int) -> torch.Tensor:
    """(B, L) bool mask of non-PAD positions; all-PAD rows fall back to pos 0."""
    positions = torch.arange(max_len, device=lengths.device)
    mask = positions.unsqueeze(0) < lengths.unsqueeze(1)
    empty = ~mask.any(dim=1)
    if empty.any():
        mask[empty, 0] = True
    return mask


class RecurrentNet(nn.Module):
    """Embedding -> 1-D conv -> BiLSTM -> additive attention -> dense."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.embedding = nn.Embedding(cfg.vocab_size, cfg.embed_dim, padding_idx=0)
        self.conv = nn.Conv1d(
            cfg.embed_dim, cfg.conv_filters, cfg.conv_kernel, padding="same"
        )
        self.lstm = nn.LSTM(
            cfg.conv_filters,
            cfg.recurrent_units,
            batch_first=True,
            bidirectional=True,
        )
        self.attn_proj = nn.Linear(2 * cfg.recurrent_units, cfg.attention_dim)
        self.attn_score = nn.Linear(cfg.attention_dim, 1, bias=False)
        self.dropout = nn.Dropout(cfg.dropout)
        self.out = nn.Linear(2 * cfg.recurrent_units, cfg.num_classes)

    def forward(self, ids, lengths, return_attention: bool = False):
        batch, max_len = ids.shape
        mask = _valid_mask(lengths, max_len)
        x = self.embedding(ids)
        x = F.relu(self.conv(x.transpose(1, 2))).transpose(1, 2)
        x = x * mask.unsqueeze(-1)
        packed = nn.utils.rnn.pack_padded_sequence(
            x,
            lengths.clamp(min=1).cpu(),
            batch_first=True,
            enforce_sorted=False,
        )
        hidden, _ = self.lstm(packed)
        hidden, _ = nn.utils.rnn.pad_packed_sequence(
            hidden, batch_first=True, total_length=max_len
        )
        scores = self.attn_score(torch.tanh(self.attn_proj(hidden))).squeeze(-1)
        scores = scores.masked_fill(~mask, float("-inf"))
        attention = torch.softmax(scores, dim=1)
        context = torch.bmm(attention.unsqueeze(1), hidden).squeeze(1)
        logits = self.out(self.dropout(context))
        if return_attention:
            return logits, attention
        return logits


class RecurrentClassifier(Classifier):
    encoding = LEXER_VOCAB

    def __init__(self, config: ModelConfig, net: RecurrentNet, vocab: Vocab | None = None):
        super().__init__(config, net)
        self.vocab = vocab  # attached for scanning raw files; optional for training

    def _check_batch(self, ids: np.ndarray) -> np.ndarray:
        ids = super()._check_batch(ids)
        if len(ids) and ids.max() >= self.config.vocab_size:
            raise ShapeError(
                f"id {int(ids.max())} out of range for vocab of "
                f"{self.config.vocab_size}; wrong encoding?"
            )
        return ids

    def attention_weights(
        self, ids: np.ndarray, lengths: np.ndarray | None = None
    ) -> np.ndarray:
        """Attention distribution over positions for each input row."""
        from .base import infer_lengths

        ids = self._check_batch(ids)
        if lengths is None:
            lengths = infer_lengths(ids)
        self.net.eval()
        with torch.no_grad():
            _, attention = self.net(
                torch.from_numpy(ids), torch.from_numpy(np.asarray(lengths)),
                return_attention=True,
            )
        return attention.numpy()


def build_recurrent_classifier(
    config: ModelConfig, vocab: Vocab | None = None
) -> RecurrentClassifier:
    """Build the baseline with weights drawn deterministically from config.seed."""
    if config.kind != RECURRENT_BASELINE:
        raise ConfigError(f"expected a {RECURRENT_BASELINE} config, got {config.kind}")
    config.validate()
    if vocab is not None and len(vocab) != config.vocab_size:
        raise ConfigError(
            f"config.vocab_size {config.vocab_size} != attached vocab size {len(vocab)}"
        )
    with torch_seed(config.seed):
        net = RecurrentNet(config)
    return RecurrentClassifier(config, net, vocab)
