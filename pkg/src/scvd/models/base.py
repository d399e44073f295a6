"""Shared classifier surface: batched inference and input validation."""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np
import torch

from ..errors import ShapeError


@contextmanager
def torch_seed(seed: int):
    """Run a block under a fixed torch seed without disturbing the caller's RNG."""
    state = torch.random.get_rng_state()
    torch.manual_seed(seed)
    try:
        yield
    finally:
        torch.random.set_rng_state(state)


def infer_lengths(ids: np.ndarray, pad_id: int = 0) -> np.ndarray:
    """True lengths from right-padded id rows (position after last non-pad)."""
    nonpad = ids != pad_id
    reversed_first = np.argmax(nonpad[:, ::-1], axis=1)
    lengths = ids.shape[1] - reversed_first
    lengths[~nonpad.any(axis=1)] = 0
    return lengths.astype(np.int64)


class Classifier:
    """A built model: config, parameter store, and row-stochastic inference."""

    encoding: str = ""  # set by subclasses: which EncodedDataset encoding fits

    def __init__(self, config, net: torch.nn.Module):
        self.config = config
        self.net = net

    @property
    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.net.parameters())

    def _check_batch(self, ids: np.ndarray) -> np.ndarray:
        ids = np.asarray(ids)
        if ids.ndim != 2:
            raise ShapeError(f"expected a (batch, length) id matrix, got {ids.shape}")
        if not np.issubdtype(ids.dtype, np.integer):
            raise ShapeError(f"ids must be integers, got dtype {ids.dtype}")
        return ids.astype(np.int64, copy=False)

    def _forward(self, ids: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        return self.net(ids, lengths)

    def predict_logits(
        self, ids: np.ndarray, lengths: np.ndarray | None = None, batch_size: int = 64
    ) -> np.ndarray:
        ids = self._check_batch(ids)
        if lengths is None:
            lengths = infer_lengths(ids)
        lengths = np.asarray(lengths, dtype=np.int64)
        self.net.eval()
        outputs = []
        with torch.no_grad():
            for start in range(0, len(ids), batch_size):
                batch = ids[start : start + batch_size]
                blen = lengths[start : start + batch_size]
                cut = max(int(blen.max()), 1) if len(blen) else 1
                logits = self._forward(
                    torch.from_numpy(batch[:, :cut].copy()),
                    torch.from_numpy(blen.copy()),
                )
                outputs.append(logits.numpy())
        return np.concatenate(outputs) if outputs else np.zeros((0, self.config.num_classes))

    def predict_proba(
        self, ids: np.ndarray, lengths: np.ndarray | None = None, batch_size: int = 64
    ) -> np.ndarray:
        """Row-stochastic class probabilities; deterministic (dropout off)."""
        logits = self.predict_logits(ids, lengths, batch_size)
        logits = logits - logits.max(axis=1, keepdims=True)
        exp = np.exp(logits)
        return exp / exp.sum(axis=1, keepdims=True)
