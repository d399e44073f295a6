"""Encoded datasets: fixed-length id matrices ready for model input."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Corpus
from .errors import EmptyDataset, ShapeError
from .preprocess import Vocab, encode_sequence, preprocess_source
from .subword import SubwordTokenizer

LEXER_VOCAB = "lexer-vocab"
SUBWORD = "subword"


@dataclass
class EncodedDataset:
    """A batchable encoding of a corpus partition."""

    ids: np.ndarray  # (N, L) int64
    lengths: np.ndarray  # (N,) int64
    labels: np.ndarray  # (N,) int64
    encoding: str  # LEXER_VOCAB or SUBWORD
    split_hash: str | None = None
    filenames: tuple[str, ...] = ()

    def __post_init__(self):
        if self.ids.ndim != 2:
            raise ShapeError(f"ids must be 2-D, got shape {self.ids.shape}")
        n = self.ids.shape[0]
        if self.lengths.shape != (n,) or self.labels.shape != (n,):
            raise ShapeError("ids, lengths and labels disagree on sample count")

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def max_len(self) -> int:
        return self.ids.shape[1]

    def subset(self, indices) -> "EncodedDataset":
        indices = np.asarray(indices, dtype=np.int64)
        return EncodedDataset(
            ids=self.ids[indices],
            lengths=self.lengths[indices],
            labels=self.labels[indices],
            encoding=self.encoding,
            split_hash=self.split_hash,
            filenames=tuple(self.filenames[i] for i in indices) if self.filenames else (),
        )


def encode_with_vocab(
    corpus: Corpus, vocab: Vocab, max_len: int, split_hash: str | None = None
) -> EncodedDataset:
    """Encode a corpus for the recurrent baseline via the lexer vocabulary."""
    rows = []
    lengths = []
    for contract in corpus:
        enc = encode_sequence(
            preprocess_source(contract.source, contract.filename), vocab, max_len
        )
        rows.append(enc.ids)
        lengths.append(enc.true_length)
    n = len(corpus)
    return EncodedDataset(
        ids=np.asarray(rows, dtype=np.int64).reshape(n, max_len),
        lengths=np.asarray(lengths, dtype=np.int64),
        labels=np.asarray([c.encoded_label for c in corpus], dtype=np.int64),
        encoding=LEXER_VOCAB,
        split_hash=split_hash,
        filenames=tuple(c.filename for c in corpus),
    )


def encode_with_subword(
    corpus: Corpus,
    tokenizer: SubwordTokenizer,
    max_positions: int,
    split_hash: str | None = None,
) -> EncodedDataset:
    """Encode a corpus with a transformer checkpoint's own subword tokenizer."""
    rows = []
    lengths = []
    for contract in corpus:
        ids, true_length = tokenizer.encode(contract.source, max_positions)
        rows.append(ids)
        lengths.append(true_length)
    n = len(corpus)
    return EncodedDataset(
        ids=np.asarray(rows, dtype=np.int64).reshape(n, max_positions),
        lengths=np.asarray(lengths, dtype=np.int64),
        labels=np.asarray([c.encoded_label for c in corpus], dtype=np.int64),
        encoding=SUBWORD,
        split_hash=split_hash,
        filenames=tuple(c.filename for c in corpus),
    )


def require_nonempty(dataset: EncodedDataset, what: str) -> None:
    if len(dataset) == 0:
        raise EmptyDataset(f"{what} dataset is empty")
