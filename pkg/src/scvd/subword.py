"""Byte-pair-encoding subword tokenizer for the transformer-encoder models.

Each encoder checkpoint carries its own tokenizer. Pre-tokenization uses the
Solidity lexer, then BPE merges learned on the training partition split
lexemes into subword pieces. Deterministic for a given corpus and vocab size.
"""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from pathlib import Path

from .preprocess import normalize_source, tokenize

PAD = "[PAD]"
UNK = "[UNK]"
CLS = "[CLS]"
SEP = "[SEP]"
MASK = "[MASK]"
SPECIALS = (PAD, UNK, CLS, SEP, MASK)

_END = "</w>"  # marks the final symbol of a lexeme

TOKENIZER_FILE_VERSION = 1


def _word_symbols(lexeme: str) -> tuple[str, ...]:
    chars = list(lexeme)
    chars[-1] = chars[-1] + _END
    return tuple(chars)


class SubwordTokenizer:
    """BPE tokenizer with [PAD]/[UNK]/[CLS]/[SEP]/[MASK] specials."""

    def __init__(self, vocab: dict[str, int], merges: list[tuple[str, str]]):
        self.vocab = vocab
        self.merges = merges
        self.ranks = {pair: i for i, pair in enumerate(merges)}
        self.pad_id = vocab[PAD]
        self.unk_id = vocab[UNK]
        self.cls_id = vocab[CLS]
        self.sep_id = vocab[SEP]
        self.mask_id = vocab[MASK]
        self.special_ids = frozenset(vocab[s] for s in SPECIALS)
        self._cache: dict[str, list[int]] = {}

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    def _bpe(self, lexeme: str) -> list[int]:
        cached = self._cache.get(lexeme)
        if cached is not None:
            return cached
        symbols = list(_word_symbols(lexeme))
        while len(symbols) > 1:
            best = None
            best_rank = None
            for pair in zip(symbols, symbols[1:]):
                rank = self.ranks.get(pair)
                if rank is not None and (best_rank is None or rank < best_rank):
                    best, best_rank = pair, rank
            if best is None:
                break
            merged = []
            i = 0
            while i < len(symbols):
                if (
                    i + 1 < len(symbols)
                    and (symbols[i], symbols[i + 1]) == best
                ):
                    merged.append(symbols[i] + symbols[i + 1])
                    i += 2
                else:
                    merged.append(symbols[i])
                    i += 1
            symbols = merged
        ids = [self.vocab.get(s, self.unk_id) for s in symbols]
        self._cache[lexeme] = ids
        return ids

    def encode(self, source: str, max_len: int) -> tuple[list[int], int]:
        """Encode raw Solidity source to [CLS] pieces... [SEP], padded ids.

        Returns (ids of length max_len, true length before padding). Inputs
        longer than max_len are truncated, never rejected.
        """
        tokens = tokenize(normalize_source(source).text)
        ids = [self.cls_id]
        for lexeme in tokens:
            ids.extend(self._bpe(lexeme))
            if len(ids) >= max_len:
                break
        ids = ids[: max_len - 1] + [self.sep_id] if len(ids) >= max_len else ids + [self.sep_id]
        true_length = len(ids)
        ids = ids + [self.pad_id] * (max_len - true_length)
        return ids, true_length

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        pieces = sorted(self.vocab, key=self.vocab.get)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(
                {
                    "version": TOKENIZER_FILE_VERSION,
                    "pieces": pieces,
                    "merges": [list(m) for m in self.merges],
                },
                f,
            )

    @classmethod
    def load(cls, path: str | Path) -> "SubwordTokenizer":
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
        if data.get("version") != TOKENIZER_FILE_VERSION:
            raise ValueError(f"{path}: unsupported tokenizer file version")
        vocab = {piece: i for i, piece in enumerate(data["pieces"])}
        merges = [tuple(m) for m in data["merges"]]
        return cls(vocab, merges)


def train_subword_tokenizer(sources, vocab_size: int = 3000) -> SubwordTokenizer:
    """Learn BPE merges from raw sources (training partition only).

    The vocabulary is: specials, then the alphabet of symbols seen, then one
    piece per merge, until vocab_size is reached. Merge order is by pair
    frequency, ties broken lexicographically, so training is deterministic.
    """
    word_freq: Counter[str] = Counter()
    for source in sources:
        word_freq.update(tokenize(normalize_source(source).text).tokens)

    words: list[list[str]] = []
    freqs: list[int] = []
    for lexeme, freq in sorted(word_freq.items()):
        words.append(list(_word_symbols(lexeme)))
        freqs.append(freq)

    alphabet = sorted({s for w in words for s in w})
    vocab = {piece: i for i, piece in enumerate(SPECIALS)}
    for s in alphabet:
        vocab[s] = len(vocab)

    pair_counts: Counter[tuple[str, str]] = Counter()
    where: defaultdict[tuple[str, str], set[int]] = defaultdict(set)
    for wi, w in enumerate(words):
        for pair in zip(w, w[1:]):
            pair_counts[pair] += freqs[wi]
            where[pair].add(wi)

    merges: list[tuple[str, str]] = []
    while len(vocab) < vocab_size and pair_counts:
        best = min(pair_counts.items(), key=lambda kv: (-kv[1], kv[0]))[0]
        if pair_counts[best] < 2:
            break
        merges.append(best)
        new_symbol = best[0] + best[1]
        vocab[new_symbol] = len(vocab)
        for wi in list(where[best]):
            w = words[wi]
            freq = freqs[wi]
            # remove old pair counts for this word, rewrite, re-add
            for pair in zip(w, w[1:]):
                pair_counts[pair] -= freq
                if pair_counts[pair] <= 0:
                    del pair_counts[pair]
                where[pair].discard(wi)
            merged = []
            i = 0
            while i < len(w):
                if i + 1 < len(w) and (w[i], w[i + 1]) == best:
                    merged.append(new_symbol)
                    i += 2
                else:
                    merged.append(w[i])
                    i += 1
            words[wi] = merged
            for pair in zip(merged, merged[1:]):
                pair_counts[pair] += freq
                where[pair].add(wi)
    return SubwordTokenizer(vocab, merges)
