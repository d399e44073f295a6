"""Solidity source normalization, lexing, vocabulary building and id encoding.

The normalizer strips comments (string-aware), collapses whitespace runs to
single spaces and unifies line endings; it is idempotent. The lexer does
maximal-munch lexing over Solidity lexeme classes and never drops input:
unknown bytes come through as single-character tokens.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
PAD_ID = 0
UNK_ID = 1

VOCAB_FILE_VERSION = 1

_QUOTES = "\"'"


# -- normalization -----------------------------------------------------------


@dataclass(frozen=True)
class NormalizationIssue:
    kind: str  # "unterminated_comment" or "unterminated_string"
    byte_offset: int


@dataclass(frozen=True)
class NormalizedSource:
    text: str
    issues: tuple[NormalizationIssue, ...] = ()

    @property
    def clean(self) -> bool:
        return not self.issues


def _byte_offset(code: str, index: int) -> int:
    return len(code[:index].encode("utf-8"))


def _scan_string(text: str, start: int) -> tuple[int, bool]:
    """Return (end index one past the literal, closed?) for a quote at start."""
    quote = text[start]
    j = start + 1
    n = len(text)
    while j < n:
        c = text[j]
        if c == "\\" and j + 1 < n:
            j += 2
            continue
        j += 1
        if c == quote:
            return j, True
    return j, False


def normalize_source(code: str) -> NormalizedSource:
    """Strip comments, collapse whitespace, keep string literals verbatim.

    Best-effort on malformed input: unterminated comments/strings are reported
    as issues with their byte offset and the output is still produced.
    """
    out: list[str] = []
    issues: list[NormalizationIssue] = []
    pending_space = False
    i = 0
    n = len(code)
    while i < n:
        ch = code[i]
        if ch.isspace():
            pending_space = True
            i += 1
        elif ch == "/" and code.startswith("//", i):
            nl = code.find("\n", i)
            i = n if nl == -1 else nl + 1
            pending_space = True
        elif ch == "/" and code.startswith("/*", i):
            end = code.find("*/", i + 2)
            if end == -1:
                issues.append(
                    NormalizationIssue("unterminated_comment", _byte_offset(code, i))
                )
                i = n
            else:
                i = end + 2
            pending_space = True
        elif ch in _QUOTES:
            end, closed = _scan_string(code, i)
            if not closed:
                issues.append(
                    NormalizationIssue("unterminated_string", _byte_offset(code, i))
                )
            if pending_space and out:
                out.append(" ")
            pending_space = False
            out.append(code[i:end])
            i = end
        else:
            if pending_space and out:
                out.append(" ")
            pending_space = False
            out.append(ch)
            i += 1
    return NormalizedSource("".join(out), tuple(issues))


# -- lexing ------------------------------------------------------------------

_IDENT_RE = re.compile(r"[A-Za-z_$][A-Za-z0-9_$]*")
_HEX_RE = re.compile(r"0[xX][0-9a-fA-F]+")
_NUM_RE = re.compile(r"[0-9]+(?:\.[0-9]+)?(?:[eE][+-]?[0-9]+)?")

_OPERATORS = (
    "<<=", ">>=",
    "**", "++", "--", "&&", "||", "==", "!=", "<=", ">=",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "=>", "<<", ">>",
)
_OPS3 = frozenset(op for op in _OPERATORS if len(op) == 3)
_OPS2 = frozenset(op for op in _OPERATORS if len(op) == 2)


@dataclass(frozen=True)
class TokenSequence:
    tokens: tuple[str, ...]
    origin: str = ""

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)


def _escape_whitespace(literal: str) -> str:
    # String-literal tokens must not contain raw whitespace; escape it in
    # Solidity's \xNN / \uNNNN style so the token still re-lexes to itself.
    if not any(c.isspace() for c in literal):
        return literal
    parts = []
    for c in literal:
        if c.isspace():
            parts.append(f"\\x{ord(c):02x}" if ord(c) < 256 else f"\\u{ord(c):04x}")
        else:
            parts.append(c)
    return "".join(parts)


def tokenize(text: str, origin: str = "") -> TokenSequence:
    """Maximal-munch lexing of normalized Solidity text.

    Lexeme classes: identifiers/keywords, integer/decimal/hex literals, string
    literals (one token each), multi-character operators, and single
    characters for everything else. Nothing is dropped.
    """
    tokens: list[str] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in _QUOTES:
            end, _ = _scan_string(text, i)
            tokens.append(_escape_whitespace(text[i:end]))
            i = end
            continue
        if "0" <= ch <= "9":
            m = _HEX_RE.match(text, i) or _NUM_RE.match(text, i)
            tokens.append(m.group())
            i = m.end()
            continue
        m = _IDENT_RE.match(text, i)  # ASCII identifiers only; other letters fall through
        if m:
            tokens.append(m.group())
            i = m.end()
            continue
        if text[i : i + 3] in _OPS3:
            tokens.append(text[i : i + 3])
            i += 3
            continue
        if text[i : i + 2] in _OPS2:
            tokens.append(text[i : i + 2])
            i += 2
            continue
        tokens.append(ch)
        i += 1
    return TokenSequence(tuple(tokens), origin)


def preprocess_source(code: str, origin: str = "") -> TokenSequence:
    """Convenience: normalize then tokenize raw Solidity source."""
    return tokenize(normalize_source(code).text, origin)


# -- vocabulary and encoding -------------------------------------------------


@dataclass(frozen=True)
class Vocab:
    """Immutable lexeme -> id mapping with PAD=0 and UNK=1 reserved."""

    id_of: dict[str, int]
    frequencies: dict[str, int]
    max_size: int
    min_freq: int

    def __len__(self) -> int:
        return len(self.id_of)

    def __contains__(self, lexeme: str) -> bool:
        return lexeme in self.id_of

    def encode_token(self, lexeme: str) -> int:
        return self.id_of.get(lexeme, UNK_ID)

    def lexemes(self) -> list[str]:
        """All lexemes ordered by id (specials first)."""
        return sorted(self.id_of, key=self.id_of.get)


def build_vocab(
    sequences, max_size: int = 20000, min_freq: int = 2
) -> Vocab:
    """Build a vocabulary from training-partition token sequences only.

    Lexemes with frequency >= min_freq are kept most-frequent-first up to
    max_size; ties break lexicographically. PAD and UNK are prepended.
    """
    counts: Counter[str] = Counter()
    for seq in sequences:
        counts.update(seq.tokens)
    kept = sorted(
        ((lex, f) for lex, f in counts.items() if f >= min_freq),
        key=lambda item: (-item[1], item[0]),
    )[:max_size]
    id_of = {PAD_TOKEN: PAD_ID, UNK_TOKEN: UNK_ID}
    frequencies = {}
    for lex, f in kept:
        id_of[lex] = len(id_of)
        frequencies[lex] = f
    return Vocab(id_of, frequencies, max_size, min_freq)


def save_vocab(vocab: Vocab, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    entries = [
        [lex, vocab.id_of[lex], vocab.frequencies.get(lex, 0)]
        for lex in vocab.lexemes()
    ]
    with open(path, "w", encoding="utf-8") as f:
        json.dump(
            {
                "version": VOCAB_FILE_VERSION,
                "max_size": vocab.max_size,
                "min_freq": vocab.min_freq,
                "entries": entries,
            },
            f,
        )


def load_vocab(path: str | Path) -> Vocab:
    with open(path, encoding="utf-8") as f:
        data = json.load(f)
    if data.get("version") != VOCAB_FILE_VERSION:
        raise ValueError(f"{path}: unsupported vocab file version")
    id_of = {}
    frequencies = {}
    for lex, idx, freq in data["entries"]:
        id_of[lex] = idx
        if idx not in (PAD_ID, UNK_ID):
            frequencies[lex] = freq
    if sorted(id_of.values()) != list(range(len(id_of))):
        raise ValueError(f"{path}: vocab ids are not contiguous")
    return Vocab(id_of, frequencies, data["max_size"], data["min_freq"])


@dataclass(frozen=True)
class EncodedSequence:
    ids: tuple[int, ...]  # always exactly max_len long
    true_length: int


def encode_sequence(seq: TokenSequence, vocab: Vocab, max_len: int) -> EncodedSequence:
    """Map tokens to ids (missing -> UNK), truncate to max_len, right-pad."""
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    ids = [vocab.encode_token(t) for t in seq.tokens[:max_len]]
    true_length = len(ids)
    ids.extend([PAD_ID] * (max_len - true_length))
    return EncodedSequence(tuple(ids), true_length)
