import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scvd.preprocess import (
    PAD_ID,
    UNK_ID,
    TokenSequence,
    build_vocab,
    encode_sequence,
    load_vocab,
    normalize_source,
    preprocess_source,
    save_vocab,
    tokenize,
)


# -- normalize_source --------------------------------------------------------


def test_line_comment_stripped():
    assert normalize_source("x = 1; // note\n").text == "x = 1;"


def test_block_comment_becomes_separator():
    assert normalize_source("a/*ignore me*/b").text == "a b"


def test_whitespace_collapsed_and_line_endings_unified():
    assert normalize_source("a\r\n\t  b\n\nc").text == "a b c"


def test_string_literal_preserved_verbatim():
    src = 'emit Log("// not a comment");'
    assert normalize_source(src).text == src


def test_single_quoted_string_preserved():
    src = "x = '/* keep */';"
    assert normalize_source(src).text == src


def test_escaped_quote_does_not_end_string():
    src = r'x = "a\"b // still string";'
    assert normalize_source(src).text == src


def test_already_normalized_is_identity():
    src = 'contract A { function f() public { x = 1; } }'
    assert normalize_source(src).text == src


def test_unterminated_comment_reported_with_offset():
    result = normalize_source("ab /* oops")
    assert result.text == "ab"
    assert not result.clean
    (issue,) = result.issues
    assert issue.kind == "unterminated_comment"
    assert issue.byte_offset == 3


def test_unterminated_string_reported_with_offset():
    result = normalize_source('x = "abc')
    assert result.text == 'x = "abc'
    (issue,) = result.issues
    assert issue.kind == "unterminated_string"
    assert issue.byte_offset == 4


def test_byte_offset_counts_utf8_bytes():
    result = normalize_source('é /* oops')  # é is 2 bytes in UTF-8
    (issue,) = result.issues
    assert issue.byte_offset == 3


def test_division_is_not_a_comment():
    assert normalize_source("a = b / c;").text == "a = b / c;"


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet=st.characters(codec="utf-8"), max_size=200))
def test_normalize_idempotent(code):
    once = normalize_source(code).text
    assert normalize_source(once).text == once


# -- tokenize ----------------------------------------------------------------


def test_tokenize_empty():
    assert list(tokenize("").tokens) == []


def test_tokenize_hand_lexed_statement():
    assert list(tokenize("uint256 a = b + 1;").tokens) == [
        "uint256", "a", "=", "b", "+", "1", ";",
    ]


def test_tokenize_maximal_munch_ge():
    assert list(tokenize("a>=b").tokens) == ["a", ">=", "b"]


def test_tokenize_three_char_operator():
    assert list(tokenize("a<<=2;").tokens) == ["a", "<<=", "2", ";"]


def test_tokenize_member_access():
    assert list(tokenize("msg.sender.call{value: amt}(\"\")").tokens) == [
        "msg", ".", "sender", ".", "call", "{", "value", ":", "amt", "}",
        "(", '""', ")",
    ]


def test_tokenize_hex_literal_single_token():
    assert list(tokenize("x = 0xFF;").tokens) == ["x", "=", "0xFF", ";"]


def test_tokenize_scientific_literal():
    assert list(tokenize("1e18 + 2.5").tokens) == ["1e18", "+", "2.5"]


def test_tokenize_string_is_one_token_with_escaped_spaces():
    (tok,) = tokenize('"hello world"').tokens
    assert tok == '"hello\\x20world"'


def test_tokenize_unknown_byte_kept():
    assert list(tokenize("a § b").tokens) == ["a", "§", "b"]


def test_no_empty_or_whitespace_tokens():
    seq = preprocess_source('contract A{string s="a b\tc";/*x*/ uint k = 1e3;}')
    assert all(tok and not any(c.isspace() for c in tok) for tok in seq.tokens)


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet=st.characters(codec="utf-8"), max_size=200))
def test_lexing_stability(code):
    tokens = tokenize(normalize_source(code).text).tokens
    assert all(tok for tok in tokens)
    assert all(not any(c.isspace() for c in tok) for tok in tokens)
    rejoined = " ".join(tokens)
    assert tokenize(rejoined).tokens == tokens


# -- vocab and encoding ------------------------------------------------------


def seqs(*token_lists):
    return [TokenSequence(tuple(ts)) for ts in token_lists]


def test_build_vocab_empty_is_specials_only():
    vocab = build_vocab([], max_size=100, min_freq=1)
    assert len(vocab) == 2
    assert vocab.id_of == {"<pad>": 0, "<unk>": 1}


def test_build_vocab_min_freq():
    vocab = build_vocab(seqs(["a", "a", "b"], ["a"]), max_size=100, min_freq=2)
    assert "a" in vocab
    assert "b" not in vocab


def test_build_vocab_max_size_keeps_most_frequent():
    vocab = build_vocab(
        seqs(["a"] * 5 + ["b"] * 4 + ["c"] * 3 + ["d"] * 2 + ["e"] * 1),
        max_size=3,
        min_freq=1,
    )
    assert set(vocab.lexemes()) == {"<pad>", "<unk>", "a", "b", "c"}
    assert len(vocab) <= 3 + 2


def test_build_vocab_ties_break_lexicographically():
    vocab = build_vocab(seqs(["z", "y", "z", "y"]), max_size=1, min_freq=1)
    assert "y" in vocab
    assert "z" not in vocab


def test_vocab_ids_contiguous_from_zero():
    vocab = build_vocab(seqs(["a", "b", "a", "b", "c", "c"]), max_size=10, min_freq=1)
    assert sorted(vocab.id_of.values()) == list(range(len(vocab)))


def test_vocab_save_load_identical(tmp_path):
    vocab = build_vocab(seqs(["a", "b", "a", "+", "+", "+"]), max_size=10, min_freq=1)
    path = tmp_path / "vocab.json"
    save_vocab(vocab, path)
    loaded = load_vocab(path)
    assert loaded.id_of == vocab.id_of
    assert loaded.frequencies == vocab.frequencies
    assert loaded.max_size == vocab.max_size
    assert loaded.min_freq == vocab.min_freq


def test_encode_empty_sequence():
    vocab = build_vocab(seqs(["a", "a"]), max_size=10, min_freq=1)
    enc = encode_sequence(TokenSequence(()), vocab, max_len=4)
    assert enc.ids == (PAD_ID,) * 4
    assert enc.true_length == 0


def test_encode_truncates_to_max_len():
    vocab = build_vocab(seqs(["t"] * 4), max_size=10, min_freq=1)
    seq = TokenSequence(("t",) * 600)
    enc = encode_sequence(seq, vocab, max_len=512)
    assert len(enc.ids) == 512
    assert enc.true_length == 512
    assert all(i == vocab.encode_token("t") for i in enc.ids)


def test_encode_unknown_token_maps_to_unk():
    vocab = build_vocab(seqs(["a", "a"]), max_size=10, min_freq=1)
    enc = encode_sequence(TokenSequence(("a", "zz")), vocab, max_len=4)
    assert enc.ids == (vocab.encode_token("a"), UNK_ID, PAD_ID, PAD_ID)
    assert enc.true_length == 2


def test_encode_rejects_bad_max_len():
    vocab = build_vocab([], max_size=10, min_freq=1)
    with pytest.raises(ValueError):
        encode_sequence(TokenSequence(("a",)), vocab, max_len=0)


@settings(max_examples=50, deadline=None)
@given(
    train=st.lists(
        st.lists(st.sampled_from(["a", "b", "c", "+", "1"]), max_size=20), max_size=10
    ),
    other=st.lists(st.sampled_from(["a", "b", "c", "d", "e", "0xFF"]), max_size=30),
)
def test_no_vocab_leakage(train, other):
    vocab = build_vocab(seqs(*train), max_size=10, min_freq=1)
    enc = encode_sequence(TokenSequence(tuple(other)), vocab, max_len=32)
    assert len(enc.ids) == 32
    assert all(0 <= i < len(vocab) for i in enc.ids)
