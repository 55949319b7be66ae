import pytest
from hypothesis import given
from hypothesis import strategies as st

from ra_ner.align import Alignment, SubwordVocab, collapse_labels, expand_labels, tokenize_word
from ra_ner.labels import B, O


def vocab_of(*pieces):
    return SubwordVocab(frozenset(pieces) | {"[UNK]"})


def test_word_in_vocab_is_identity():
    v = vocab_of("साहित्य")
    assert tokenize_word(v, "साहित्य") == ["साहित्य"]


def test_greedy_split():
    v = vocab_of("सा", "##हित्य")
    assert tokenize_word(v, "साहित्य") == ["सा", "##हित्य"]


def test_longest_match_first():
    v = vocab_of("a", "ab", "##c", "##bc")
    assert tokenize_word(v, "abc") == ["ab", "##c"]


def test_unknown_word():
    v = vocab_of("x")
    assert tokenize_word(v, "yz") == ["[UNK]"]
    # failure after a successful first piece still collapses to UNK
    v = vocab_of("y")
    assert tokenize_word(v, "yz") == ["[UNK]"]


def test_empty_continuation_prefix():
    v = SubwordVocab(frozenset({"ab", "c", "[UNK]"}), continuation_prefix="")
    assert tokenize_word(v, "abc") == ["ab", "c"]


def test_unknown_piece_must_be_in_vocab():
    with pytest.raises(ValueError):
        SubwordVocab(frozenset({"a"}))


def test_vocab_load(tmp_path):
    path = tmp_path / "vocab.txt"
    path.write_text("[UNK]\nसा\n##हित्य\n", encoding="utf-8")
    v = SubwordVocab.load(path)
    assert tokenize_word(v, "साहित्य") == ["सा", "##हित्य"]


def test_expand_assigns_word_label_to_every_piece():
    v = vocab_of("सा", "##हित्य")
    alignment = expand_labels(["साहित्य"], [B("LOC")], v)
    assert alignment.piece_labels == (B("LOC"), B("LOC"))
    assert alignment.word_to_pieces == ((0, 2),)


def test_expand_identity_for_single_piece_words():
    v = vocab_of("क", "ख")
    alignment = expand_labels(["क", "ख"], [O, B("PER")], v)
    assert alignment.piece_labels == (O, B("PER"))


def test_collapse_uses_first_piece():
    v = vocab_of("सा", "##हित्य")
    alignment = expand_labels(["साहित्य"], [O], v)
    assert collapse_labels(alignment, [B("PER"), O]) == (B("PER"),)


def test_collapse_length_mismatch():
    v = vocab_of("क")
    alignment = expand_labels(["क"], [O], v)
    with pytest.raises(ValueError):
        collapse_labels(alignment, [O, O])


ALPHABET = "कखगघचज"


@st.composite
def vocab_and_sentence(draw):
    pieces = {"[UNK]"}
    for _ in range(draw(st.integers(1, 12))):
        body = draw(st.text(alphabet=ALPHABET, min_size=1, max_size=3))
        pieces.add(body)
        if draw(st.booleans()):
            pieces.add("##" + body)
    vocab = SubwordVocab(frozenset(pieces))
    words = [
        draw(st.text(alphabet=ALPHABET, min_size=1, max_size=6))
        for _ in range(draw(st.integers(1, 8)))
    ]
    labels = [draw(st.sampled_from([O, B("LOC"), B("CW")])) for _ in words]
    return vocab, words, labels


@given(vocab_and_sentence())
def test_tokenize_concatenation_property(case):
    vocab, words, _ = case
    for word in words:
        pieces = tokenize_word(vocab, word)
        if pieces == [vocab.unknown_piece]:
            continue
        rebuilt = pieces[0] + "".join(p[len(vocab.continuation_prefix):] for p in pieces[1:])
        assert rebuilt == word


@given(vocab_and_sentence())
def test_expand_collapse_round_trip(case):
    vocab, words, labels = case
    alignment = expand_labels(words, labels, vocab)
    # coverage: ranges partition the piece sequence
    flat = [i for start, end in alignment.word_to_pieces for i in range(start, end)]
    assert flat == list(range(len(alignment.pieces)))
    assert all(end > start for start, end in alignment.word_to_pieces)
    assert collapse_labels(alignment, alignment.piece_labels) == tuple(labels)
