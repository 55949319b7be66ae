"""Greedy longest-match subword tokenization and label alignment.

Pre-processing expands each word's label onto all of its pieces; post-
processing collapses predictions back by keeping the first piece's label.
A sentencepiece-style inventory works through the same abstraction by
supplying an empty continuation prefix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .labels import Label


@dataclass(frozen=True)
class SubwordVocab:
    pieces: frozenset[str]
    continuation_prefix: str = "##"
    unknown_piece: str = "[UNK]"

    def __post_init__(self):
        if self.unknown_piece not in self.pieces:
            raise ValueError("unknown_piece must be in the piece inventory")

    @staticmethod
    def load(path, continuation_prefix: str = "##", unknown_piece: str = "[UNK]") -> "SubwordVocab":
        with open(path, encoding="utf-8") as fh:
            pieces = frozenset(line.rstrip("\n") for line in fh if line.rstrip("\n"))
        return SubwordVocab(pieces, continuation_prefix, unknown_piece)


@dataclass(frozen=True)
class Alignment:
    word_to_pieces: tuple[tuple[int, int], ...]  # per word: [start, end) piece range
    pieces: tuple[str, ...]
    piece_labels: tuple[Label, ...]


def tokenize_word(vocab: SubwordVocab, word: str) -> list[str]:
    """Greedy longest-match-first segmentation (WordPiece style).

    Pieces after the first carry the continuation prefix. If at any point no
    prefix of the remainder matches, the whole word maps to unknown_piece.
    """
    if not word:
        raise ValueError("cannot tokenize an empty word")
    pieces: list[str] = []
    start = 0
    while start < len(word):
        end = len(word)
        found = None
        while end > start:
            candidate = word[start:end]
            if start > 0:
                candidate = vocab.continuation_prefix + candidate
            if candidate in vocab.pieces:
                found = candidate
                break
            end -= 1
        if found is None:
            return [vocab.unknown_piece]
        pieces.append(found)
        start = end
    return pieces


def expand_labels(
    words: Sequence[str], labels: Sequence[Label], vocab: SubwordVocab
) -> Alignment:
    """Tokenize each word and give every piece its word's label."""
    if len(words) != len(labels):
        raise ValueError(f"{len(words)} words vs {len(labels)} labels")
    ranges: list[tuple[int, int]] = []
    pieces: list[str] = []
    piece_labels: list[Label] = []
    for word, label in zip(words, labels):
        word_pieces = tokenize_word(vocab, word)
        ranges.append((len(pieces), len(pieces) + len(word_pieces)))
        pieces.extend(word_pieces)
        piece_labels.extend([label] * len(word_pieces))
    return Alignment(tuple(ranges), tuple(pieces), tuple(piece_labels))


def collapse_labels(
    alignment: Alignment, predicted_piece_labels: Sequence[Label]
) -> tuple[Label, ...]:
    """Word i's label is the predicted label of its first piece."""
    if len(predicted_piece_labels) != len(alignment.pieces):
        raise ValueError(
            f"{len(predicted_piece_labels)} predictions vs {len(alignment.pieces)} pieces"
        )
    return tuple(predicted_piece_labels[start] for start, _ in alignment.word_to_pieces)
