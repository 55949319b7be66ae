"""BIO label vocabulary and span conversion for the 6-type tag set.

Labels are IOB2 over six entity types (LOC, PER, PROD, GRP, CORP, CW),
plus O and the augmentation label X (serialized as "B-X"), 14 values total.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

ENTITY_TYPES = ("LOC", "PER", "PROD", "GRP", "CORP", "CW")


@dataclass(frozen=True)
class Label:
    """One of the 14 label values. kind is O, B, I or X; etype set iff B/I."""

    kind: str
    etype: Optional[str] = None

    def __post_init__(self):
        if self.kind in ("O", "X"):
            if self.etype is not None:
                raise ValueError(f"{self.kind} label carries no entity type")
        elif self.kind in ("B", "I"):
            if self.etype not in ENTITY_TYPES:
                raise ValueError(f"unknown entity type: {self.etype!r}")
        else:
            raise ValueError(f"unknown label kind: {self.kind!r}")

    def __str__(self) -> str:
        if self.kind == "O":
            return "O"
        if self.kind == "X":
            return "B-X"
        return f"{self.kind}-{self.etype}"

    @staticmethod
    def parse(tag: str) -> "Label":
        try:
            return _BY_TAG[tag]
        except KeyError:
            raise ValueError(f"unknown label tag: {tag!r}") from None


O = Label("O")
X = Label("X")


def B(etype: str) -> Label:
    return _BY_TAG[f"B-{etype}"]


def I(etype: str) -> Label:
    return _BY_TAG[f"I-{etype}"]


# Class index order is fixed so that an all-zero classifier degrades to O,
# and X sits last. Recorded in model files; do not reorder.
CLASS_ORDER: tuple[Label, ...] = (
    (O,)
    + tuple(
        Label(kind, t) for t in ("LOC", "PER", "PROD", "GRP", "CORP", "CW") for kind in ("B", "I")
    )
    + (X,)
)
NUM_CLASSES = len(CLASS_ORDER)  # 14
CLASS_INDEX = {lab: i for i, lab in enumerate(CLASS_ORDER)}

_BY_TAG = {str(lab): lab for lab in CLASS_ORDER}
assert len(_BY_TAG) == 14


@dataclass(frozen=True)
class Example:
    """One CoNLL sentence: parallel token and label sequences."""

    id: str
    tokens: tuple[str, ...]
    labels: tuple[Label, ...]

    def __post_init__(self):
        if len(self.tokens) != len(self.labels):
            raise ValueError(
                f"example {self.id}: {len(self.tokens)} tokens vs {len(self.labels)} labels"
            )
        if not self.tokens:
            raise ValueError(f"example {self.id}: empty sentence")
        for tok in self.tokens:
            if not tok or any(ch.isspace() for ch in tok):
                raise ValueError(f"example {self.id}: token {tok!r} contains whitespace")


@dataclass(frozen=True)
class EntitySpan:
    """Word-index span [start, end) of a single entity."""

    start: int
    end: int
    etype: str
    surface: str

    def key(self) -> tuple[int, int, str]:
        return (self.start, self.end, self.etype)


@dataclass(frozen=True)
class Violation:
    """A BIO sequence defect at one position."""

    index: int
    kind: str  # "orphan-I" or "type-mismatch-I"
    expected: Optional[str]
    actual: str


def validate_bio(labels: Sequence[Label]) -> list[Violation]:
    """Report every I label not preceded by a same-type B or I. Never raises."""
    violations = []
    prev: Optional[Label] = None
    for i, lab in enumerate(labels):
        if lab.kind == "I":
            if prev is None or prev.kind not in ("B", "I"):
                violations.append(Violation(i, "orphan-I", None, str(lab)))
            elif prev.etype != lab.etype:
                violations.append(
                    Violation(i, "type-mismatch-I", f"I-{prev.etype}", str(lab))
                )
        prev = lab
    return violations


def repair_bio(labels: Sequence[Label]) -> tuple[Label, ...]:
    """Promote every orphan or type-mismatched I-t to B-t.

    Idempotent; valid sequences come back unchanged.
    """
    out: list[Label] = []
    prev: Optional[Label] = None
    for lab in labels:
        if lab.kind == "I" and (
            prev is None or prev.kind not in ("B", "I") or prev.etype != lab.etype
        ):
            lab = B(lab.etype)  # type: ignore[arg-type]
        out.append(lab)
        prev = lab
    return tuple(out)


def extract_spans(tokens: Sequence[str], labels: Sequence[Label]) -> list[EntitySpan]:
    """Convert a valid BIO sequence into entity spans, ordered by start.

    X and O produce no spans. Raises on invalid BIO (repair first).
    """
    if validate_bio(labels):
        raise ValueError("invalid BIO sequence; call repair_bio before extracting spans")
    spans: list[EntitySpan] = []
    i = 0
    n = len(labels)
    while i < n:
        lab = labels[i]
        if lab.kind != "B" or lab.etype is None:
            i += 1
            continue
        j = i + 1
        while j < n and labels[j].kind == "I" and labels[j].etype == lab.etype:
            j += 1
        spans.append(EntitySpan(i, j, lab.etype, " ".join(tokens[i:j])))
        i = j
    return spans


def spans_to_labels(spans: Iterable[EntitySpan], length: int) -> tuple[Label, ...]:
    """Inverse of extract_spans for non-overlapping spans."""
    out: list[Label] = [O] * length
    for span in spans:
        if not (0 <= span.start < span.end <= length):
            raise ValueError(f"span {span} out of range for length {length}")
        out[span.start] = B(span.etype)
        for k in range(span.start + 1, span.end):
            out[k] = I(span.etype)
    return tuple(out)
