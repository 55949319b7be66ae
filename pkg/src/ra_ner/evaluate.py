"""Strict span-level evaluation: per-type P/R/F1, macro F1, length-wise
tables, and boundary-exact confusion matrices.

A prediction counts only when start, end, and type all match a gold span.
Per-type metrics are micro-aggregated over the corpus (tp/fp/fn summed,
then P/R/F1 with the 0/0 -> 0 convention); macro F1 averages exactly the
six entity-type F1s. X labels are stripped before evaluation.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Sequence

from .augment import strip_augmentation
from .labels import ENTITY_TYPES, EntitySpan, Example, extract_spans, repair_bio


class AlignmentError(ValueError):
    pass


@dataclass
class TypeCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def add(self, other: "TypeCounts") -> None:
        self.tp += other.tp
        self.fp += other.fp
        self.fn += other.fn

    @property
    def precision(self) -> float:
        denom = self.tp + self.fp
        return self.tp / denom if denom else 0.0

    @property
    def recall(self) -> float:
        denom = self.tp + self.fn
        return self.tp / denom if denom else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2.0 * p * r / (p + r) if p + r else 0.0

    @property
    def gold_support(self) -> int:
        return self.tp + self.fn

    @property
    def predicted_count(self) -> int:
        return self.tp + self.fp


@dataclass
class EvalReport:
    per_type: dict[str, TypeCounts] = field(
        default_factory=lambda: {t: TypeCounts() for t in ENTITY_TYPES}
    )
    token_count: int = 0
    example_count: int = 0

    @property
    def macro_f1(self) -> float:
        return sum(self.per_type[t].f1 for t in ENTITY_TYPES) / len(ENTITY_TYPES)

    def merge(self, other: "EvalReport") -> None:
        for t in ENTITY_TYPES:
            self.per_type[t].add(other.per_type[t])
        self.token_count += other.token_count
        self.example_count += other.example_count


def strict_counts(
    gold: Sequence[EntitySpan], pred: Sequence[EntitySpan]
) -> dict[str, TypeCounts]:
    """Exact (start, end, type) matching within one sentence."""
    counts = {t: TypeCounts() for t in ENTITY_TYPES}
    gold_keys = {s.key() for s in gold}
    pred_keys = {s.key() for s in pred}
    for start, end, etype in gold_keys:
        if (start, end, etype) in pred_keys:
            counts[etype].tp += 1
        else:
            counts[etype].fn += 1
    for start, end, etype in pred_keys - gold_keys:
        counts[etype].fp += 1
    return counts


def _spans(example: Example) -> list[EntitySpan]:
    # X never counts as a type; repair guards against noisy predictions
    labels = repair_bio(strip_augmentation(example.labels, len(example.labels)))
    return extract_spans(example.tokens, labels)


def _check_aligned(gold: Sequence[Example], pred: Sequence[Example]) -> None:
    problems = []
    if len(gold) != len(pred):
        problems.append(f"{len(gold)} gold examples vs {len(pred)} predicted")
    for g, p in zip(gold, pred):
        if g.id != p.id:
            problems.append(f"id mismatch: gold {g.id!r} vs pred {p.id!r}")
        elif len(g.tokens) != len(p.tokens):
            problems.append(
                f"example {g.id}: {len(g.tokens)} gold tokens vs {len(p.tokens)} predicted"
            )
    if problems:
        raise AlignmentError("; ".join(problems[:10]))


def report(gold: Sequence[Example], pred: Sequence[Example]) -> EvalReport:
    _check_aligned(gold, pred)
    out = EvalReport()
    for g, p in zip(gold, pred):
        for etype, counts in strict_counts(_spans(g), _spans(p)).items():
            out.per_type[etype].add(counts)
        out.token_count += len(g.tokens)
        out.example_count += 1
    return out


@dataclass
class LengthwiseReport:
    rows: dict[int, EvalReport]  # sentence length -> report
    all: EvalReport
    l_max: int


def lengthwise(
    gold: Sequence[Example], pred: Sequence[Example], l_max: int = 15
) -> LengthwiseReport:
    """Partition by base sentence length; lengths above l_max appear only in
    the "all" row."""
    _check_aligned(gold, pred)
    rows: dict[int, EvalReport] = {}
    total = EvalReport()
    for g, p in zip(gold, pred):
        sub = report([g], [p])
        total.merge(sub)
        length = len(g.tokens)
        if length <= l_max:
            rows.setdefault(length, EvalReport()).merge(sub)
    return LengthwiseReport(dict(sorted(rows.items())), total, l_max)


CONFUSION_AXES = ENTITY_TYPES + ("O",)


@dataclass
class ConfusionMatrix:
    """Boundary-exact type confusion.

    cells[gold_type][pred_type]: for each gold span, the type of the
    boundary-matching predicted span, or O when none shares its boundaries.
    The gold-O row counts spurious predictions (no boundary-matching gold).
    """

    cells: dict[str, dict[str, int]]

    def row_percentages(self) -> dict[str, dict[str, float]]:
        out = {}
        for g, row in self.cells.items():
            total = sum(row.values())
            out[g] = {p: (c / total if total else 0.0) for p, c in row.items()}
        return out


def confusion(gold: Sequence[Example], pred: Sequence[Example]) -> ConfusionMatrix:
    _check_aligned(gold, pred)
    cells = {g: {p: 0 for p in CONFUSION_AXES} for g in CONFUSION_AXES}
    for g, p in zip(gold, pred):
        gold_spans = _spans(g)
        pred_spans = _spans(p)
        pred_by_bounds = {(s.start, s.end): s.etype for s in pred_spans}
        gold_bounds = {(s.start, s.end) for s in gold_spans}
        for span in gold_spans:
            cells[span.etype][pred_by_bounds.get((span.start, span.end), "O")] += 1
        for span in pred_spans:
            if (span.start, span.end) not in gold_bounds:
                cells["O"][span.etype] += 1
    return ConfusionMatrix(cells)


# ---------------------------------------------------------------------------
# Rendering


def report_table(rep: EvalReport) -> str:
    out = io.StringIO()
    out.write("Type\tP\tR\tF1\tGold\tPred\n")
    for t in ENTITY_TYPES:
        c = rep.per_type[t]
        out.write(
            f"{t}\t{c.precision:.4f}\t{c.recall:.4f}\t{c.f1:.4f}"
            f"\t{c.gold_support}\t{c.predicted_count}\n"
        )
    out.write(f"macro_f1\t{rep.macro_f1:.4f}\n")
    out.write(f"examples\t{rep.example_count}\ttokens\t{rep.token_count}\n")
    return out.getvalue()


def report_csv(rep: EvalReport) -> str:
    lines = ["type,precision,recall,f1,gold_support,predicted_count"]
    for t in ENTITY_TYPES:
        c = rep.per_type[t]
        lines.append(f"{t},{c.precision},{c.recall},{c.f1},{c.gold_support},{c.predicted_count}")
    lines.append(f"macro,,,{rep.macro_f1},,")
    return "\n".join(lines) + "\n"


def lengthwise_table(lw: LengthwiseReport) -> str:
    out = io.StringIO()
    out.write("Length\tExamples\tMacroF1\t" + "\t".join(ENTITY_TYPES) + "\n")

    def row(name: str, rep: EvalReport) -> str:
        f1s = "\t".join(f"{rep.per_type[t].f1:.4f}" for t in ENTITY_TYPES)
        return f"{name}\t{rep.example_count}\t{rep.macro_f1:.4f}\t{f1s}\n"

    for length, rep in lw.rows.items():
        out.write(row(str(length), rep))
    out.write(row("all", lw.all))
    return out.getvalue()


def confusion_table(cm: ConfusionMatrix) -> str:
    out = io.StringIO()
    out.write("gold\\pred\t" + "\t".join(CONFUSION_AXES) + "\n")
    pct = cm.row_percentages()
    for g in CONFUSION_AXES:
        out.write(g + "\t" + "\t".join(str(cm.cells[g][p]) for p in CONFUSION_AXES) + "\n")
    out.write("row percentages\n")
    for g in CONFUSION_AXES:
        out.write(g + "\t" + "\t".join(f"{pct[g][p]:.3f}" for p in CONFUSION_AXES) + "\n")
    return out.getvalue()
