"""CoNLL file parsing, writing, and dataset statistics.

Layout convention: one token per line, first whitespace-separated field is
the word, last field is the BIO tag, middle columns ignored (some dataset
releases carry extra columns). Sentences are separated by blank lines and
may be preceded by a `# id <...>` comment line.
"""

from __future__ import annotations

import io
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .labels import CLASS_ORDER, Example, Label


class ConllParseError(ValueError):
    def __init__(self, message: str, line_no: int):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def parse_conll(text: str) -> list[Example]:
    """Parse blank-line-separated CoNLL sentences into Examples.

    `# id <...>` comment lines become example ids; otherwise sequential
    ids ("0", "1", ...) are assigned.
    """
    examples: list[Example] = []
    tokens: list[str] = []
    labels: list[Label] = []
    pending_id: str | None = None

    def flush():
        nonlocal tokens, labels, pending_id
        if tokens:
            ex_id = pending_id if pending_id is not None else str(len(examples))
            examples.append(Example(ex_id, tuple(tokens), tuple(labels)))
        tokens, labels, pending_id = [], [], None

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            flush()
            continue
        if line.startswith("#"):
            comment = line.lstrip("#").strip()
            if comment.startswith("id"):
                pending_id = comment[2:].strip() or comment
            continue
        fields = line.split()
        if len(fields) < 2:
            raise ConllParseError(f"no tag column in {raw!r}", line_no)
        word, tag = fields[0], fields[-1]
        try:
            label = Label.parse(tag)
        except ValueError as exc:
            raise ConllParseError(str(exc), line_no) from None
        tokens.append(word)
        labels.append(label)
    flush()
    return examples


def write_conll(examples: Iterable[Example], include_ids: bool = True) -> str:
    """Serialize Examples back to CoNLL text; round-trips through parse_conll."""
    out = io.StringIO()
    for ex in examples:
        if include_ids:
            out.write(f"# id {ex.id}\n")
        for word, label in zip(ex.tokens, ex.labels):
            out.write(f"{word} {label}\n")
        out.write("\n")
    return out.getvalue()


def read_conll_file(path) -> list[Example]:
    with open(path, encoding="utf-8") as fh:
        return parse_conll(fh.read())


def write_conll_file(path, examples: Iterable[Example], include_ids: bool = True) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(write_conll(examples, include_ids=include_ids))


@dataclass
class DatasetStats:
    label_counts: Counter = field(default_factory=Counter)  # tag string -> count
    total_tokens: int = 0
    num_examples: int = 0
    length_histogram: Counter = field(default_factory=Counter)  # length -> count


def dataset_stats(examples: Sequence[Example]) -> DatasetStats:
    stats = DatasetStats()
    for ex in examples:
        stats.num_examples += 1
        stats.total_tokens += len(ex.tokens)
        stats.length_histogram[len(ex.tokens)] += 1
        for lab in ex.labels:
            stats.label_counts[str(lab)] += 1
    return stats


def stats_table(stats: DatasetStats) -> str:
    """Human-readable table: per-label counts, totals, length histogram."""
    lines = ["Tag\tCount"]
    for lab in CLASS_ORDER:
        tag = str(lab)
        if tag == "B-X" and stats.label_counts[tag] == 0:
            continue
        lines.append(f"{tag}\t{stats.label_counts[tag]}")
    lines.append(f"Total\t{stats.total_tokens}")
    lines.append("")
    lines.append(f"Examples\t{stats.num_examples}")
    lines.append("Length\tExamples")
    for length in sorted(stats.length_histogram):
        lines.append(f"{length}\t{stats.length_histogram[length]}")
    return "\n".join(lines) + "\n"


def stats_keyvalues(stats: DatasetStats) -> str:
    """Machine-readable key<TAB>value lines."""
    lines = []
    for lab in CLASS_ORDER:
        tag = str(lab)
        lines.append(f"count.{tag}\t{stats.label_counts[tag]}")
    lines.append(f"total_tokens\t{stats.total_tokens}")
    lines.append(f"num_examples\t{stats.num_examples}")
    for length in sorted(stats.length_histogram):
        lines.append(f"length.{length}\t{stats.length_histogram[length]}")
    return "\n".join(lines) + "\n"
