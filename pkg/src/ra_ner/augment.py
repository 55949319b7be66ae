"""Assemble augmented examples and generative fine-tune records.

Encoder-style augmentation appends retrieved context after an <EOS> marker:
    base tokens ... <EOS> context tokens ...
with every token after the base region labeled X (serialized "B-X").
Generative records follow the instruct template
    <s>SYSTEM <INST> instruction sentence context </INST> entity listing</s>
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

from .labels import Example, Label, O, X, extract_spans
from .retrieval import _WRAP_RE, RetrievedContext


@dataclass(frozen=True)
class AugmentConfig:
    eos_marker: str = "<EOS>"
    separator_token: str = "[SEP]"  # model segment separator, e.g. </s> for XLM-R
    token_budget: int = 256


@dataclass(frozen=True)
class AugmentedExample:
    base: Example
    aug_tokens: tuple[str, ...]
    eos_marker: str = "<EOS>"

    @property
    def base_len(self) -> int:
        return len(self.base.tokens)

    @property
    def full_tokens(self) -> tuple[str, ...]:
        return self.base.tokens + (self.eos_marker,) + self.aug_tokens

    @property
    def full_labels(self) -> tuple[Label, ...]:
        return self.base.labels + (X,) * (1 + len(self.aug_tokens))

    @property
    def full_text(self) -> str:
        return " ".join(self.full_tokens)


def bare(example: Example, eos_marker: str = "<EOS>") -> AugmentedExample:
    """An augmented example with no retrieved context (the no-RA form)."""
    return AugmentedExample(example, (), eos_marker)


def augment_example(
    example: Example, ctx: RetrievedContext, cfg: AugmentConfig
) -> AugmentedExample:
    """Append whitespace-tokenized context entries after the <EOS> marker.

    Entries are joined with cfg.separator_token. Truncation to token_budget
    drops whole trailing entries; only if not even the first entry fits is
    that entry word-trimmed. Base tokens and the marker are never touched.
    """
    base_len = len(example.tokens)
    if cfg.token_budget < base_len + 1:
        raise ValueError(
            f"token_budget {cfg.token_budget} cannot hold {base_len} base tokens + marker"
        )
    available = cfg.token_budget - base_len - 1
    aug: list[str] = []
    for entry in ctx.entries:
        # a context token colliding with the marker would break base/aug split
        words = [w for w in entry.rendered_text.split() if w != cfg.eos_marker]
        need = len(words) + (1 if aug else 0)  # +1 for the separator
        if len(aug) + need > available:
            if not aug:
                aug = words[:available]
            break
        if aug:
            aug.append(cfg.separator_token)
        aug.extend(words)
    return AugmentedExample(example, tuple(aug), cfg.eos_marker)


def strip_augmentation(full_labels: Sequence[Label], base_len: int) -> tuple[Label, ...]:
    """Project predicted labels back onto the original words.

    Keeps the first base_len labels; X predicted inside the base region
    becomes O (X is not a real class there).
    """
    if len(full_labels) < base_len:
        raise ValueError(f"{len(full_labels)} labels cannot cover base length {base_len}")
    return tuple(O if lab.kind == "X" else lab for lab in full_labels[:base_len])


# ---------------------------------------------------------------------------
# Generative fine-tune records


@dataclass(frozen=True)
class FinetuneRecord:
    system_prompt: str
    instruction: str
    sentence: str
    ra_context: str
    output: str


def clean_context_text(ctx: RetrievedContext) -> str:
    """Concatenate entries with hyperlink wrappers stripped to plain surfaces.

    Bracketed [title] prefixes are kept; only the <e:...> markup is special
    symbols the prompt format cannot carry.
    """
    cleaned = [_WRAP_RE.sub(lambda m: m.group("surface"), e.rendered_text) for e in ctx.entries]
    return " ".join(cleaned)


def entity_listing(example: Example) -> str:
    """Gold entities in sentence order as "surface: TYPE" pairs."""
    spans = extract_spans(example.tokens, example.labels)
    return ", ".join(f"{s.surface}: {s.etype}" for s in spans)


def serialize_record(rec: FinetuneRecord) -> str:
    body = " ".join(p for p in (rec.instruction, rec.sentence, rec.ra_context) if p)
    return f"<s>{rec.system_prompt} <INST> {body} </INST> {rec.output}</s>"


def build_finetune_record(
    example: Example,
    ctx: RetrievedContext,
    system_prompt: str,
    instruction: str,
    input_budget: int = 800,
) -> tuple[FinetuneRecord, str]:
    """Build one instruct-tuning record; the serialized string stays within
    input_budget whitespace tokens by truncating the context tail."""
    sentence = " ".join(example.tokens)
    output = entity_listing(example)
    skeleton = FinetuneRecord(system_prompt, instruction, sentence, "", output)
    overhead = len(serialize_record(skeleton).split())
    context_words = clean_context_text(ctx).split()
    rec = FinetuneRecord(
        system_prompt,
        instruction,
        sentence,
        " ".join(context_words[: max(0, input_budget - overhead)]),
        output,
    )
    return rec, serialize_record(rec)


# ---------------------------------------------------------------------------
# Serialization of augmented datasets (CoNLL + sidecar with base lengths)


def sidecar_line(aug: AugmentedExample) -> str:
    return json.dumps(
        {"id": aug.base.id, "base_len": aug.base_len, "eos_pos": aug.base_len},
        ensure_ascii=False,
    )


def finetune_record_line(rec: FinetuneRecord, serialized: str) -> str:
    return json.dumps(
        {
            "system": rec.system_prompt,
            "instruction": rec.instruction,
            "sentence": rec.sentence,
            "context": rec.ra_context,
            "output": rec.output,
            "serialized": serialized,
        },
        ensure_ascii=False,
    )
