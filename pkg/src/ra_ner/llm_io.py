"""Few-shot prompt assembly under a context-window budget, and parsing of
free-form LLM generations back into canonical entities and BIO labels.

Budgets count whitespace tokens as a stand-in for model tokens; defaults of
3100 / 7680 / 16385 correspond to the Llama2, Llama3 and gpt-3.5-turbo
window settings.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .labels import ENTITY_TYPES, B, I, Label, O, validate_bio
from .retrieval import _WRAP_RE, RetrievedContext

WINDOW_BUDGETS = {"llama2": 3100, "llama3": 7680, "gpt35": 16385}

DEFAULT_SYSTEM_PROMPT = (
    "You are an expert named-entity annotator for Hindi text."
)
DEFAULT_INSTRUCTION = (
    "Identify every named entity in the sentence and answer only with "
    "comma-separated pairs in the form entity: TYPE, where TYPE is one of "
    "LOC, PER, PROD, GRP, CORP, CW."
)


@dataclass(frozen=True)
class PromptSpec:
    system_prompt: str = DEFAULT_SYSTEM_PROMPT
    instruction: str = DEFAULT_INSTRUCTION
    shots: tuple[tuple[str, str], ...] = ()  # (sentence, entity listing)
    window_budget: int = 3100
    ra_enabled: bool = True


@dataclass(frozen=True)
class ParsedEntities:
    pairs: tuple[tuple[str, str], ...] = ()  # (surface, canonical type)


class PromptBudgetError(ValueError):
    pass


def _mandatory_sections(sentence: str, spec: PromptSpec) -> list[str]:
    sections = [spec.system_prompt, spec.instruction]
    for shot_sentence, listing in spec.shots:
        sections.append(f"Sentence: {shot_sentence}\nEntities: {listing}")
    sections.append(f"Sentence: {sentence}\nEntities:")
    return sections


def build_fewshot_prompt(sentence: str, ctx: RetrievedContext, spec: PromptSpec) -> str:
    """System prompt, instruction, shots, cleaned RA context, target sentence,
    answer cue -- with the context truncated last-first to fit the budget."""
    sections = _mandatory_sections(sentence, spec)
    mandatory_tokens = sum(len(s.split()) for s in sections)
    if mandatory_tokens > spec.window_budget:
        raise PromptBudgetError(
            f"mandatory sections need {mandatory_tokens} tokens, "
            f"budget is {spec.window_budget}"
        )
    context_block = ""
    if spec.ra_enabled and ctx.entries:
        words: list[str] = []
        for entry in ctx.entries:
            words.extend(_WRAP_RE.sub(lambda m: m.group("surface"), entry.rendered_text).split())
        room = spec.window_budget - mandatory_tokens - 1  # 1 for the "Context:" tag
        if room > 0:
            kept = words[:room]
            if kept:
                context_block = "Context: " + " ".join(kept)
    head = sections[:-1]
    tail = sections[-1]
    parts = head + ([context_block] if context_block else []) + [tail]
    return "\n\n".join(parts)


_TYPE_SYNONYMS = {
    "LOC": "LOC", "LOCATION": "LOC", "PLACE": "LOC",
    "PER": "PER", "PERSON": "PER", "PERSON NAME": "PER", "PEOPLE": "PER",
    "PROD": "PROD", "PRODUCT": "PROD", "PRODUCTION": "PROD",
    "GRP": "GRP", "GROUP": "GRP",
    "CORP": "CORP", "CORPORATION": "CORP", "COMPANY": "CORP",
    "CW": "CW", "CREATIVE WORK": "CW", "CREATIVEWORK": "CW", "WORK OF ART": "CW",
}


def normalize_type(raw: str) -> Optional[str]:
    """Map free-form type strings to a canonical type, or None."""
    key = re.sub(r"[\s_\-]+", " ", raw.strip()).upper()
    return _TYPE_SYNONYMS.get(key)


def _pairs_from_colon_list(text: str) -> list[tuple[str, str]]:
    pairs = []
    for chunk in text.split(","):
        if ":" not in chunk:
            continue
        surface, _, raw_type = chunk.rpartition(":")
        etype = normalize_type(raw_type)
        surface = surface.strip().strip("\"'")
        if etype and surface:
            pairs.append((surface, etype))
    return pairs


_BULLET_RES = (
    re.compile(r"^\s*(?:[-*\d.)]+\s*)?(?P<surface>.+?)\s*\(\s*(?P<type>[^()]+?)\s*\)\s*$"),
    re.compile(r"^\s*(?:[-*\d.)]+\s*)?(?P<surface>.+?)\s+-\s+(?P<type>.+?)\s*$"),
)


def parse_generation(text: str) -> ParsedEntities:
    """Extract entity/type pairs from a generation. Tiers, first hit wins:
    (a) a brace-delimited key: value listing, (b) comma-separated
    "surface: Type" pairs, (c) per-line "surface - Type" / "surface (Type)"
    bullets. Unknown types are dropped; never raises.
    """
    if not isinstance(text, str) or not text:
        return ParsedEntities()
    tiers: list[list[tuple[str, str]]] = []

    brace = re.search(r"\{(?P<body>[^{}]*)\}", text, re.DOTALL)
    if brace:
        tiers.append(_pairs_from_colon_list(brace.group("body")))
    tiers.append(_pairs_from_colon_list(text))
    bullet_pairs: list[tuple[str, str]] = []
    for line in text.splitlines():
        for pattern in _BULLET_RES:
            m = pattern.match(line)
            if m:
                etype = normalize_type(m.group("type"))
                surface = m.group("surface").strip().strip("\"'")
                if etype and surface:
                    bullet_pairs.append((surface, etype))
                break
    tiers.append(bullet_pairs)

    for tier in tiers:
        if tier:
            seen = set()
            unique = []
            for surface, etype in tier:
                if surface not in seen:
                    seen.add(surface)
                    unique.append((surface, etype))
            return ParsedEntities(tuple(unique))
    return ParsedEntities()


def serialize_entities(parsed: ParsedEntities) -> str:
    return ", ".join(f"{surface}: {etype}" for surface, etype in parsed.pairs)


def entities_to_bio(tokens: Sequence[str], parsed: ParsedEntities) -> tuple[Label, ...]:
    """Project parsed entities onto tokens: leftmost exact word-sequence
    occurrence not overlapping an earlier match; unmatched entities dropped."""
    labels: list[Label] = [O] * len(tokens)
    taken = [False] * len(tokens)
    for surface, etype in parsed.pairs:
        words = tuple(surface.split())
        if not words or len(words) > len(tokens):
            continue
        for start in range(0, len(tokens) - len(words) + 1):
            end = start + len(words)
            if any(taken[start:end]):
                continue
            if tuple(tokens[start:end]) == words:
                labels[start] = B(etype)
                for k in range(start + 1, end):
                    labels[k] = I(etype)
                for k in range(start, end):
                    taken[k] = True
                break
    assert not validate_bio(labels)
    return tuple(labels)
