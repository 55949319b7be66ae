"""Turn KB search hits into rendered augmentation contexts.

Rendered context entries follow the wiki-augmentation conventions: every
sentence is prefixed with its page title in square brackets, and hyperlinks
are wrapped as <e:TARGET>SURFACE</e> so downstream consumers can recognize
entity mentions inside retrieved text.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from . import kb
from .labels import EntitySpan, Example


@dataclass(frozen=True)
class RetrievalConfig:
    k_sentence: int = 10
    k_title_per_entity: int = 1
    max_context_entries: int = 20

    def __post_init__(self):
        if min(self.k_sentence, self.k_title_per_entity, self.max_context_entries) < 1:
            raise ValueError("retrieval config values must be positive")


SENTENCE_RETRIEVAL = "sentence-retrieval"
ENTITY_RETRIEVAL = "entity-retrieval"


@dataclass(frozen=True)
class ContextEntry:
    source_title: str
    rendered_text: str
    origin: str  # SENTENCE_RETRIEVAL or ENTITY_RETRIEVAL


@dataclass(frozen=True)
class RetrievedContext:
    entries: tuple[ContextEntry, ...] = ()

    def __bool__(self) -> bool:
        return bool(self.entries)


EMPTY_CONTEXT = RetrievedContext()


def render_paragraph(title: str, paragraph: kb.Paragraph, origin: str) -> ContextEntry:
    """Render one paragraph: [TITLE] sentence prefixes + hyperlink wrapping."""
    if not paragraph.sentences:
        return ContextEntry(title, f"[{title}]", origin)
    text = paragraph.text
    links = sorted(paragraph.hyperlinks, key=lambda l: l.char_start)
    prev_end = 0
    for link in links:
        if link.char_start < prev_end:
            raise kb.KBError(f"document {title!r}: overlapping hyperlink ranges")
        prev_end = link.char_end

    rendered_sentences = []
    cursor = 0  # sentence start within the paragraph text
    for sent in paragraph.sentences:
        sent_start, sent_end = cursor, cursor + len(sent)
        out = []
        pos = sent_start
        for link in links:
            # links straddling a sentence boundary are left unwrapped
            if link.char_start < sent_start or link.char_end > sent_end:
                continue
            out.append(text[pos : link.char_start])
            out.append(f"<e:{link.target_title}>{link.surface}</e>")
            pos = link.char_end
        out.append(text[pos:sent_end])
        rendered_sentences.append(f"[{title}] " + "".join(out))
        cursor = sent_end + 1  # skip joining space
    return ContextEntry(title, " ".join(rendered_sentences), origin)


_WRAP_RE = re.compile(r"<e:(?P<target>[^>]*)>(?P<surface>.*?)</e>", re.DOTALL)


def unrender(entry: ContextEntry) -> str:
    """Inverse of render_paragraph: drop [TITLE] prefixes, unwrap <e:...>."""
    prefix = f"[{entry.source_title}] "
    body = entry.rendered_text
    if body.startswith(prefix):
        body = body[len(prefix) :]
    body = body.replace(f" {prefix}", " ")
    return _WRAP_RE.sub(lambda m: m.group("surface"), body)


def _dedupe(entries: list[ContextEntry]) -> tuple[ContextEntry, ...]:
    seen = set()
    out = []
    for entry in entries:
        key = (entry.source_title, entry.rendered_text)
        if key not in seen:
            seen.add(key)
            out.append(entry)
    return tuple(out)


def retrieve_by_sentence(
    example: Example, index: kb.Index, store: kb.DocumentStore, cfg: RetrievalConfig
) -> RetrievedContext:
    """Query the sentence field with the whole sentence; render hit paragraphs."""
    query = " ".join(example.tokens)
    hits = kb.search(index, "sentence", query, cfg.k_sentence)
    entries = []
    for hit in hits:
        title, para = kb.get_paragraph(store, hit)
        entries.append(render_paragraph(title, para, SENTENCE_RETRIEVAL))
    return RetrievedContext(_dedupe(entries))


def retrieve_by_entities(
    entities: list[EntitySpan], index: kb.Index, store: kb.DocumentStore, cfg: RetrievalConfig
) -> RetrievedContext:
    """Title-field search for each distinct predicted entity surface."""
    entries = []
    seen_surfaces = set()
    for span in entities:
        if span.surface in seen_surfaces:
            continue
        seen_surfaces.add(span.surface)
        for hit in kb.search(index, "title", span.surface, cfg.k_title_per_entity):
            title, para = kb.get_paragraph(store, hit)
            entries.append(render_paragraph(title, para, ENTITY_RETRIEVAL))
    return RetrievedContext(_dedupe(entries))


def combine(
    sentence_ctx: RetrievedContext, entity_ctx: RetrievedContext, cfg: RetrievalConfig
) -> RetrievedContext:
    """Entity entries first (the more targeted signal), then sentence entries,
    deduplicated, truncated to max_context_entries."""
    merged = _dedupe(list(entity_ctx.entries) + list(sentence_ctx.entries))
    return RetrievedContext(merged[: cfg.max_context_entries])
