"""Deterministic synthetic fixtures: a desk-scale stand-in corpus, a wiki-style
KB, and the low-context benchmark used by the acceptance suite.

Everything here is a pure function of its seed so that committed expected
values stay stable.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass

from .labels import ENTITY_TYPES, B, I, Example, Label, O

# Devanagari-flavored syllable inventory for synthetic words
_SYLLABLES = [
    "का", "ना", "ता", "रा", "मा", "सा", "ली", "नी", "ती", "री",
    "वि", "कि", "पु", "गु", "ल", "म", "ब", "स", "ह", "द",
]
_FILLERS = ["और", "का", "में", "है", "यह", "एक", "से", "पर", "नया", "पुराना"]


def synth_word(rng: random.Random, syllables: int = 2) -> str:
    return "".join(rng.choice(_SYLLABLES) for _ in range(syllables))


def synth_entity(rng: random.Random) -> tuple[str, ...]:
    return tuple(synth_word(rng, rng.randint(2, 3)) for _ in range(rng.randint(1, 3)))


@dataclass
class Benchmark:
    train: list[Example]
    test: list[Example]
    kb_records: list[dict]
    gazetteer: dict[str, str]  # train entity surfaces
    title_types: dict[str, str]  # KB page title -> entity type


def make_sentence(
    rng: random.Random, ex_id: str, entity: tuple[str, ...], etype: str, filler: int
) -> Example:
    """entity words plus `filler` filler words, entity placed at a random offset."""
    words = [rng.choice(_FILLERS) for _ in range(filler)]
    pos = rng.randint(0, len(words))
    tokens = tuple(words[:pos]) + entity + tuple(words[pos:])
    labels: list[Label] = [O] * len(tokens)
    labels[pos] = B(etype)
    for k in range(pos + 1, pos + len(entity)):
        labels[k] = I(etype)
    return Example(ex_id, tokens, tuple(labels))


def synthetic_corpus(n: int = 200, seed: int = 7) -> list[Example]:
    """The bundled stats fixture: n sentences, deterministic."""
    rng = random.Random(seed)
    out = []
    for i in range(n):
        etype = ENTITY_TYPES[i % len(ENTITY_TYPES)]
        entity = synth_entity(rng)
        out.append(make_sentence(rng, f"fx-{i}", entity, etype, rng.randint(0, 6)))
    return out


def synthetic_kb(n_docs: int = 500, seed: int = 11) -> list[dict]:
    """KB-JSONL records for oracle tests: n_docs pages of random sentences."""
    rng = random.Random(seed)
    records = []
    for d in range(n_docs):
        title = f"{synth_word(rng, 3)} {synth_word(rng, 2)}" if rng.random() < 0.4 else synth_word(rng, 3)
        paragraphs = []
        for _ in range(rng.randint(1, 3)):
            sentences = [
                " ".join(synth_word(rng, rng.randint(1, 3)) for _ in range(rng.randint(3, 9)))
                for _ in range(rng.randint(1, 4))
            ]
            text = " ".join(sentences)
            links = []
            words = text.split()
            if len(words) >= 2 and rng.random() < 0.5:
                w = rng.choice(words[:-1])
                s = text.find(w)
                links.append({"s": s, "e": s + len(w), "t": synth_word(rng, 2)})
            paragraphs.append({"sentences": sentences, "links": links})
        records.append({"title": title, "paragraphs": paragraphs})
    return records


def _page_for_entity(
    rng: random.Random, surface_words: tuple[str, ...], etype: str, mention_extra: list[str]
) -> dict:
    """A wiki page about one entity: title is the surface, paragraphs repeat it
    and hyperlink it, so retrieval can expose it to the context gazetteer."""
    surface = " ".join(surface_words)
    sentences = []
    for _ in range(2):
        lead = " ".join(rng.choice(_FILLERS) for _ in range(rng.randint(1, 3)))
        tail = " ".join(mention_extra + [rng.choice(_FILLERS)])
        sentences.append(f"{surface} {lead} {tail}".strip())
    text = " ".join(sentences)
    start = text.find(surface)
    links = [{"s": start, "e": start + len(surface), "t": surface}]
    return {"title": surface, "paragraphs": [{"sentences": sentences, "links": links}]}


def low_context_benchmark(seed: int = 23) -> Benchmark:
    """The RA-benefit benchmark.

    Test sentences of lengths 1..5 (30 per length). Each carries exactly one
    entity. A length-dependent share of entities is train-known (covered by
    the static gazetteer); the rest appear verbatim only in KB pages, so a
    matcher can type them only after retrieval surfaces the page markup.
    The known share rises with length, which makes the RA-vs-no-RA gap
    shrink as sentences get longer.
    """
    rng = random.Random(seed)
    known_fraction = {1: 0.0, 2: 0.2, 3: 0.4, 4: 0.6, 5: 0.8}

    train: list[Example] = []
    gazetteer: dict[str, str] = {}
    train_entities: list[tuple[tuple[str, ...], str]] = []
    for i in range(120):
        etype = ENTITY_TYPES[i % len(ENTITY_TYPES)]
        entity = synth_entity(rng)
        surface = " ".join(entity)
        if surface in gazetteer:
            continue
        gazetteer[surface] = etype
        train_entities.append((entity, etype))
        train.append(make_sentence(rng, f"train-{i}", entity, etype, rng.randint(1, 5)))

    kb_records: list[dict] = []
    title_types: dict[str, str] = {}
    test: list[Example] = []
    idx = 0
    for length in (1, 2, 3, 4, 5):
        for j in range(30):
            etype = ENTITY_TYPES[(idx + j) % len(ENTITY_TYPES)]
            known = rng.random() < known_fraction[length]
            if known and train_entities:
                entity, etype = train_entities[rng.randrange(len(train_entities))]
                entity = entity[: max(1, min(len(entity), length))]
                surface = " ".join(entity)
                etype = gazetteer.get(surface, etype)
                if surface not in gazetteer:
                    known = False
            if not known:
                while True:
                    entity = tuple(synth_word(rng, 3) for _ in range(min(rng.randint(1, 3), length)))
                    surface = " ".join(entity)
                    if surface not in gazetteer and surface not in title_types:
                        break
                title_types[surface] = etype
                kb_records.append(
                    _page_for_entity(rng, entity, etype, [synth_word(rng, 2)])
                )
            filler = length - len(entity)
            test.append(make_sentence(rng, f"test-{idx}-{j}", entity, etype, filler))
        idx += 1

    # distractor pages so retrieval is not trivially exact
    kb_records.extend(synthetic_kb(60, seed=seed + 1))
    return Benchmark(train, test, kb_records, gazetteer, title_types)


def write_kb_jsonl(path, records: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
