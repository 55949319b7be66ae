"""Iterative entity retrieval loop.

Iteration 1 augments with sentence retrieval only (test-time entities are
unknown). Every later iteration also runs title-field entity retrieval with
the previous iteration's predicted spans, correct or not, and re-tags.
Iterations stop when the fraction of examples whose predictions changed
drops below epsilon, or at max_iters.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import kb, retrieval
from .augment import AugmentConfig, AugmentedExample, augment_example, strip_augmentation
from .evaluate import EvalReport, report
from .labels import EntitySpan, Example, Label, extract_spans, repair_bio
from .retrieval import RetrievalConfig, RetrievedContext
from .tagger import Tagger


@dataclass
class IterationRecord:
    predictions: dict[str, tuple[Label, ...]]  # example id -> base-region labels
    entities: dict[str, list[EntitySpan]]
    change_ratio: float
    eval_report: Optional[EvalReport] = None


@dataclass
class IterationTrace:
    iterations: list[IterationRecord] = field(default_factory=list)

    @property
    def final(self) -> IterationRecord:
        return self.iterations[-1]


def _build_context(
    example: Example,
    index: kb.Index,
    store: kb.DocumentStore,
    prev_entities: Optional[list[EntitySpan]],
    cfg: RetrievalConfig,
) -> RetrievedContext:
    sentence_ctx = retrieval.retrieve_by_sentence(example, index, store, cfg)
    if prev_entities is None:
        return retrieval.combine(sentence_ctx, retrieval.EMPTY_CONTEXT, cfg)
    entity_ctx = retrieval.retrieve_by_entities(prev_entities, index, store, cfg)
    return retrieval.combine(sentence_ctx, entity_ctx, cfg)


def run_iteration(
    dataset: Sequence[Example],
    index: kb.Index,
    store: kb.DocumentStore,
    tagger: Tagger,
    prev_entities: Optional[dict[str, list[EntitySpan]]],
    retr_cfg: RetrievalConfig,
    aug_cfg: AugmentConfig,
    workers: int = 1,
) -> tuple[dict[str, tuple[Label, ...]], dict[str, list[EntitySpan]]]:
    """One retrieve/augment/tag round.

    prev_entities=None means iteration 1 (sentence retrieval only).
    Returns per-example base-region predictions and the spans to feed forward.
    """

    def make_aug(example: Example) -> AugmentedExample:
        prev = prev_entities.get(example.id, []) if prev_entities is not None else None
        ctx = _build_context(example, index, store, prev, retr_cfg)
        return augment_example(example, ctx, aug_cfg)

    if workers > 1 and len(dataset) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            augs = list(pool.map(make_aug, dataset))
    else:
        augs = [make_aug(ex) for ex in dataset]

    try:
        full_predictions = tagger.tag(augs)
    except Exception as exc:
        raise RuntimeError(f"tagger failed on batch starting with example "
                           f"{dataset[0].id if dataset else '<empty>'}: {exc}") from exc

    predictions: dict[str, tuple[Label, ...]] = {}
    entities: dict[str, list[EntitySpan]] = {}
    for example, aug, full in zip(dataset, augs, full_predictions):
        if len(full) != len(aug.full_tokens):
            raise RuntimeError(
                f"tagger returned {len(full)} labels for example {example.id} "
                f"with {len(aug.full_tokens)} tokens"
            )
        base_labels = repair_bio(strip_augmentation(full, aug.base_len))
        predictions[example.id] = base_labels
        entities[example.id] = extract_spans(example.tokens, base_labels)
    return predictions, entities


def run_until_saturation(
    dataset: Sequence[Example],
    index: kb.Index,
    store: kb.DocumentStore,
    tagger: Tagger,
    retr_cfg: RetrievalConfig = RetrievalConfig(),
    aug_cfg: AugmentConfig = AugmentConfig(),
    max_iters: int = 4,
    epsilon: float = 0.001,
    gold: Optional[Sequence[Example]] = None,
    seed_entities: Optional[dict[str, list[EntitySpan]]] = None,
    workers: int = 1,
) -> IterationTrace:
    """Iterate run_iteration, feeding predicted entities forward.

    seed_entities, when given, plays the role of a previous no-RA run's
    predictions and is consumed by iteration 1's entity retrieval.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    trace = IterationTrace()
    prev_entities = seed_entities
    prev_predictions: Optional[dict[str, tuple[Label, ...]]] = None
    for _ in range(max_iters):
        predictions, entities = run_iteration(
            dataset, index, store, tagger, prev_entities, retr_cfg, aug_cfg, workers
        )
        if prev_predictions is None:
            change_ratio = 1.0 if dataset else 0.0
        elif dataset:
            changed = sum(
                1 for ex in dataset if predictions[ex.id] != prev_predictions[ex.id]
            )
            change_ratio = changed / len(dataset)
        else:
            change_ratio = 0.0
        rec = IterationRecord(predictions, entities, change_ratio)
        if gold is not None:
            pred_examples = [
                Example(ex.id, ex.tokens, predictions[ex.id]) for ex in dataset
            ]
            rec.eval_report = report(gold, pred_examples)
        trace.iterations.append(rec)
        if change_ratio < epsilon:
            break
        prev_entities = entities
        prev_predictions = predictions
    return trace


# ---------------------------------------------------------------------------
# Entity set serialization (iteration seeds and trace output)


def write_entities_jsonl(path, entities: dict[str, list[EntitySpan]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex_id, spans in entities.items():
            fh.write(
                json.dumps(
                    {
                        "example_id": ex_id,
                        "entities": [
                            {"start": s.start, "end": s.end, "type": s.etype, "surface": s.surface}
                            for s in spans
                        ],
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def seed_with_external_entities(
    dataset: Sequence[Example], path
) -> dict[str, list[EntitySpan]]:
    """Load externally produced entity sets keyed by example id.

    Examples absent from the file get empty sets; ids not in the dataset
    are an error.
    """
    known = {ex.id for ex in dataset}
    out: dict[str, list[EntitySpan]] = {ex.id: [] for ex in dataset}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            ex_id = obj["example_id"]
            if ex_id not in known:
                raise ValueError(f"{path}:{line_no}: unknown example id {ex_id!r}")
            out[ex_id] = [
                EntitySpan(e["start"], e["end"], e["type"], e["surface"])
                for e in obj.get("entities", [])
            ]
    return out
