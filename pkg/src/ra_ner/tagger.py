"""Pluggable taggers for the iteration loop.

Three implementations of the tagger contract (tag a batch of augmented
examples into full-length label sequences):

* a hashed-feature linear softmax classifier trained with per-token
  cross-entropy SGD,
* a longest-match gazetteer that can also pick up typed entries from the
  retrieved context markup ("context-match" behavior),
* a client for external taggers speaking the wire protocol.

All taggers return one label per full token and emit BIO-valid sequences.
"""

from __future__ import annotations

import hashlib
import re
import struct
from dataclasses import dataclass
from typing import Iterable, Protocol, Sequence

import numpy as np

from .augment import AugmentedExample
from .labels import (
    CLASS_INDEX,
    CLASS_ORDER,
    NUM_CLASSES,
    B,
    I,
    Label,
    O,
    X,
    repair_bio,
)
from .retrieval import _WRAP_RE
from .wire import Endpoint, WireError

MODEL_MAGIC = b"RANERLIN1"


class Tagger(Protocol):
    def tag(self, batch: Sequence[AugmentedExample]) -> list[tuple[Label, ...]]: ...


# ---------------------------------------------------------------------------
# Softmax cross-entropy


def loss_and_grad(logits: np.ndarray, gold: int) -> tuple[float, np.ndarray]:
    """Cross-entropy of softmax(logits) against a one-hot gold class.

    loss = -log softmax(logits)[gold], computed with max-subtraction;
    grad wrt logits = softmax(logits) - onehot(gold).
    """
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise ValueError("non-finite logits")
    if not (0 <= gold < logits.shape[0]):
        raise ValueError(f"gold index {gold} out of range for {logits.shape[0]} classes")
    shifted = logits - logits.max()
    exp = np.exp(shifted)
    probs = exp / exp.sum()
    loss = float(np.log(exp.sum()) - shifted[gold])
    grad = probs.copy()
    grad[gold] -= 1.0
    return loss, grad


# ---------------------------------------------------------------------------
# Context markup inspection (shared by the linear features and the gazetteer)

_TITLE_RE = re.compile(r"\[([^\[\]]+)\]")


def context_markup(aug_tokens: Sequence[str]) -> tuple[list[tuple[str, str]], list[str]]:
    """Extract (target_title, surface) hyperlink pairs and [title] strings
    from the augmented-region text."""
    text = " ".join(aug_tokens)
    links = [(m.group("target").strip(), m.group("surface").strip()) for m in _WRAP_RE.finditer(text)]
    titles = [m.group(1).strip() for m in _TITLE_RE.finditer(_WRAP_RE.sub(" ", text))]
    return links, titles


# ---------------------------------------------------------------------------
# Hashed-feature linear model


def hash_feature(feature: str, seed: int, dim: int) -> int:
    digest = hashlib.blake2b(
        feature.encode("utf-8"), digest_size=8, key=seed.to_bytes(8, "little")
    ).digest()
    return int.from_bytes(digest, "little") % dim


def _ascii_lower(s: str) -> str:
    return s.translate(_LOWER)


_LOWER = {ord(c): ord(c.lower()) for c in "ABCDEFGHIJKLMNOPQRSTUVWXYZ"}


def featurize(aug: AugmentedExample, seed: int, dim: int) -> list[list[int]]:
    """Per-token active hashed feature ids over the full token sequence."""
    tokens = aug.full_tokens
    links, titles = context_markup(aug.aug_tokens)
    entity_words = {w for _, surface in links for w in surface.split()}
    entity_words |= {w for target, _ in links for w in target.split()}
    title_words = {w for t in titles for w in t.split()}
    features: list[list[int]] = []
    n = len(tokens)
    for i in range(n):
        tok = tokens[i]
        active = [f"w={tok}", f"lw={_ascii_lower(tok)}"]
        for off in (-2, -1, 1, 2):
            j = i + off
            ctx = tokens[j] if 0 <= j < n else "<pad>"
            active.append(f"w[{off}]={ctx}")
        if i < aug.base_len:
            if tok in entity_words:
                active.append("in_ctx_entity")
            if tok in title_words:
                active.append("in_ctx_title")
        features.append([hash_feature(f, seed, dim) for f in active])
    return features


@dataclass
class LinearModel:
    weights: np.ndarray  # float64[dim, NUM_CLASSES]
    dim: int
    seed: int

    def logits(self, feature_ids: Sequence[int]) -> np.ndarray:
        return self.weights[list(feature_ids)].sum(axis=0)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    learning_rate: float = 0.1
    dim: int = 1 << 20
    seed: int = 0


def train_linear(train: Sequence[AugmentedExample], cfg: TrainConfig) -> LinearModel:
    """Plain SGD over per-token cross-entropy. Deterministic for a fixed seed."""
    if not train:
        raise ValueError("empty training set")
    model = LinearModel(np.zeros((cfg.dim, NUM_CLASSES)), cfg.dim, cfg.seed)
    feats = [featurize(aug, cfg.seed, cfg.dim) for aug in train]
    golds = [[CLASS_INDEX[lab] for lab in aug.full_labels] for aug in train]
    rng = np.random.default_rng(cfg.seed)
    order = np.arange(len(train))
    for _ in range(cfg.epochs):
        rng.shuffle(order)
        for idx in order:
            for token_feats, gold in zip(feats[idx], golds[idx]):
                logits = model.logits(token_feats)
                _, grad = loss_and_grad(logits, gold)
                update = cfg.learning_rate * grad
                for fid in token_feats:
                    model.weights[fid] -= update
    return model


def predict_linear(model: LinearModel, aug: AugmentedExample) -> tuple[Label, ...]:
    """Argmax over the 14 logits per token (lowest class index wins ties),
    then BIO repair."""
    labels = []
    for token_feats in featurize(aug, model.seed, model.dim):
        cls = int(np.argmax(model.logits(token_feats)))
        labels.append(CLASS_ORDER[cls])
    return repair_bio(labels)


def save_model(path, model: LinearModel) -> None:
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<QQI", model.dim, model.seed, NUM_CLASSES))
        for lab in CLASS_ORDER:
            tag = str(lab).encode("utf-8")
            fh.write(struct.pack("<I", len(tag)))
            fh.write(tag)
        fh.write(model.weights.astype("<f8").tobytes())


def load_model(path) -> LinearModel:
    with open(path, "rb") as fh:
        if fh.read(len(MODEL_MAGIC)) != MODEL_MAGIC:
            raise ValueError(f"{path}: not a linear model file")
        dim, seed, n_classes = struct.unpack("<QQI", fh.read(20))
        classes = []
        for _ in range(n_classes):
            (n,) = struct.unpack("<I", fh.read(4))
            classes.append(fh.read(n).decode("utf-8"))
        if tuple(classes) != tuple(str(lab) for lab in CLASS_ORDER):
            raise ValueError(f"{path}: class order mismatch")
        weights = np.frombuffer(fh.read(dim * n_classes * 8), dtype="<f8").reshape(
            dim, n_classes
        ).copy()
        return LinearModel(weights, dim, seed)


class LinearTagger:
    def __init__(self, model: LinearModel):
        self.model = model

    def tag(self, batch: Sequence[AugmentedExample]) -> list[tuple[Label, ...]]:
        return [predict_linear(self.model, aug) for aug in batch]


# ---------------------------------------------------------------------------
# Gazetteer


class GazetteerTagger:
    """Longest-match-first, leftmost, non-overlapping surface matcher.

    `table` maps known entity surfaces to types. With `title_types` provided,
    markup in the augmented region contributes temporary typed entries
    (hyperlink targets/surfaces and bracketed page titles whose type is
    known from the KB) -- this is what lets retrieval help a pure matcher.
    Matches are emitted only for the base region; the augmented region is
    always labeled X.
    """

    def __init__(
        self,
        table: dict[str, str],
        title_types: dict[str, str] | None = None,
        use_context: bool = True,
    ):
        self.table = dict(table)
        self.title_types = dict(title_types or {})
        self.use_context = use_context

    def _effective_table(self, aug: AugmentedExample) -> dict[str, str]:
        effective: dict[str, str] = {}
        if self.use_context and self.title_types and aug.aug_tokens:
            links, titles = context_markup(aug.aug_tokens)
            for target, surface in links:
                etype = self.title_types.get(target)
                if etype:
                    effective[surface] = etype
                    effective[target] = etype
            for title in titles:
                etype = self.title_types.get(title)
                if etype:
                    effective[title] = etype
        effective.update(self.table)  # static entries win on conflicts
        return effective

    def tag_one(self, aug: AugmentedExample) -> tuple[Label, ...]:
        tokens = aug.base.tokens
        table = self._effective_table(aug)
        candidates = []  # (surface word tuple, type)
        for surface, etype in table.items():
            words = tuple(surface.split())
            if words:
                candidates.append((words, etype))
        matches = []  # (-width, start, words, type): longest first, then leftmost
        for words, etype in candidates:
            w = len(words)
            for start in range(0, len(tokens) - w + 1):
                if tuple(tokens[start : start + w]) == words:
                    matches.append((-w, start, words, etype))
        matches.sort()
        taken = [False] * len(tokens)
        base_labels: list[Label] = [O] * len(tokens)
        for neg_w, start, words, etype in matches:
            w = -neg_w
            if any(taken[start : start + w]):
                continue
            base_labels[start] = B(etype)
            for k in range(start + 1, start + w):
                base_labels[k] = I(etype)
                taken[k] = True
            taken[start] = True
        return tuple(base_labels) + (X,) * (1 + len(aug.aug_tokens))

    def tag(self, batch: Sequence[AugmentedExample]) -> list[tuple[Label, ...]]:
        return [self.tag_one(aug) for aug in batch]


def gazetteer_from_examples(examples: Iterable) -> dict[str, str]:
    """surface -> type table from gold-labeled examples (first type wins)."""
    from .labels import extract_spans

    table: dict[str, str] = {}
    for ex in examples:
        for span in extract_spans(ex.tokens, ex.labels):
            table.setdefault(span.surface, span.etype)
    return table


# ---------------------------------------------------------------------------
# Remote tagger


class RemoteTagger:
    """Client for an external tagger speaking the wire protocol."""

    def __init__(self, descriptor: str, timeout: float = 30.0):
        self.endpoint = Endpoint(descriptor, timeout=timeout)
        self.endpoint.ping()

    def tag(self, batch: Sequence[AugmentedExample]) -> list[tuple[Label, ...]]:
        by_id: dict[str, AugmentedExample] = {}
        for aug in batch:
            if aug.base.id in by_id:
                raise WireError(f"duplicate example id in batch: {aug.base.id}")
            by_id[aug.base.id] = aug
            self.endpoint.send(
                {"id": aug.base.id, "tokens": list(aug.full_tokens), "base_len": aug.base_len}
            )
        results: dict[str, tuple[Label, ...]] = {}
        for _ in batch:
            resp = self.endpoint.recv()
            ex_id = resp.get("id")
            if ex_id not in by_id:
                raise WireError(f"response for unknown example id: {resp!r}")
            if "error" in resp:
                raise WireError(f"example {ex_id}: remote error: {resp['error']}")
            labels = resp.get("labels")
            expected = len(by_id[ex_id].full_tokens)
            if not isinstance(labels, list) or len(labels) != expected:
                raise WireError(
                    f"example {ex_id}: expected {expected} labels, got "
                    f"{len(labels) if isinstance(labels, list) else labels!r}"
                )
            try:
                parsed = [Label.parse(tag) for tag in labels]
            except ValueError as exc:
                raise WireError(f"example {ex_id}: {exc}") from None
            results[ex_id] = repair_bio(parsed)
        return [results[aug.base.id] for aug in batch]

    def close(self) -> None:
        self.endpoint.close()
