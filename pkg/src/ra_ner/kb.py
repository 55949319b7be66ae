"""Local wiki knowledge base: ingestion, field-scoped inverted index, BM25 search.

Documents carry three fields in the wiki-engine sense: title, sentence-segmented
paragraphs, and hyperlink annotations. Two inverted indexes are maintained, one
over individual sentences (the "sentence" field, scored at sentence level) and
one over titles (the "title" field). Scores are Okapi BM25 with the
nonnegative idf variant ln(1 + (N - df + 0.5)/(df + 0.5)).
"""

from __future__ import annotations

import io
import json
import math
import struct
import unicodedata
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, Iterator

import numpy as np

from .kernels import accumulate_bm25

INDEX_MAGIC = b"RANERIDX1"
FIELDS = ("sentence", "title")


class KBError(ValueError):
    pass


@dataclass(frozen=True)
class Hyperlink:
    surface: str
    target_title: str
    char_start: int
    char_end: int


@dataclass(frozen=True)
class Paragraph:
    sentences: tuple[str, ...]
    hyperlinks: tuple[Hyperlink, ...] = ()

    @property
    def text(self) -> str:
        return " ".join(self.sentences)


@dataclass(frozen=True)
class Document:
    doc_id: int
    title: str
    paragraphs: tuple[Paragraph, ...]


@dataclass
class DocumentStore:
    documents: list[Document] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.documents)

    def __getitem__(self, doc_id: int) -> Document:
        return self.documents[doc_id]


def _validate_paragraph(title: str, para: Paragraph) -> None:
    text = para.text
    prev_end = 0
    for link in sorted(para.hyperlinks, key=lambda l: l.char_start):
        if not (0 <= link.char_start < link.char_end <= len(text)):
            raise KBError(f"document {title!r}: hyperlink offsets out of range: {link}")
        if link.char_start < prev_end:
            raise KBError(f"document {title!r}: overlapping hyperlink ranges")
        if text[link.char_start : link.char_end] != link.surface:
            raise KBError(
                f"document {title!r}: hyperlink surface {link.surface!r} does not match "
                f"paragraph text at [{link.char_start}, {link.char_end})"
            )
        prev_end = link.char_end


def ingest(records: Iterable[dict]) -> DocumentStore:
    """Build a DocumentStore from KB records, assigning dense doc ids in order.

    Each record: {"title": str, "paragraphs": [{"sentences": [...],
    "links": [{"s": int, "e": int, "t": str}, ...]}, ...]}.
    """
    store = DocumentStore()
    for rec_no, rec in enumerate(records):
        try:
            title = rec["title"]
            raw_paragraphs = rec["paragraphs"]
            if not isinstance(title, str) or not title:
                raise KBError("title must be a non-empty string")
            paragraphs = []
            for raw in raw_paragraphs:
                sentences = tuple(raw["sentences"])
                if not all(isinstance(s, str) for s in sentences):
                    raise KBError("sentences must be strings")
                text = " ".join(sentences)
                links = tuple(
                    Hyperlink(text[l["s"] : l["e"]], l["t"], l["s"], l["e"])
                    for l in raw.get("links", ())
                )
                paragraphs.append(Paragraph(sentences, links))
        except (KeyError, TypeError) as exc:
            raise KBError(f"malformed KB record {rec_no}: {exc}") from None
        doc = Document(len(store.documents), title, tuple(paragraphs))
        for para in doc.paragraphs:
            _validate_paragraph(title, para)
        store.documents.append(doc)
    return store


def read_kb_jsonl(path) -> DocumentStore:
    def records() -> Iterator[dict]:
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    yield json.loads(line)
                except json.JSONDecodeError as exc:
                    raise KBError(f"{path}:{line_no}: invalid JSON: {exc}") from None

    return ingest(records())


# ---------------------------------------------------------------------------
# Analysis


def analyze(text: str) -> list[str]:
    """Tokenize for indexing and querying.

    Unicode-whitespace split, strip leading/trailing punctuation, fold ASCII
    case only (Hindi has no case); no stemming, no stopwords.
    """
    out = []
    for raw in text.split():
        start, end = 0, len(raw)
        while start < end and unicodedata.category(raw[start]).startswith("P"):
            start += 1
        while end > start and unicodedata.category(raw[end - 1]).startswith("P"):
            end -= 1
        tok = raw[start:end]
        if tok:
            out.append(tok.translate(_ASCII_LOWER))
    return out


_ASCII_LOWER = {ord(c): ord(c.lower()) for c in "ABCDEFGHIJKLMNOPQRSTUVWXYZ"}


# ---------------------------------------------------------------------------
# Index


@dataclass
class FieldIndex:
    """Inverted postings over one field's units (sentences, or titles)."""

    unit_doc_ids: np.ndarray  # int32[num_units]
    unit_field_ids: np.ndarray  # int32[num_units], sentence index within doc
    unit_para_idx: np.ndarray  # int32[num_units], containing paragraph
    unit_lengths: np.ndarray  # float64[num_units], token counts
    avgdl: float
    postings: dict[str, tuple[np.ndarray, np.ndarray]]  # term -> (unit_ids, tfs)

    @property
    def num_units(self) -> int:
        return len(self.unit_lengths)

    def df(self, term: str) -> int:
        entry = self.postings.get(term)
        return 0 if entry is None else len(entry[0])


@dataclass
class Index:
    fields: dict[str, FieldIndex]
    k1: float = 1.2
    b: float = 0.75


@dataclass(frozen=True)
class Hit:
    doc_id: int
    field_unit_id: int
    score: float
    paragraph_ref: tuple[int, int]  # (doc_id, paragraph index)
    field: str


def _field_units(store: DocumentStore, field_name: str) -> Iterator[tuple[int, int, int, str]]:
    """Yield (doc_id, field_unit_id, paragraph_idx, text) in deterministic order."""
    if field_name == "sentence":
        for doc in store.documents:
            unit = 0
            for p_idx, para in enumerate(doc.paragraphs):
                for sent in para.sentences:
                    yield doc.doc_id, unit, p_idx, sent
                    unit += 1
    elif field_name == "title":
        for doc in store.documents:
            yield doc.doc_id, 0, 0, doc.title
    else:
        raise KBError(f"unknown field: {field_name!r}")


def _build_field(store: DocumentStore, field_name: str) -> FieldIndex:
    doc_ids: list[int] = []
    field_ids: list[int] = []
    para_idx: list[int] = []
    lengths: list[int] = []
    term_postings: dict[str, list[tuple[int, int]]] = {}
    for doc_id, unit_id_in_doc, p_idx, text in _field_units(store, field_name):
        unit = len(lengths)
        terms = analyze(text)
        doc_ids.append(doc_id)
        field_ids.append(unit_id_in_doc)
        para_idx.append(p_idx)
        lengths.append(len(terms))
        counts: dict[str, int] = {}
        for t in terms:
            counts[t] = counts.get(t, 0) + 1
        for t, tf in counts.items():
            term_postings.setdefault(t, []).append((unit, tf))
    postings = {
        t: (
            np.array([u for u, _ in plist], dtype="<i4"),
            np.array([tf for _, tf in plist], dtype="<f8"),
        )
        for t, plist in sorted(term_postings.items())
    }
    length_arr = np.array(lengths, dtype="<f8")
    avgdl = float(length_arr.mean()) if len(length_arr) else 0.0
    return FieldIndex(
        unit_doc_ids=np.array(doc_ids, dtype="<i4"),
        unit_field_ids=np.array(field_ids, dtype="<i4"),
        unit_para_idx=np.array(para_idx, dtype="<i4"),
        unit_lengths=length_arr,
        avgdl=avgdl,
        postings=postings,
    )


def build_index(store: DocumentStore, k1: float = 1.2, b: float = 0.75) -> Index:
    """Index both fields. Deterministic: depends only on store contents."""
    if not store.documents:
        raise KBError("cannot index an empty document store")
    return Index({f: _build_field(store, f) for f in FIELDS}, k1=k1, b=b)


def idf(num_units: int, df: int) -> float:
    return math.log(1.0 + (num_units - df + 0.5) / (df + 0.5))


def search(index: Index, field_name: str, query: str, k: int) -> list[Hit]:
    """Top-k field units by BM25, ties broken by ascending (doc_id, unit).

    Each query token occurrence contributes once; zero-score units are
    never returned.
    """
    if k < 1:
        raise KBError(f"k must be positive, got {k}")
    fi = index.fields.get(field_name)
    if fi is None:
        raise KBError(f"unknown field: {field_name!r}")
    scores = np.zeros(fi.num_units, dtype="<f8")
    hit_any = False
    for term in analyze(query):
        entry = fi.postings.get(term)
        if entry is None:
            continue
        hit_any = True
        unit_ids, tfs = entry
        accumulate_bm25(
            scores, unit_ids, tfs, fi.unit_lengths, idf(fi.num_units, len(unit_ids)),
            index.k1, index.b, fi.avgdl,
        )
    if not hit_any:
        return []
    nz = np.nonzero(scores)[0]
    # lexsort: last key is primary; units are created in (doc_id, unit) order
    order = nz[np.lexsort((nz, -scores[nz]))][:k]
    return [
        Hit(
            doc_id=int(fi.unit_doc_ids[u]),
            field_unit_id=int(fi.unit_field_ids[u]),
            score=float(scores[u]),
            paragraph_ref=(int(fi.unit_doc_ids[u]), int(fi.unit_para_idx[u])),
            field=field_name,
        )
        for u in order
    ]


def get_paragraph(store: DocumentStore, hit: Hit) -> tuple[str, Paragraph]:
    """Paragraph containing a sentence hit, or the first paragraph for a title hit."""
    doc_id, para_idx = hit.paragraph_ref
    if not (0 <= doc_id < len(store.documents)):
        raise KBError(f"stale hit: doc_id {doc_id} not in store")
    doc = store.documents[doc_id]
    if not (0 <= para_idx < len(doc.paragraphs)):
        raise KBError(f"stale hit: paragraph {para_idx} not in document {doc.title!r}")
    return doc.title, doc.paragraphs[para_idx]


# ---------------------------------------------------------------------------
# Persistence: single self-contained file (store + both field indexes)


def _write_bytes(fh: BinaryIO, data: bytes) -> None:
    fh.write(struct.pack("<Q", len(data)))
    fh.write(data)


def _read_bytes(fh: BinaryIO) -> bytes:
    (n,) = struct.unpack("<Q", fh.read(8))
    return fh.read(n)


def _store_to_obj(store: DocumentStore) -> list:
    return [
        {
            "title": doc.title,
            "paragraphs": [
                {
                    "sentences": list(p.sentences),
                    "links": [
                        {"s": l.char_start, "e": l.char_end, "t": l.target_title}
                        for l in p.hyperlinks
                    ],
                }
                for p in doc.paragraphs
            ],
        }
        for doc in store.documents
    ]


def save_index(path, store: DocumentStore, index: Index) -> None:
    with open(path, "wb") as fh:
        fh.write(INDEX_MAGIC)
        fh.write(struct.pack("<dd", index.k1, index.b))
        blob = json.dumps(_store_to_obj(store), ensure_ascii=False, sort_keys=True)
        _write_bytes(fh, blob.encode("utf-8"))
        for field_name in FIELDS:
            fi = index.fields[field_name]
            fh.write(struct.pack("<I", fi.num_units))
            fh.write(fi.unit_doc_ids.astype("<i4").tobytes())
            fh.write(fi.unit_field_ids.astype("<i4").tobytes())
            fh.write(fi.unit_para_idx.astype("<i4").tobytes())
            fh.write(fi.unit_lengths.astype("<f8").tobytes())
            fh.write(struct.pack("<d", fi.avgdl))
            fh.write(struct.pack("<I", len(fi.postings)))
            for term in sorted(fi.postings):
                unit_ids, tfs = fi.postings[term]
                _write_bytes(fh, term.encode("utf-8"))
                fh.write(struct.pack("<I", len(unit_ids)))
                fh.write(unit_ids.astype("<i4").tobytes())
                fh.write(tfs.astype("<f8").tobytes())


def load_index(path) -> tuple[DocumentStore, Index]:
    with open(path, "rb") as fh:
        magic = fh.read(len(INDEX_MAGIC))
        if magic != INDEX_MAGIC:
            raise KBError(f"{path}: not an index file (bad magic {magic!r})")
        k1, b = struct.unpack("<dd", fh.read(16))
        store = ingest(json.loads(_read_bytes(fh).decode("utf-8")))
        fields = {}
        for field_name in FIELDS:
            (num_units,) = struct.unpack("<I", fh.read(4))
            unit_doc_ids = np.frombuffer(fh.read(4 * num_units), dtype="<i4")
            unit_field_ids = np.frombuffer(fh.read(4 * num_units), dtype="<i4")
            unit_para_idx = np.frombuffer(fh.read(4 * num_units), dtype="<i4")
            unit_lengths = np.frombuffer(fh.read(8 * num_units), dtype="<f8")
            (avgdl,) = struct.unpack("<d", fh.read(8))
            (num_terms,) = struct.unpack("<I", fh.read(4))
            postings = {}
            for _ in range(num_terms):
                term = _read_bytes(fh).decode("utf-8")
                (n,) = struct.unpack("<I", fh.read(4))
                unit_ids = np.frombuffer(fh.read(4 * n), dtype="<i4")
                tfs = np.frombuffer(fh.read(8 * n), dtype="<f8")
                postings[term] = (unit_ids, tfs)
            fields[field_name] = FieldIndex(
                unit_doc_ids=unit_doc_ids,
                unit_field_ids=unit_field_ids,
                unit_para_idx=unit_para_idx,
                unit_lengths=unit_lengths,
                avgdl=avgdl,
                postings=postings,
            )
        return store, Index(fields, k1=k1, b=b)
