"""Dense and lexical retrieval over corpus answers.

Dense search is brute-force exact cosine against unit vectors stored in
float32; BM25 is the classic Okapi scheme over the shared tokenizer.
Both rank with the same total order, (-score, doc_id ascending), so
top-k lists are prefixes of top-(k+1) lists.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Corpus
from .embedder import (
    CorruptFileError,
    EmbeddingModel,
    UnsupportedVersionError,
    embed,
    is_degenerate,
    model_fingerprint,
    tokenize,
)

_MAGIC = b"RTIX"
_VERSION = 1
# magic, version, emb_dim, n_docs, fingerprint hex, sha256 of the payload
_HEADER = struct.Struct("<4sIQQ64s32s")


class RetrieverError(Exception):
    """Base class for retrieval failures."""


class FingerprintMismatchError(RetrieverError):
    """The query-side model is not the model that built the index."""


class DegenerateQueryError(RetrieverError):
    """The query embeds to the zero vector; no ranking is possible."""


@dataclass(frozen=True)
class SearchHit:
    doc_id: str
    score: float


@dataclass(frozen=True)
class RankedList:
    hits: tuple[SearchHit, ...]
    query_id: str = ""
    degenerate: bool = False

    def doc_ids(self) -> list[str]:
        return [h.doc_id for h in self.hits]


@dataclass(frozen=True, eq=False)
class VectorIndex:
    """Unit answer embeddings plus the fingerprint of the model that made them."""

    doc_ids: tuple[str, ...]
    doc_texts: tuple[str, ...]
    vectors: np.ndarray  # float32, shape (n_docs, emb_dim), unit rows
    model_fingerprint: str

    def __len__(self) -> int:
        return len(self.doc_ids)

    def text_of(self, doc_id: str) -> str:
        return self.doc_texts[self.doc_ids.index(doc_id)]


def build_index(model: EmbeddingModel, corpus: Corpus) -> VectorIndex:
    """Embed every answer in corpus order.

    Vectors are quantized to float32 immediately so that a freshly built
    index and one loaded from disk score queries identically.
    """
    if len(corpus) == 0:
        raise RetrieverError("cannot index an empty corpus")
    vectors = np.empty((len(corpus), model.emb_dim), dtype=np.float32)
    for row, pair in enumerate(corpus):
        vec = embed(model, pair.answer)
        if is_degenerate(vec):
            raise RetrieverError(f"answer of pair {pair.id!r} embeds to the zero vector")
        vectors[row] = vec.astype(np.float32)
    return VectorIndex(
        doc_ids=tuple(p.id for p in corpus),
        doc_texts=tuple(p.answer for p in corpus),
        vectors=vectors,
        model_fingerprint=model_fingerprint(model),
    )


def _ranked(doc_ids: tuple[str, ...], scores: np.ndarray, k: int, keep_mask=None) -> RankedList:
    ids = np.asarray(doc_ids)
    if keep_mask is not None:
        ids = ids[keep_mask]
        scores = scores[keep_mask]
    if ids.size == 0:
        return RankedList(hits=())
    order = np.lexsort((ids, -scores))[: min(k, ids.size)]
    hits = tuple(SearchHit(doc_id=str(ids[i]), score=float(scores[i])) for i in order)
    return RankedList(hits=hits)


def search(index: VectorIndex, model: EmbeddingModel, query_text: str, k: int = 3) -> RankedList:
    """Exact top-k cosine search.

    Raises FingerprintMismatchError when model did not build the index.
    A query that embeds to the zero vector returns an empty RankedList
    with the degenerate flag set instead of raising.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if model_fingerprint(model) != index.model_fingerprint:
        raise FingerprintMismatchError(
            "index was built by a different model; rebuild the index or load the matching model"
        )
    qvec = embed(model, query_text)
    if is_degenerate(qvec):
        return RankedList(hits=(), degenerate=True)
    scores = index.vectors.astype(np.float64) @ qvec
    return _ranked(index.doc_ids, scores, k)


def save_index(index: VectorIndex, path: str | Path) -> Path:
    """Versioned binary index: header, doc table, then float32 vectors."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table = bytearray()
    for doc_id, text in zip(index.doc_ids, index.doc_texts):
        id_bytes = doc_id.encode("utf-8")
        text_bytes = text.encode("utf-8")
        table += struct.pack("<II", len(id_bytes), len(text_bytes))
        table += id_bytes
        table += text_bytes
    vectors = np.ascontiguousarray(index.vectors, dtype="<f4").tobytes()
    payload = bytes(table) + vectors
    header = _HEADER.pack(
        _MAGIC,
        _VERSION,
        index.vectors.shape[1],
        len(index.doc_ids),
        index.model_fingerprint.encode("ascii"),
        hashlib.sha256(payload).digest(),
    )
    with path.open("wb") as fh:
        fh.write(header)
        fh.write(payload)
    return path


def load_index(path: str | Path) -> VectorIndex:
    path = Path(path)
    with path.open("rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise CorruptFileError(f"{path}: file shorter than header")
    magic, version, emb_dim, n_docs, fingerprint, checksum = _HEADER.unpack_from(blob)
    if magic != _MAGIC:
        raise CorruptFileError(f"{path}: bad magic {magic!r}")
    if version != _VERSION:
        raise UnsupportedVersionError(f"{path}: format version {version}, supported: {_VERSION}")
    payload = blob[_HEADER.size:]
    if hashlib.sha256(payload).digest() != checksum:
        raise CorruptFileError(f"{path}: payload checksum mismatch")
    offset = 0
    doc_ids = []
    doc_texts = []
    try:
        for _ in range(n_docs):
            id_len, text_len = struct.unpack_from("<II", payload, offset)
            offset += 8
            doc_ids.append(payload[offset:offset + id_len].decode("utf-8"))
            offset += id_len
            doc_texts.append(payload[offset:offset + text_len].decode("utf-8"))
            offset += text_len
    except (struct.error, UnicodeDecodeError) as exc:
        raise CorruptFileError(f"{path}: doc table truncated or invalid") from exc
    expected = n_docs * emb_dim * 4
    if len(payload) - offset != expected:
        raise CorruptFileError(
            f"{path}: vector block is {len(payload) - offset} bytes, expected {expected}"
        )
    vectors = (
        np.frombuffer(payload, dtype="<f4", offset=offset)
        .reshape(n_docs, emb_dim)
        .astype(np.float32)
    )
    return VectorIndex(
        doc_ids=tuple(doc_ids),
        doc_texts=tuple(doc_texts),
        vectors=vectors,
        model_fingerprint=fingerprint.decode("ascii"),
    )


@dataclass(frozen=True, eq=False)
class Bm25Index:
    """Okapi BM25 statistics over tokenized answers."""

    doc_ids: tuple[str, ...]
    doc_lengths: np.ndarray
    avgdl: float
    postings: dict[str, list[tuple[int, int]]]  # term -> [(doc position, tf)]
    k1: float = 1.5
    b: float = 0.75

    def __len__(self) -> int:
        return len(self.doc_ids)


def bm25_build(corpus: Corpus, k1: float = 1.5, b: float = 0.75) -> Bm25Index:
    if len(corpus) == 0:
        raise RetrieverError("cannot index an empty corpus")
    if k1 < 0 or not 0.0 <= b <= 1.0:
        raise ValueError(f"require k1 >= 0 and 0 <= b <= 1, got k1={k1} b={b}")
    postings: dict[str, list[tuple[int, int]]] = {}
    lengths = np.zeros(len(corpus), dtype=np.float64)
    for pos, pair in enumerate(corpus):
        tokens = tokenize(pair.answer)
        lengths[pos] = len(tokens)
        counts: dict[str, int] = {}
        for tok in tokens:
            counts[tok] = counts.get(tok, 0) + 1
        for term in sorted(counts):
            postings.setdefault(term, []).append((pos, counts[term]))
    avgdl = float(lengths.mean()) if lengths.size else 0.0
    return Bm25Index(
        doc_ids=tuple(p.id for p in corpus),
        doc_lengths=lengths,
        avgdl=avgdl,
        postings=postings,
        k1=k1,
        b=b,
    )


def bm25_idf(index: Bm25Index, term: str) -> float:
    """idf(t) = ln((N - df + 0.5) / (df + 0.5) + 1); 0 for unseen terms would
    need df = 0, which still yields a positive value, so unseen terms are
    simply skipped by the scorer instead."""
    n = len(index.doc_ids)
    df = len(index.postings.get(term, ()))
    return float(np.log((n - df + 0.5) / (df + 0.5) + 1.0))


def bm25_search(index: Bm25Index, query_text: str, k: int = 3) -> RankedList:
    """Okapi scoring of unique query terms; zero-score docs are dropped.

    score(q, d) = sum over distinct terms t of q present in d of
    idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl)).
    Terms are visited in sorted order so accumulation is deterministic.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    terms = sorted(set(tokenize(query_text)))
    scores = np.zeros(len(index.doc_ids), dtype=np.float64)
    for term in terms:
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = bm25_idf(index, term)
        for pos, tf in plist:
            dl = index.doc_lengths[pos]
            denom = tf + index.k1 * (1.0 - index.b + index.b * dl / index.avgdl)
            scores[pos] += idf * tf * (index.k1 + 1.0) / denom
    keep = scores > 0.0
    return _ranked(index.doc_ids, scores, k, keep_mask=keep)
