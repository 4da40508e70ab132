"""Knowledge base: sparse (BM25), dense (hashed n-gram embeddings), and
metadata indexes over one chunk set, plus single-file persistence.

Dense vectors use deterministic feature hashing of token unigrams/bigrams
into 256 dimensions with cosine similarity and exact search; at desk scale
this is fast and makes retrieval fully reproducible.
"""

from __future__ import annotations

import math
import pickle
import zlib
from collections import Counter
from dataclasses import dataclass

import numpy as np

from aura.ara.chunking import Chunk
from aura.ara.fuse import RetrievalResult, rrf_fuse
from aura.ara.tokenizer import tokenize

MAGIC = b"ARAKB"
FORMAT_VERSION = 1

EMBED_DIM = 256
BM25_K1 = 1.2
BM25_B = 0.75
TOP_N = 50


class EmptyKnowledgeBase(Exception):
    pass


class PersistError(Exception):
    pass


def _hash(term: str) -> int:
    return zlib.crc32(term.encode("utf-8"))


def embed(tokens: list[str]) -> np.ndarray:
    """Signed feature hashing of unigrams and bigrams, L2-normalized."""
    vec = np.zeros(EMBED_DIM)
    grams = list(tokens) + [f"{a} {b}" for a, b in zip(tokens, tokens[1:])]
    for g in grams:
        h = _hash(g)
        sign = 1.0 if (h >> 16) & 1 else -1.0
        vec[h % EMBED_DIM] += sign
    norm = np.linalg.norm(vec)
    return vec / norm if norm > 0 else vec


@dataclass
class _Bm25Index:
    doc_freq: Counter
    term_freqs: list[Counter]
    doc_lens: list[int]
    avg_len: float

    @classmethod
    def build(cls, token_lists: list[list[str]]) -> "_Bm25Index":
        doc_freq: Counter = Counter()
        term_freqs = []
        for tokens in token_lists:
            tf = Counter(tokens)
            term_freqs.append(tf)
            doc_freq.update(tf.keys())
        lens = [len(t) for t in token_lists]
        return cls(doc_freq, term_freqs, lens, sum(lens) / max(len(lens), 1))

    def score(self, query_tokens: list[str], doc_idx: int) -> float:
        n = len(self.term_freqs)
        tf = self.term_freqs[doc_idx]
        dl = self.doc_lens[doc_idx]
        score = 0.0
        for term in query_tokens:
            if term not in tf:
                continue
            df = self.doc_freq[term]
            idf = math.log(1.0 + (n - df + 0.5) / (df + 0.5))
            f = tf[term]
            score += idf * f * (BM25_K1 + 1) / (
                f + BM25_K1 * (1 - BM25_B + BM25_B * dl / self.avg_len)
            )
        return score


class KnowledgeBase:
    """Immutable after build; concurrent queries are safe. Rebuilds produce a
    new instance."""

    def __init__(self, chunks: list[Chunk]):
        self.chunks = list(chunks)
        self._token_lists = [tokenize(c.text) for c in self.chunks]
        self._bm25 = _Bm25Index.build(self._token_lists)
        self._dense = (
            np.vstack([embed(t) for t in self._token_lists])
            if self.chunks
            else np.zeros((0, EMBED_DIM))
        )
        # metadata inverted index: (field, value) -> chunk indices
        self._meta: dict[tuple[str, str], list[int]] = {}
        for i, c in enumerate(self.chunks):
            for fld, value in c.metadata.items():
                for v in value if isinstance(value, (list, tuple)) else [value]:
                    self._meta.setdefault((fld, str(v)), []).append(i)

    def __len__(self) -> int:
        return len(self.chunks)

    def chunk_by_id(self, chunk_id: str) -> Chunk:
        for c in self.chunks:
            if c.chunk_id == chunk_id:
                return c
        raise KeyError(chunk_id)

    def sparse_ranking(self, query: str, allowed: set[int], n: int = TOP_N) -> list[str]:
        q = tokenize(query)
        scored = [
            (self._bm25.score(q, i), self.chunks[i].chunk_id)
            for i in allowed
        ]
        scored = [(s, cid) for s, cid in scored if s > 0]
        scored.sort(key=lambda t: (-t[0], t[1]))
        return [cid for _, cid in scored[:n]]

    def dense_ranking(self, query: str, allowed: set[int], n: int = TOP_N) -> list[str]:
        qv = embed(tokenize(query))
        scored = [
            (float(self._dense[i] @ qv), self.chunks[i].chunk_id) for i in allowed
        ]
        scored = [(s, cid) for s, cid in scored if s > 0]
        scored.sort(key=lambda t: (-t[0], t[1]))
        return [cid for _, cid in scored[:n]]

    def metadata_ranking(self, metadata: dict, allowed: set[int], n: int = TOP_N) -> list[str]:
        """Rank by number of matching metadata fields, descending."""
        matches: Counter = Counter()
        for fld, value in metadata.items():
            for v in value if isinstance(value, (list, tuple)) else [value]:
                for i in self._meta.get((fld, str(v)), []):
                    if i in allowed:
                        matches[i] += 1
        scored = sorted(
            ((cnt, self.chunks[i].chunk_id) for i, cnt in matches.items()),
            key=lambda t: (-t[0], t[1]),
        )
        return [cid for _, cid in scored[:n]]

    # --- persistence --------------------------------------------------------

    def save(self, path) -> None:
        payload = pickle.dumps(self.chunks, protocol=4)
        with open(path, "wb") as f:
            f.write(MAGIC)
            f.write(bytes([FORMAT_VERSION]))
            f.write(payload)

    @classmethod
    def load(cls, path) -> "KnowledgeBase":
        with open(path, "rb") as f:
            blob = f.read()
        if blob[: len(MAGIC)] != MAGIC:
            raise PersistError("bad magic header")
        version = blob[len(MAGIC)]
        if version != FORMAT_VERSION:
            raise PersistError(f"unsupported format version {version}")
        return cls(pickle.loads(blob[len(MAGIC) + 1:]))


def retrieve(
    query: str,
    filters,
    kb: KnowledgeBase,
    metadata: dict | None = None,
    n: int = TOP_N,
) -> list[RetrievalResult]:
    """Dense + sparse + metadata retrieval fused with RRF.

    ``filters`` is a predicate over chunk metadata (or None); ``metadata``
    holds the query-side structured fields used by the metadata signal.
    """
    if len(kb) == 0:
        raise EmptyKnowledgeBase("knowledge base has no chunks")
    allowed = {
        i
        for i, c in enumerate(kb.chunks)
        if filters is None or filters(c.metadata)
    }
    if not allowed:
        return []
    rankings = {
        "dense": kb.dense_ranking(query, allowed, n),
        "sparse": kb.sparse_ranking(query, allowed, n),
    }
    if metadata:
        rankings["metadata"] = kb.metadata_ranking(metadata, allowed, n)
    rankings = {m: r for m, r in rankings.items() if r}
    return rrf_fuse(rankings)
