"""Hybrid retrieval: semantic chunking, dense + sparse + metadata indexes
fused with reciprocal rank fusion, dynamic context allocation, and
retrieval-quality metrics."""

from aura.ara.chunking import Chunk, Document, chunk_document
from aura.ara.context import allocate_context, base_k, estimate_complexity
from aura.ara.fuse import RetrievalResult, rrf_fuse
from aura.ara.index import EmptyKnowledgeBase, KnowledgeBase, retrieve
from aura.ara.metrics import MissingGold, retrieval_metrics
from aura.ara.tokenizer import tokenize

__all__ = [
    "Chunk",
    "Document",
    "chunk_document",
    "allocate_context",
    "base_k",
    "estimate_complexity",
    "RetrievalResult",
    "rrf_fuse",
    "KnowledgeBase",
    "EmptyKnowledgeBase",
    "retrieve",
    "retrieval_metrics",
    "MissingGold",
    "tokenize",
]
