"""Dynamic context allocation: take the top k results (k scaled by query
complexity) without ever exceeding the context budget."""

from __future__ import annotations

import re

from aura.ara.chunking import Chunk
from aura.ara.tokenizer import tokenize

MIN_K = 3
MAX_K = 10

_ERROR_CODE_RE = re.compile(r"\b[A-Z][A-Za-z]+(?:Error|Failure|Fault|Timeout|Conflict)\b")


def estimate_complexity(query: str, event_count: int = 0) -> float:
    """Affine complexity estimate in [0, 1] from query length, distinct error
    codes mentioned, and event-timeline length."""
    n_tokens = len(tokenize(query))
    n_codes = len(set(_ERROR_CODE_RE.findall(query)))
    raw = 0.01 * n_tokens + 0.15 * n_codes + 0.05 * event_count
    return min(raw, 1.0)


def base_k(complexity: float) -> int:
    return MIN_K + round(complexity * (MAX_K - MIN_K))


def allocate_context(
    query: str,
    results: list[Chunk],
    c_max: int,
    event_count: int = 0,
    k: int | None = None,
) -> list[Chunk]:
    """Greedily take up to k top chunks, stopping before exceeding c_max tokens."""
    if k is None:
        k = base_k(estimate_complexity(query, event_count))
    allocated = 0
    context: list[Chunk] = []
    for chunk in results[: min(k, len(results))]:
        if allocated + chunk.token_count > c_max:
            break
        context.append(chunk)
        allocated += chunk.token_count
    return context


def format_context(context: list[Chunk], query: str) -> str:
    parts = [f"[{c.chunk_id}] {c.text}" for c in context]
    return f"Query: {query}\n" + "\n---\n".join(parts)
