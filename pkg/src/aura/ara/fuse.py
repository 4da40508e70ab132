"""Reciprocal rank fusion across retrieval methods.

Each document contributes 1/(k + rank) per method that retrieved it; methods
that did not retrieve a document contribute nothing (equivalent to infinite
rank). k = 60 keeps top-ranked documents from dominating.
"""

from __future__ import annotations

from dataclasses import dataclass, field

DEFAULT_K = 60


@dataclass(frozen=True)
class RetrievalResult:
    chunk_id: str
    per_method_rank: dict = field(default_factory=dict)  # method -> 1-based rank
    rrf_score: float = 0.0


def rrf_fuse(rankings: dict[str, list[str]], k: int = DEFAULT_K) -> list[RetrievalResult]:
    """Fuse duplicate-free per-method rankings into a single ranked list.

    Sorted by descending fused score, ties broken by chunk id.
    """
    ranks: dict[str, dict[str, int]] = {}
    for method, ranked in rankings.items():
        if len(set(ranked)) != len(ranked):
            raise ValueError(f"ranking for {method!r} contains duplicates")
        for position, chunk_id in enumerate(ranked, start=1):
            ranks.setdefault(chunk_id, {})[method] = position
    results = [
        RetrievalResult(
            chunk_id=chunk_id,
            per_method_rank=method_ranks,
            rrf_score=sum(1.0 / (k + r) for r in method_ranks.values()),
        )
        for chunk_id, method_ranks in ranks.items()
    ]
    results.sort(key=lambda r: (-r.rrf_score, r.chunk_id))
    return results
