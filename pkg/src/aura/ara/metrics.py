"""Retrieval-quality metrics: recall@5, precision@5, MRR, NDCG@10."""

from __future__ import annotations

import math


class MissingGold(Exception):
    pass


def retrieval_metrics(
    ranked_results: dict[str, list[str]],
    gold: dict[str, set[str]],
) -> dict[str, float]:
    """Standard definitions over per-query ranked chunk-id lists.

    ``gold`` maps query id to its set of relevant chunk ids; every query in
    ``ranked_results`` must have a (non-empty) gold set.
    """
    recall5 = precision5 = mrr = ndcg10 = 0.0
    n = len(ranked_results)
    if n == 0:
        return {"recall@5": 0.0, "precision@5": 0.0, "mrr": 0.0, "ndcg@10": 0.0}
    for qid, ranked in ranked_results.items():
        if qid not in gold or not gold[qid]:
            raise MissingGold(qid)
        relevant = gold[qid]
        top5 = ranked[:5]
        hits5 = sum(1 for c in top5 if c in relevant)
        recall5 += hits5 / min(len(relevant), 5)
        precision5 += hits5 / 5
        for rank, c in enumerate(ranked, start=1):
            if c in relevant:
                mrr += 1.0 / rank
                break
        dcg = sum(
            1.0 / math.log2(rank + 1)
            for rank, c in enumerate(ranked[:10], start=1)
            if c in relevant
        )
        ideal = sum(
            1.0 / math.log2(rank + 1)
            for rank in range(1, min(len(relevant), 10) + 1)
        )
        ndcg10 += dcg / ideal if ideal > 0 else 0.0
    return {
        "recall@5": recall5 / n,
        "precision@5": precision5 / n,
        "mrr": mrr / n,
        "ndcg@10": ndcg10 / n,
    }
