"""Ranking metrics, average-position curves and run reports."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionError, DomainError
from .survival import HazardModel, rerank, score_relevance

DEFAULT_KS = (1, 3, 5)


def dcg_at_k(ranked_labels, k: int) -> float:
    terms = [(2.0 ** int(y) - 1.0) / math.log2(i + 2) for i, y in enumerate(list(ranked_labels)[:k])]
    return math.fsum(terms)


def ndcg_at_k(ranked_labels, k: int) -> float:
    """NDCG@k with gain 2^y - 1 and log2(i + 1) discount; 1.0 if no gain is possible."""
    if k < 1:
        raise DomainError("k must be >= 1")
    labels = [int(y) for y in ranked_labels]
    ideal = dcg_at_k(sorted(labels, reverse=True), k)
    if ideal == 0.0:
        return 1.0
    return dcg_at_k(labels, k) / ideal


def average_precision(ranked_rels) -> float:
    """Mean precision at the relevant ranks; 1.0 when nothing is relevant."""
    precisions = []
    hits = 0
    for rank, rel in enumerate(ranked_rels, start=1):
        if rel:
            hits += 1
            precisions.append(hits / rank)
    if not precisions:
        return 1.0
    return math.fsum(precisions) / len(precisions)


@dataclass
class MetricReport:
    map: float
    ndcg_at: dict = field(default_factory=dict)
    n_queries: int = 0

    def rows(self, run: str):
        """``(run, metric, k, value)`` tuples: MAP first, then NDCG by k."""
        out = [(run, "map", "", self.map)]
        out += [(run, "ndcg", k, v) for k, v in sorted(self.ndcg_at.items())]
        return out


def format_metric_rows(rows) -> str:
    return "".join(f"{run},{metric},{k},{float(value)!r}\n" for run, metric, k, value in rows)


def position_curve(pairs: Sequence[tuple]) -> np.ndarray:
    """Mean re-ranked position (1-based) of the document shown at each original position.

    ``pairs`` holds ``(initial_order, reranked_order)`` document-id sequences.
    Lists of different lengths contribute to the positions they cover.
    """
    if not pairs:
        raise DomainError("no sessions")
    n = max(len(init) for init, _ in pairs)
    sums = np.zeros(n)
    counts = np.zeros(n)
    for init, new in pairs:
        if len(init) != len(new) or sorted(init) != sorted(new):
            raise DomainError("initial and re-ranked orders must cover the same documents")
        where = {doc: pos for pos, doc in enumerate(new, start=1)}
        for i, doc in enumerate(init):
            sums[i] += where[doc]
            counts[i] += 1
    return sums / counts


def curve_distance(a, b) -> float:
    """L1 distance between two position curves."""
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise DomainError("curves differ in length")
    return float(np.abs(a - b).sum())


Scorer = Callable[[object, list], np.ndarray]


def model_scorer(m: HazardModel) -> Scorer:
    return lambda q, order: score_relevance(m, q.features[order])


def label_scorer(q, order) -> np.ndarray:
    """Oracle: the true grades."""
    return q.labels[order].astype(np.float64)


def rerankings(scorer, queries, orders):
    """Re-ranked document order per query: ``order`` permuted by descending score."""
    out = []
    for q, order in zip(queries, orders):
        order = list(order)
        perm = rerank(scorer(q, order))
        out.append([order[i] for i in perm])
    return out


def evaluate_run(m, queries, orders, ks=DEFAULT_KS) -> MetricReport:
    """Score every query in its initial order, re-rank and macro-average metrics.

    ``m`` is a :class:`HazardModel` or a scorer ``(query, order) -> scores``.
    """
    if not queries:
        raise DomainError("no queries to evaluate")
    if isinstance(m, HazardModel):
        if queries[0].n_features != m.input_dim:
            raise DimensionError(f"model expects {m.input_dim} features, data has {queries[0].n_features}")
        scorer = model_scorer(m)
    else:
        scorer = m
    ranked = rerankings(scorer, queries, orders)
    aps = []
    ndcgs = {k: [] for k in ks}
    for q, new in zip(queries, ranked):
        labels = [int(q.labels[d]) for d in new]
        aps.append(average_precision([y >= 1 for y in labels]))
        for k in ks:
            ndcgs[k].append(ndcg_at_k(labels, k))
    # fsum: exact, hence independent of query order
    n = len(queries)
    return MetricReport(
        map=math.fsum(aps) / n,
        ndcg_at={k: math.fsum(v) / n for k, v in ndcgs.items()},
        n_queries=n,
    )

