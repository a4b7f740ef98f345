"""Synthetic graded ranking data standing in for a LETOR collection."""

from __future__ import annotations

import numpy as np
from scipy.stats import norm

from .data import LabeledQuery
from .errors import DomainError

# fraction of documents at each grade 0..4, low grades dominate as in web data
GRADE_MIX = (0.45, 0.30, 0.15, 0.07, 0.03)


def make_dataset(
    n_queries: int = 1000,
    docs_per_query: int = 10,
    n_features: int = 20,
    y_max: int = 4,
    seed: int = 0,
    noise: float = 0.5,
    interaction: float = 1.0,
) -> list[LabeledQuery]:
    """Queries with graded labels driven by a latent utility.

    Each document has a latent standard normal vector ``v``; the observed
    features are ``Phi(v)`` in [0, 1], the usual normalisation of LETOR data.
    The utility is ``v . w + interaction * (v . u1)(v . u2)`` over orthonormal
    ``w, u1, u2`` plus Gaussian noise, so a linear ranker fit on a small sample
    recovers only part of it. Grades are the utility quantiles matching
    :data:`GRADE_MIX`, with the top grades merged when ``y_max < 4``.
    """
    if not 1 <= y_max <= len(GRADE_MIX) - 1:
        raise DomainError(f"y_max must be in 1..{len(GRADE_MIX) - 1}")
    if n_features < 3 or n_queries < 1 or docs_per_query < 1:
        raise DomainError("need n_features >= 3 and at least one query and document")
    rng = np.random.default_rng(seed)
    basis, _ = np.linalg.qr(rng.normal(size=(n_features, n_features)))
    w, u1, u2 = basis[:, 0], basis[:, 1], basis[:, 2]
    v = rng.normal(size=(n_queries, docs_per_query, n_features))
    clean = v @ w + interaction * (v @ u1) * (v @ u2)
    clean = (clean - clean.mean()) / clean.std()
    util = clean + noise * rng.normal(size=clean.shape)
    mix = np.array(GRADE_MIX[: y_max + 1], dtype=np.float64)
    mix[-1] += 1.0 - mix.sum()
    cuts = np.quantile(util, np.cumsum(mix)[:-1])
    x = norm.cdf(v)
    width = len(str(n_queries))
    return [
        LabeledQuery(f"q{k:0{width}d}", x[k], np.searchsorted(cuts, util[k]).astype(np.int64))
        for k in range(n_queries)
    ]
