"""Metrics for ranking quality and for how a ranking behaves beyond accuracy."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError


@dataclass
class RankedImpression:
    ordering: np.ndarray  # candidate indices, best first
    booked_index: int
    prices: np.ndarray | None = None

    def __post_init__(self):
        self.ordering = np.asarray(self.ordering, dtype=np.intp)
        n = self.ordering.size
        if sorted(self.ordering.tolist()) != list(range(n)):
            raise ValidationError("ordering is not a permutation of candidate indices")


def booked_position(ri: RankedImpression) -> int:
    """1-based rank of the booked listing."""
    hits = np.flatnonzero(ri.ordering == ri.booked_index)
    if hits.size != 1:
        raise ValidationError(f"booked index {ri.booked_index} not in ordering")
    return int(hits[0]) + 1


def ndcg(ri: RankedImpression, k: int | None = None) -> float:
    """Binary-relevance NDCG with one booked listing: ``1 / log2(1 + position)``.

    With ``k`` given, a booking ranked below ``k`` scores 0.
    """
    pos = booked_position(ri)
    if k is not None and pos > k:
        return 0.0
    return 1.0 / math.log2(1.0 + pos)


def mean_ndcg(items: Sequence[RankedImpression], k: int | None = None) -> float:
    if not items:
        raise ValidationError("no impressions to evaluate")
    return float(np.mean([ndcg(ri, k) for ri in items]))


def price_variance_diversity(ranked_prices: Sequence[float], page_size: int) -> float:
    """Population variance of the first ``page_size`` prices over that of all prices.

    ``ranked_prices`` lists the prices of every candidate in ranked order.
    Returns 0 when all prices are equal.
    """
    p = np.asarray(ranked_prices, dtype=np.float64)
    if page_size < 1:
        raise ValidationError("page_size must be positive")
    if page_size > p.size:
        raise ValidationError("page_size exceeds candidate count")
    total = p.var()
    if total == 0.0:
        return 0.0
    return float(p[:page_size].var() / total)


def count_flips(original_top_k: Sequence, jittered_top_k: Sequence, k: int,
                original_pool: Sequence | None = None, jittered_pool: Sequence | None = None) -> int:
    """Number of ids that entered the top ``k`` after the perturbation.

    When candidate pools are given, both orderings are first restricted to
    ids present in both pools, so a listing leaving the map cannot make
    another one "enter" the head; only reorderings count.
    """
    if k < 0:
        raise ValidationError("k must be non-negative")
    if k > len(original_top_k) or k > len(jittered_top_k):
        raise ValidationError("k exceeds list length")
    a, b = list(original_top_k), list(jittered_top_k)
    if original_pool is not None and jittered_pool is not None:
        common = set(original_pool) & set(jittered_pool)
        a = [x for x in a if x in common]
        b = [x for x in b if x in common]
    before = set(a[:k])
    return sum(1 for x in b[:k] if x not in before)
