"""Collapse true-pairwise logits into one score per listing.

A listing's row holds ``g(l_i, l_j)`` for every ``j != i`` in ascending ``j``
order.  Both aggregators sum in that canonical order so a score does not
depend on how the candidate list was ordered before canonicalisation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import NumericError, ShapeError

LSE_GUARD = 700.0


@dataclass
class PairLogitRow:
    listing_index: int
    logits_vs_others: np.ndarray

    def __post_init__(self):
        self.logits_vs_others = np.asarray(self.logits_vs_others, dtype=np.float64).ravel()


def _finite(values) -> None:
    if not np.all(np.isfinite(values)):
        raise NumericError("non-finite logit")


def gbt_score(row: PairLogitRow) -> float:
    """Generalized Bradley-Terry score ``1 / (1 + sum_j exp(-g_ij))``."""
    g = row.logits_vs_others
    _finite(g)
    neg = -g
    if neg.size and neg.max() > LSE_GUARD:
        m = float(neg.max())
        tot = math.exp(-m)
        for v in neg:
            tot += math.exp(v - m)
        return math.exp(-(m + math.log(tot)))
    tot = 0.0
    for v in neg:
        tot += math.exp(v)
    return 1.0 / (1.0 + tot)


def avg_score(row: PairLogitRow) -> float:
    g = row.logits_vs_others
    _finite(g)
    if g.size == 0:
        return 0.0
    tot = 0.0
    for v in g:
        tot += v
    return tot / g.size


def rows_from_matrix(g: np.ndarray) -> list[PairLogitRow]:
    n = g.shape[0]
    return [PairLogitRow(i, np.delete(g[i], i)) for i in range(n)]


def gbt_scores(g: np.ndarray) -> np.ndarray:
    """Row-wise :func:`gbt_score` over an ``N x N`` logit matrix (diagonal ignored)."""
    g = np.asarray(g, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ShapeError("logit matrix must be square")
    off = g[~np.eye(g.shape[0], dtype=bool)]
    _finite(off)
    return kernels.gbt_scores(np.ascontiguousarray(g))


def avg_scores(g: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ShapeError("logit matrix must be square")
    _finite(g[~np.eye(g.shape[0], dtype=bool)])
    return kernels.avg_scores(np.ascontiguousarray(g))


def scores_to_ranking(scores) -> np.ndarray:
    """Indices by descending score; ties keep ascending index order."""
    s = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(s)):
        raise NumericError("non-finite score")
    return np.argsort(-s, kind="stable")
