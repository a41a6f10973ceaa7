"""Two-stage ranking: a cheap univariate pass over every candidate, then an
interaction-aware rerank of the head of the list.

Listings below the reranked head keep their first-stage order, so the
output is always a permutation of the input candidates.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import rankers as rk
from .aggregation import scores_to_ranking
from .errors import ConfigurationError, ShapeError, ValidationError
from .market import Listing, Query


@dataclass
class PipelineConfig:
    first_stage: rk.PairwiseRanker
    second_stage: rk.Ranker | None = None
    rerank_top_k: int = 60

    def __post_init__(self):
        if int(self.rerank_top_k) < 1:
            raise ConfigurationError("rerank_top_k must be at least 1")
        if not isinstance(self.first_stage, rk.PairwiseRanker):
            raise ConfigurationError("first stage must be a pairwise ranker")


@dataclass
class StageOneResult:
    ordering: np.ndarray  # indices into the candidate list, best first
    logits: np.ndarray  # per candidate, in input order


@dataclass
class RankResult:
    ordering: np.ndarray
    first_stage: StageOneResult
    top_k: int
    timing: dict = field(default_factory=dict)
    counter: rk.EvalCounter = field(default_factory=rk.EvalCounter)

    def ranked(self, candidates: list[Listing]) -> list[Listing]:
        return [candidates[i] for i in self.ordering]


def first_stage_rank(f: rk.PairwiseRanker, query: Query, candidates: list[Listing],
                     counter: rk.EvalCounter | None = None) -> StageOneResult:
    """Score each candidate once and sort by descending logit (stable)."""
    if not candidates:
        raise ShapeError("no candidates to rank")
    logits = f.logits(rk.listing_inputs(candidates, query), counter)
    return StageOneResult(scores_to_ranking(logits), logits)


def second_stage_rerank(ranker: rk.Ranker, query: Query, top_k_candidates: list[Listing],
                        retained_logits, counter: rk.EvalCounter | None = None) -> np.ndarray:
    """Reorder the head of the list; returns indices into ``top_k_candidates``.

    ``retained_logits`` are the first-stage logits of the same candidates in
    the same order.  All-pairwise rankers consume them as superiority inputs.
    """
    k = len(top_k_candidates)
    s = np.asarray(retained_logits, dtype=np.float64).ravel()
    if s.size != k:
        raise ValidationError(f"{s.size} retained logits for {k} candidates")
    if not np.all(np.isfinite(s)):
        raise ValidationError("retained logits must be finite")
    if k < 2:
        return np.arange(k)
    x = rk.listing_inputs(top_k_candidates, query)
    if isinstance(ranker, rk.PairwiseRanker):
        scores = ranker.logits(x, counter)
    elif isinstance(ranker, rk.TruePairwiseRanker):
        scores = ranker.scores(x, counter=counter)
    elif isinstance(ranker, (rk.AllPairwiseRanker, rk.AttentionRanker)):
        scores = ranker.scores(x, base_logits=s, counter=counter)
    else:
        raise ConfigurationError(f"unsupported second stage {type(ranker).__name__}")
    return scores_to_ranking(scores)


def rank(config: PipelineConfig, query: Query, candidates: list[Listing]) -> RankResult:
    """Full pipeline with a per-stage wall-time breakdown in seconds."""
    counter = rk.EvalCounter()
    t0 = time.perf_counter()
    stage1 = first_stage_rank(config.first_stage, query, candidates, counter)
    t1 = time.perf_counter()
    k = min(int(config.rerank_top_k), len(candidates))
    ordering = stage1.ordering
    if config.second_stage is not None and k >= 2:
        head = ordering[:k]
        local = second_stage_rerank(config.second_stage, query, [candidates[i] for i in head],
                                    stage1.logits[head], counter)
        ordering = np.concatenate([head[local], ordering[k:]])
    t2 = time.perf_counter()
    timing = {"first_stage_s": t1 - t0, "second_stage_s": t2 - t1, "total_s": t2 - t0}
    return RankResult(ordering, stage1, k, timing, counter)
