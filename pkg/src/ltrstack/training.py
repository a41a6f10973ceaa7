"""Booked/not-booked pairs, their losses, and the loop that fits any ranker variant.

Training walks impressions in a seeded shuffled order and takes one
optimizer step per impression, summing the losses of that impression's
(booked, not-booked) pairs.  All-pairwise variants train everything except
the first-stage ranker, which stays frozen.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import rankers as rk
from .errors import ConfigurationError, DivergenceError, NumericError, TrainingError, ValidationError
from .market import Impression, Listing, Query
from .nn import OptimizerState, optimizer_step, sigmoid, softplus

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 8
    learning_rate: float | None = None  # None: per-variant default
    optimizer: str = "adam"
    shuffle_seed: int = 0
    pairs_per_impression: int | str = "all"
    trip_quality_weighting: bool = False
    alpha: float = 0.5
    max_steps: int | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigurationError("epochs must be at least 1")
        if self.pairs_per_impression != "all" and int(self.pairs_per_impression) < 1:
            raise ConfigurationError("pairs_per_impression must be 'all' or a positive integer")
        if self.alpha < 0:
            raise ConfigurationError("alpha must be non-negative")
        if self.learning_rate is not None and not self.learning_rate > 0:
            raise ConfigurationError("learning_rate must be positive")


# Interaction models overfit the step size tuned for the univariate scorer.
DEFAULT_LEARNING_RATES = {rk.PAIRWISE: 2e-3}
CONTEXT_LEARNING_RATE = 5e-4


def default_learning_rate(variant: str) -> float:
    return DEFAULT_LEARNING_RATES.get(variant, CONTEXT_LEARNING_RATE)


@dataclass
class TrainingPair:
    impression: Impression
    impression_index: int
    booked_index: int
    not_booked_index: int

    @property
    def booked(self) -> Listing:
        return self.impression.candidates[self.booked_index]

    @property
    def not_booked(self) -> Listing:
        return self.impression.candidates[self.not_booked_index]

    @property
    def query(self) -> Query:
        return self.impression.query

    @property
    def context(self) -> list[Listing]:
        return self.impression.candidates

    @property
    def trip_rating(self) -> int:
        return self.impression.trip_rating


def extract_pairs(log_: Sequence[Impression], cfg: TrainConfig) -> list[TrainingPair]:
    """Pair each booked listing with all (or a seeded sample of) its not-booked peers."""
    pairs = []
    skipped = 0
    for idx, imp in enumerate(log_):
        n = imp.size
        if n < 2:
            skipped += 1
            continue
        others = [j for j in range(n) if j != imp.booked_index]
        if cfg.pairs_per_impression != "all" and int(cfg.pairs_per_impression) < len(others):
            rng = np.random.default_rng(np.random.SeedSequence([int(cfg.shuffle_seed), idx]))
            others = sorted(rng.choice(others, size=int(cfg.pairs_per_impression), replace=False).tolist())
        pairs.extend(TrainingPair(imp, idx, imp.booked_index, j) for j in others)
    if skipped:
        log.info("skipped %d single-candidate impressions", skipped)
    return pairs


# --- losses ----------------------------------------------------------------------


def _finite(*xs) -> None:
    for x in xs:
        if not math.isfinite(x):
            raise NumericError("non-finite logit")


def pairwise_loss(f_booked_logit: float, f_not_booked_logit: float) -> float:
    """``-log(sigmoid(f_b - f_nb))`` evaluated as ``softplus(f_nb - f_b)``."""
    _finite(f_booked_logit, f_not_booked_logit)
    return softplus(-(f_booked_logit - f_not_booked_logit))


def true_pairwise_loss(g_fwd: float, g_rev: float) -> float:
    """Symmetric cross-entropy ``-log(sigmoid(g_fwd)) - log(1 - sigmoid(g_rev))``."""
    _finite(g_fwd, g_rev)
    return softplus(-g_fwd) + softplus(g_rev)


def trip_quality_weight(trip_rating: int, alpha: float = 0.5) -> float:
    """Extra weight for a booking: ``alpha * (rating - 3) / 2``, floored at 0."""
    if int(trip_rating) != trip_rating or not 1 <= trip_rating <= 5:
        raise ValidationError(f"trip rating must be an integer in 1..5, got {trip_rating!r}")
    return max(0.0, alpha * (trip_rating - 3) / 2.0)


def total_weight(trip_rating: int, alpha: float = 0.5) -> float:
    return 1.0 + trip_quality_weight(trip_rating, alpha)


def weighted_loss(base_loss: float, omega_total: float) -> float:
    if omega_total < 1.0:
        raise ValidationError(f"total weight must be >= 1, got {omega_total}")
    return base_loss * omega_total


# --- per-impression loss and gradient -------------------------------------------------


def _pair_terms(diff: np.ndarray, weight: float):
    """Loss and d loss / d diff for ``sum softplus(-diff)`` scaled by ``weight``."""
    loss = weight * float(softplus(-diff).sum())
    return loss, -weight * sigmoid(-diff)


def impression_loss_and_grads(ranker: rk.Ranker, imp: Impression, others: Sequence[int],
                              weight: float = 1.0, base_logits=None, need_grads: bool = True):
    """Summed pair loss of one impression and its gradients in ``ranker.parameters()`` order."""
    x = imp.inputs()
    b = imp.booked_index
    js = np.asarray(others, dtype=np.intp)
    n = x.shape[0]
    if isinstance(ranker, rk.PairwiseRanker):
        acts = ranker.f.activations(x)
        s = acts[-1][:, 0]
        loss, dd = _pair_terms(s[b] - s[js], weight)
        if not need_grads:
            return loss, None
        ds = np.zeros(n)
        ds[b] = dd.sum()
        ds[js] -= dd
        return loss, ranker.f.backward_from(acts, ds[:, None])[0].arrays()
    if isinstance(ranker, rk.TruePairwiseRanker):
        m = js.size
        a_idx = np.concatenate([np.full(m, b), js])
        b_idx = np.concatenate([js, np.full(m, b)])
        acts = ranker.h.activations(ranker.pair_rows(x, a_idx, b_idx))
        hv = acts[-1][:, 0]
        g_fwd = hv[:m] - hv[m:]
        g_rev = hv[m:] - hv[:m]
        loss = weight * float((softplus(-g_fwd) + softplus(g_rev)).sum())
        if not need_grads:
            return loss, None
        d_fwd = -weight * sigmoid(-g_fwd)
        d_rev = weight * sigmoid(g_rev)
        dh = np.concatenate([d_fwd - d_rev, d_rev - d_fwd])
        return loss, ranker.h.backward_from(acts, dh[:, None])[0].arrays()
    if isinstance(ranker, (rk.AllPairwiseRanker, rk.AttentionRanker)):
        logits, cache = ranker.forward(x, base_logits)
        loss, dd = _pair_terms(logits[b] - logits[js], weight)
        if not need_grads:
            return loss, None
        if cache is None:
            return loss, [np.zeros_like(p) for p in ranker.parameters()]
        dl = np.zeros(n)
        dl[b] = dd.sum()
        dl[js] -= dd
        return loss, ranker.backward(cache, dl)
    raise TrainingError(f"cannot train {type(ranker).__name__}")


# --- loop --------------------------------------------------------------------------


@dataclass
class EpochStats:
    epoch: int
    mean_loss: float
    pair_count: int


@dataclass
class TrainResult:
    ranker: rk.Ranker
    trace: list[EpochStats] = field(default_factory=list)
    steps: int = 0


def group_pairs(pairs: Sequence[TrainingPair]) -> list[tuple[Impression, list[int]]]:
    groups: dict[int, tuple[Impression, list[int]]] = {}
    for p in pairs:
        groups.setdefault(p.impression_index, (p.impression, []))[1].append(p.not_booked_index)
    return [groups[k] for k in sorted(groups)]


def fit(ranker: rk.Ranker, log_: Sequence[Impression], cfg: TrainConfig) -> TrainResult:
    """Train ``ranker`` in place on the pairs of ``log_``."""
    pairs = extract_pairs(log_, cfg)
    if not pairs:
        raise TrainingError("no training pairs")
    groups = group_pairs(pairs)
    weights = [total_weight(imp.trip_rating, cfg.alpha) if cfg.trip_quality_weighting else 1.0
               for imp, _ in groups]
    base_cache = None
    if isinstance(ranker, (rk.AllPairwiseRanker, rk.AttentionRanker)):
        base_cache = [ranker.base.logits(imp.inputs()) for imp, _ in groups]
    params = ranker.parameters()
    lr = cfg.learning_rate if cfg.learning_rate is not None else default_learning_rate(ranker.variant)
    state = OptimizerState(cfg.optimizer, lr)
    result = TrainResult(ranker)
    step = 0
    for epoch in range(cfg.epochs):
        order = np.random.default_rng(np.random.SeedSequence([int(cfg.shuffle_seed), epoch])).permutation(len(groups))
        total, count = 0.0, 0
        for gi in order:
            if cfg.max_steps is not None and step >= cfg.max_steps:
                break
            imp, others = groups[gi]
            base = None if base_cache is None else base_cache[gi]
            loss, grads = impression_loss_and_grads(ranker, imp, others, weights[gi], base)
            if not math.isfinite(loss):
                raise DivergenceError(step, loss)
            optimizer_step(params, grads, state)
            total += loss
            count += len(others)
            step += 1
        if count:
            result.trace.append(EpochStats(epoch, total / count, count))
    result.steps = step
    return result


def train_variant(variant: str, log_: Sequence[Impression], cfg: TrainConfig, size: rk.ModelSize | None = None,
                  init_seed: int = 0, base: rk.PairwiseRanker | None = None, residual: bool = True) -> TrainResult:
    """Build and train one ranker variant.

    All-pairwise variants need a trained first stage; when ``base`` is not
    given a pairwise ranker is trained first with the same seeds.
    """
    if not log_:
        raise TrainingError("empty training log")
    f_width = log_[0].candidates[0].features.size
    q_width = log_[0].query.query_features.size
    if variant in (rk.ALL_PAIRWISE_APFN, rk.ALL_PAIRWISE_ATTN) and base is None:
        base = train_variant(rk.PAIRWISE, log_, cfg, size, init_seed).ranker
    ranker = rk.make_ranker(variant, f_width, q_width, size, init_seed, base=base, residual=residual)
    return fit(ranker, log_, cfg)


def write_loss_trace(trace: Sequence[EpochStats], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "mean_loss", "pair_count"])
        for e in trace:
            w.writerow([e.epoch, repr(e.mean_loss), e.pair_count])
