"""Seeded offline experiments over the simulated marketplace.

Each experiment is a grid of independent cells (variant x seed x sweep
value).  Trained models are memoised per process, keyed by everything that
determines them, so experiments sharing data and seeds reuse each other's
models.  Reports are a CSV of per-cell records plus a JSON sidecar holding
an echo of the ExperimentSpec, per-group summaries and an environment stamp.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import platform
import threading
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__, kernels
from . import market as mk
from . import metrics as mt
from . import pipeline as pl
from . import rankers as rk
from . import training as tr
from .aggregation import scores_to_ranking
from .errors import ConfigurationError, LtrError, ValidationError

log = logging.getLogger(__name__)

EXPERIMENTS = ("param_scaling", "rerank_tradeoff", "diversity", "uncertainty", "ab_offline",
               "stability", "multi_objective")
THREADS_ENV = "LTRSTACK_THREADS"


@dataclass
class ExperimentSpec:
    """Everything one experiment run depends on.  Seeds are always explicit."""

    experiment: str
    data_seed: int = 0
    model_seeds: list[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    output_path: str | None = None
    variants: list[str] = field(default_factory=lambda: list(rk.VARIANTS))
    # data
    pool_size: int = 800
    train_impressions: int = 3000
    test_impressions: int = 2000
    candidates: int = 20
    # long candidate lists for the rerank sweeps
    rerank_impressions: int = 400
    rerank_candidates: int = 80
    rerank_query_width: list[float] = field(default_factory=lambda: [0.35, 0.5])
    # model and training
    hidden: list[int] = field(default_factory=lambda: [32, 32])
    feature_k: int = 16
    embed_e: int = 16
    epochs: int = 8
    learning_rate: float | None = None
    # sweeps
    hidden_sweep: list[list[int]] = field(default_factory=lambda: [[32, 32]])
    top_k_sweep: list[int] = field(default_factory=lambda: [1, 10, 20, 40, 60])
    second_stage: str = rk.ALL_PAIRWISE_APFN
    page_size: int = 10
    latency_repeats: int = 3
    # stability
    queries: int = 200
    jitters: int = 5
    jitter_magnitude: float = 0.01
    flip_k: int = 10
    stability_top_k: int = 60
    # multi-objective
    alpha: float = 0.5
    top_ratings: int = 3
    # offline A/B
    baseline: str = rk.PAIRWISE
    treatment: str = rk.ALL_PAIRWISE_APFN

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigurationError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        if not self.model_seeds:
            raise ConfigurationError("model_seeds must list at least one seed")
        for v in self.variants + [self.second_stage, self.baseline, self.treatment]:
            if v not in rk.VARIANTS:
                raise ConfigurationError(f"unknown variant {v!r}")
        if any(k < 1 for k in self.top_k_sweep):
            raise ConfigurationError("top_k_sweep entries must be positive")
        if self.page_size < 1 or self.flip_k < 1:
            raise ConfigurationError("page_size and flip_k must be positive")
        if self.jitter_magnitude < 0:
            raise ConfigurationError("jitter_magnitude must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ConfigurationError(f"unknown spec fields: {sorted(extra)}")
        if "experiment" not in data:
            raise ConfigurationError("spec needs an 'experiment' field")
        return cls(**data)

    @property
    def size(self) -> rk.ModelSize:
        return rk.ModelSize(tuple(self.hidden), self.feature_k, self.embed_e)

    def train_config(self, seed: int, weighting: bool = False) -> tr.TrainConfig:
        return tr.TrainConfig(epochs=self.epochs, learning_rate=self.learning_rate, shuffle_seed=seed,
                              trip_quality_weighting=weighting, alpha=self.alpha)


@dataclass
class Record:
    experiment: str
    variant: str
    seed: int
    sweep_param: str
    sweep_value: str
    metric: str
    value: float
    runtime_ms: float


RECORD_FIELDS = [f.name for f in fields(Record)]


@dataclass
class ExperimentReport:
    spec: ExperimentSpec
    records: list[Record]
    summary: dict
    environment: dict
    notes: list[str] = field(default_factory=list)

    def values(self, variant: str | None = None, metric: str | None = None,
               sweep_value: str | None = None) -> list[float]:
        return [r.value for r in self.records
                if (variant is None or r.variant == variant) and (metric is None or r.metric == metric)
                and (sweep_value is None or r.sweep_value == sweep_value)]

    def mean(self, variant=None, metric=None, sweep_value=None) -> float:
        v = self.values(variant, metric, sweep_value)
        if not v:
            raise ValidationError(f"no records for {variant}/{metric}/{sweep_value}")
        return float(np.mean(v))

    def sidecar(self) -> dict:
        return {"spec": self.spec.to_dict(), "environment": self.environment,
                "summary": self.summary, "notes": self.notes}

    def write(self, path) -> tuple[Path, Path]:
        """Write ``<path>`` (CSV) and ``<path stem>.json``."""
        path = Path(path)
        if path.suffix != ".csv":
            path = path.with_suffix(".csv")
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(RECORD_FIELDS)
            for r in self.records:
                w.writerow([r.experiment, r.variant, r.seed, r.sweep_param, r.sweep_value, r.metric,
                            repr(float(r.value)), f"{r.runtime_ms:.3f}"])
        side = path.with_suffix(".json")
        side.write_text(json.dumps(self.sidecar(), indent=2, sort_keys=True) + "\n")
        return path, side


def environment_stamp() -> dict:
    return {
        "artifact_version": __version__,
        "kernel_backend": kernels.BACKEND,
        "numpy": np.__version__,
        "python": platform.python_version(),
        "float_dtype": "float64",
        "tolerances": {"gradient_check_rel": 1e-4, "permutation_rel": 1e-9, "gbt_oracle_abs": 1e-12},
        "threads": _threads(),
    }


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigurationError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


def _map_cells(fn: Callable, cells: Sequence) -> list:
    """Run independent cells, concurrently when the thread env var allows; results keep input order."""
    n = _threads()
    if n == 1 or len(cells) < 2:
        return [fn(c) for c in cells]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, cells))


def summarize(records: Sequence[Record]) -> dict:
    """Mean and, given two or more seeds, sample stddev for each (variant, sweep value, metric) group."""
    groups: dict[tuple, list[float]] = {}
    for r in records:
        groups.setdefault((r.variant, r.sweep_value, r.metric), []).append(r.value)
    out: dict = {}
    for (variant, sv, metric), vals in sorted(groups.items()):
        entry = {"n": len(vals), "mean": float(np.mean(vals))}
        if len(vals) >= 2:
            entry["stddev"] = float(np.std(vals, ddof=1))
        else:
            entry["stddev_unavailable"] = True
        out.setdefault(variant, {}).setdefault(sv, {})[metric] = entry
    return out


# --- data and models (memoised) -------------------------------------------------


@dataclass
class Dataset:
    pool: list[mk.Listing]
    train: list[mk.Impression]
    test: list[mk.Impression]
    choice: mk.ChoiceModelConfig


_lock = threading.Lock()
_data_cache: dict = {}
_model_cache: dict = {}


def clear_caches() -> None:
    with _lock:
        _data_cache.clear()
        _model_cache.clear()


def _data_key(spec: ExperimentSpec) -> tuple:
    return (spec.data_seed, spec.pool_size, spec.train_impressions, spec.test_impressions, spec.candidates)


def build_dataset(spec: ExperimentSpec) -> Dataset:
    key = _data_key(spec)
    with _lock:
        if key in _data_cache:
            return _data_cache[key]
    choice = mk.ChoiceModelConfig()
    pool = mk.generate_listings(spec.pool_size, seed=rk.derive_seed(spec.data_seed, 0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        train = mk.generate_search_log(spec.train_impressions, spec.candidates, pool, choice,
                                       seed=rk.derive_seed(spec.data_seed, 1))
        test = mk.generate_search_log(spec.test_impressions, spec.candidates, pool, choice,
                                      seed=rk.derive_seed(spec.data_seed, 2))
    ds = Dataset(pool, train, test, choice)
    with _lock:
        _data_cache[key] = ds
    return ds


def rerank_log(spec: ExperimentSpec, ds: Dataset) -> list[mk.Impression]:
    """Held-out impressions with long candidate lists, for sweeps over the rerank depth."""
    key = ("rerank",) + _data_key(spec) + (spec.rerank_impressions, spec.rerank_candidates,
                                           tuple(spec.rerank_query_width))
    with _lock:
        if key in _data_cache:
            return _data_cache[key]
    qc = mk.QueryConfig(tuple(spec.rerank_query_width))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        imps = mk.generate_search_log(spec.rerank_impressions, spec.rerank_candidates, ds.pool, ds.choice,
                                      seed=rk.derive_seed(spec.data_seed, 3), query_cfg=qc)
    with _lock:
        _data_cache[key] = imps
    return imps


def _model_key(spec, variant, seed, hidden, weighting, residual) -> tuple:
    return (_data_key(spec), variant, seed, tuple(hidden), spec.feature_k, spec.embed_e, spec.epochs,
            spec.learning_rate, weighting, spec.alpha if weighting else None, residual)


def trained_model(spec: ExperimentSpec, variant: str, seed: int, hidden=None, weighting: bool = False,
                  residual: bool = True) -> rk.Ranker:
    """Train (or fetch) one ranker.

    Both true-pairwise aggregations share one trained h.  All-pairwise
    variants sit on the pairwise ranker of the same seed and size, which is
    always trained unweighted.
    """
    hidden = list(hidden or spec.hidden)
    train_as = rk.TRUE_PAIRWISE_GBT if variant == rk.TRUE_PAIRWISE_AVG else variant
    key = _model_key(spec, train_as, seed, hidden, weighting, residual)
    with _lock:
        model = _model_cache.get(key)
    if model is None:
        ds = build_dataset(spec)
        size = rk.ModelSize(tuple(hidden), spec.feature_k, spec.embed_e)
        base = None
        if train_as in (rk.ALL_PAIRWISE_APFN, rk.ALL_PAIRWISE_ATTN):
            base = trained_model(spec, rk.PAIRWISE, seed, hidden)
        model = tr.train_variant(train_as, ds.train, spec.train_config(seed, weighting), size,
                                 init_seed=seed, base=base, residual=residual).ranker
        with _lock:
            _model_cache[key] = model
    if variant == rk.TRUE_PAIRWISE_AVG:
        return rk.TruePairwiseRanker(model.h, model.listing_width, model.query_width, "avg")
    return model


def evaluate_ndcg(ranker: rk.Ranker, log_: Sequence[mk.Impression]) -> float:
    """Mean NDCG of ``ranker`` scoring each impression's full candidate set."""
    items = [mt.RankedImpression(scores_to_ranking(ranker.scores(imp.inputs())), imp.booked_index)
             for imp in log_]
    return mt.mean_ndcg(items)


def _pipeline(spec: ExperimentSpec, seed: int, second: str | None, k: int, hidden=None,
              weighting=False, residual=True) -> pl.PipelineConfig:
    first = trained_model(spec, rk.PAIRWISE, seed, hidden)
    stage2 = None if second is None else trained_model(spec, second, seed, hidden, weighting, residual)
    return pl.PipelineConfig(first, stage2, k)


def _timed(fn):
    t = time.perf_counter()
    out = fn()
    return out, (time.perf_counter() - t) * 1e3


def _report(spec: ExperimentSpec, records: list[Record], notes=None, extra_summary=None) -> ExperimentReport:
    summary = summarize(records)
    if extra_summary:
        summary["derived"] = extra_summary
    rep = ExperimentReport(spec, records, summary, environment_stamp(), list(notes or []))
    if spec.output_path:
        rep.write(spec.output_path)
    return rep


# --- experiments ----------------------------------------------------------------------


def run_param_scaling(spec: ExperimentSpec) -> ExperimentReport:
    """Held-out NDCG of every variant at every hidden-width setting."""
    cells = [(v, s, tuple(h)) for h in spec.hidden_sweep for s in spec.model_seeds for v in spec.variants]

    def cell(c):
        variant, seed, hidden = c
        sv = "x".join(map(str, hidden))
        try:
            model, ms = _timed(lambda: trained_model(spec, variant, seed, hidden))
        except LtrError as exc:
            log.warning("cell %s failed: %s", c, exc)
            return [Record(spec.experiment, variant, seed, "hidden", sv, "failed", 1.0, 0.0)]
        ndcg, ems = _timed(lambda: evaluate_ndcg(model, build_dataset(spec).test))
        return [Record(spec.experiment, variant, seed, "hidden", sv, "ndcg", ndcg, ms + ems),
                Record(spec.experiment, variant, seed, "hidden", sv, "parameters",
                       float(rk.total_parameter_count(model)), 0.0)]

    records = [r for rs in _map_cells(cell, cells) for r in rs]
    return _report(spec, records)


def _sweep_pipeline(spec, seed, imps, metric_fn, second=None, repeats=1):
    """Rank every impression at every k; yields (k, [metric per impression], mean latency ms)."""
    second = second or spec.second_stage
    out = []
    for k in spec.top_k_sweep:
        cfg = _pipeline(spec, seed, second, k)
        vals, lat = [], []
        for imp in imps:
            best = math.inf
            for _ in range(max(1, repeats)):
                res = pl.rank(cfg, imp.query, imp.candidates)
                best = min(best, res.timing["total_s"])
            lat.append(best * 1e3)
            vals.append(metric_fn(imp, res))
        out.append((k, vals, float(np.mean(lat))))
    return out


def run_rerank_tradeoff(spec: ExperimentSpec) -> ExperimentReport:
    """NDCG and latency versus rerank depth, each as % change from rerank depth 1."""
    ds = build_dataset(spec)
    imps = rerank_log(spec, ds)
    if 1 not in spec.top_k_sweep:
        raise ConfigurationError("top_k_sweep must include 1 (the baseline)")

    def ndcg_of(imp, res):
        return mt.ndcg(mt.RankedImpression(res.ordering, imp.booked_index))

    def cell(seed):
        rows = _sweep_pipeline(spec, seed, imps, ndcg_of, repeats=spec.latency_repeats)
        base_ndcg = next(np.mean(v) for k, v, _ in rows if k == 1)
        base_lat = next(l for k, _, l in rows if k == 1)
        recs = []
        for k, vals, lat in rows:
            n = float(np.mean(vals))
            recs += [Record(spec.experiment, spec.second_stage, seed, "top_k", str(k), "ndcg", n, lat),
                     Record(spec.experiment, spec.second_stage, seed, "top_k", str(k), "ndcg_change_pct",
                            100.0 * (n - base_ndcg) / base_ndcg, lat),
                     Record(spec.experiment, spec.second_stage, seed, "top_k", str(k), "latency_ms", lat, lat),
                     Record(spec.experiment, spec.second_stage, seed, "top_k", str(k), "latency_change_pct",
                            100.0 * (lat - base_lat) / base_lat, lat)]
        return recs

    records = [r for rs in _map_cells(cell, spec.model_seeds) for r in rs]
    notes = ["latency is the per-impression minimum over latency_repeats calls of rank(), averaged"]
    return _report(spec, records, notes)


def run_diversity(spec: ExperimentSpec) -> ExperimentReport:
    """Normalized first-page price variance versus rerank depth.

    The pairwise-only pipeline is reported alongside as the k-independent
    reference.
    """
    ds = build_dataset(spec)
    imps = rerank_log(spec, ds)

    def div_of(imp, res):
        prices = [imp.candidates[i].nightly_price for i in res.ordering]
        return mt.price_variance_diversity(prices, min(spec.page_size, len(prices)))

    def cell(seed):
        recs = []
        for k, vals, lat in _sweep_pipeline(spec, seed, imps, div_of):
            recs.append(Record(spec.experiment, spec.second_stage, seed, "top_k", str(k),
                               "price_variance", float(np.mean(vals)), lat))
        cfg = _pipeline(spec, seed, None, 1)
        ref = [div_of(imp, pl.rank(cfg, imp.query, imp.candidates)) for imp in imps]
        for k in spec.top_k_sweep:
            recs.append(Record(spec.experiment, rk.PAIRWISE, seed, "top_k", str(k),
                               "price_variance", float(np.mean(ref)), 0.0))
        return recs

    records = [r for rs in _map_cells(cell, spec.model_seeds) for r in rs]
    return _report(spec, records)


def run_uncertainty(spec: ExperimentSpec) -> ExperimentReport:
    """Per-seed NDCG of each variant; the summary carries per-variant stddev."""
    cells = [(v, s) for s in spec.model_seeds for v in spec.variants]

    def cell(c):
        variant, seed = c
        model, ms = _timed(lambda: trained_model(spec, variant, seed))
        ndcg = evaluate_ndcg(model, build_dataset(spec).test)
        return Record(spec.experiment, variant, seed, "seed", str(seed), "ndcg", ndcg, ms)

    records = _map_cells(cell, cells)
    notes = []
    stds = {}
    for v in spec.variants:
        vals = [r.value for r in records if r.variant == v]
        if len(vals) >= 2:
            stds[v] = float(np.std(vals, ddof=1))
    if len(spec.model_seeds) < 2:
        notes.append("stddev unavailable: fewer than two seeds")
    return _report(spec, records, notes, {"ndcg_stddev": stds} if stds else None)


def run_ab_offline(spec: ExperimentSpec) -> ExperimentReport:
    """Held-out comparison of two variants; not a stand-in for an online test."""

    def cell(seed):
        b = evaluate_ndcg(trained_model(spec, spec.baseline, seed), build_dataset(spec).test)
        t = evaluate_ndcg(trained_model(spec, spec.treatment, seed), build_dataset(spec).test)
        return [Record(spec.experiment, spec.baseline, seed, "arm", "baseline", "ndcg", b, 0.0),
                Record(spec.experiment, spec.treatment, seed, "arm", "treatment", "ndcg", t, 0.0),
                Record(spec.experiment, spec.treatment, seed, "arm", "treatment", "ndcg_lift_pct",
                       100.0 * (t - b) / b, 0.0)]

    records = [r for rs in _map_cells(cell, spec.model_seeds) for r in rs]
    notes = ["offline held-out comparison only; offline NDCG need not track online booking metrics"]
    return _report(spec, records, notes)


def _flip_queries(spec: ExperimentSpec) -> list[mk.Query]:
    rng = np.random.default_rng(rk.derive_seed(spec.data_seed, 4))
    return [mk.sample_query(rng) for _ in range(spec.queries)]


def mean_flips(cfg: pl.PipelineConfig, pool, queries, spec: ExperimentSpec) -> float:
    """Mean top-``flip_k`` flips per jittered query."""
    total, count = 0, 0
    for qi, q in enumerate(queries):
        cands = mk.retrieve_candidates(q, pool)
        if len(cands) < spec.flip_k:
            continue
        top = [cands[i].id for i in pl.rank(cfg, q, cands).ordering]
        ids = [l.id for l in cands]
        for j in range(spec.jitters):
            try:
                jq = mk.jitter_query(q, spec.jitter_magnitude, seed=rk.derive_seed(spec.data_seed, 5, qi, j))
            except LtrError:
                continue
            jc = mk.retrieve_candidates(jq, pool)
            if len(jc) < spec.flip_k:
                continue
            jtop = [jc[i].id for i in pl.rank(cfg, jq, jc).ordering]
            total += mt.count_flips(top, jtop, spec.flip_k, ids, [l.id for l in jc])
            count += 1
    if count == 0:
        raise ValidationError("no query had enough candidates to count flips")
    return total / count


def run_stability(spec: ExperimentSpec) -> ExperimentReport:
    """Top-k flips under query jitter: residual second stage versus a logit-network-only ablation."""
    ds = build_dataset(spec)
    queries = _flip_queries(spec)
    second = spec.second_stage
    if second not in (rk.ALL_PAIRWISE_APFN, rk.ALL_PAIRWISE_ATTN):
        raise ConfigurationError("stability compares residual forms; second_stage must be all-pairwise")

    def cell(seed):
        out = []
        for label, residual in (("residual", True), ("non_residual", False)):
            cfg = _pipeline(spec, seed, second, spec.stability_top_k, residual=residual)
            f, ms = _timed(lambda: mean_flips(cfg, ds.pool, queries, spec))
            out.append(Record(spec.experiment, f"{second}_{label}", seed, "jitter",
                              repr(spec.jitter_magnitude), "mean_flips", f, ms))
        ref, ms = _timed(lambda: mean_flips(_pipeline(spec, seed, None, 1), ds.pool, queries, spec))
        out.append(Record(spec.experiment, rk.PAIRWISE, seed, "jitter", repr(spec.jitter_magnitude),
                          "mean_flips", ref, ms))
        return out

    records = [r for rs in _map_cells(cell, spec.model_seeds) for r in rs]
    res = float(np.mean([r.value for r in records if r.variant == f"{second}_residual"]))
    non = float(np.mean([r.value for r in records if r.variant == f"{second}_non_residual"]))
    reduction = 100.0 * (non - res) / non if non > 0 else 0.0
    return _report(spec, records, extra_summary={"mean_flips_residual": res, "mean_flips_non_residual": non,
                                                  "reduction_pct": reduction})


def top_rating(ordering, candidates, top: int, rating_noise: float) -> float:
    """Mean expected trip rating of the first ``top`` ranked listings."""
    picks = [candidates[i] for i in ordering[:top]]
    return float(np.mean([mk.expected_rating(l.latent_quality, rating_noise) for l in picks]))


def five_star_ids(log_: Sequence[mk.Impression]) -> set[int]:
    """Listings booked at least once with a 5-star trip in ``log_``."""
    return {imp.booked.id for imp in log_ if imp.trip_rating == 5}


def relative_position(ordering, candidates, ids: set[int]) -> float | None:
    """Mean of ``position / (N - 1)`` over candidates in ``ids`` (0 is the top); None when absent."""
    n = len(candidates)
    pos = [p / (n - 1) for p, i in enumerate(ordering) if candidates[i].id in ids]
    return float(np.mean(pos)) if pos and n > 1 else None


def run_multi_objective(spec: ExperimentSpec) -> ExperimentReport:
    """All-pairwise ranker trained with and without trip-quality weighting."""
    ds = build_dataset(spec)
    variant = rk.ALL_PAIRWISE_APFN
    stars = five_star_ids(ds.train)

    def cell(seed):
        recs = []
        for label, weighting in (("unweighted", False), ("weighted", True)):
            model, ms = _timed(lambda: trained_model(spec, variant, seed, weighting=weighting))
            nd, rt, fs = [], [], []
            for imp in ds.test:
                order = scores_to_ranking(model.scores(imp.inputs()))
                nd.append(mt.ndcg(mt.RankedImpression(order, imp.booked_index)))
                rt.append(top_rating(order, imp.candidates, spec.top_ratings, ds.choice.rating_noise))
                rp = relative_position(order, imp.candidates, stars)
                if rp is not None:
                    fs.append(rp)
            recs += [Record(spec.experiment, variant, seed, "weighting", label, "ndcg", float(np.mean(nd)), ms),
                     Record(spec.experiment, variant, seed, "weighting", label, "top_rating",
                            float(np.mean(rt)), ms),
                     Record(spec.experiment, variant, seed, "weighting", label, "five_star_position",
                            float(np.mean(fs)) if fs else math.nan, ms)]
        return recs

    records = [r for rs in _map_cells(cell, spec.model_seeds) for r in rs]
    return _report(spec, records, [f"alpha={spec.alpha}; top_rating uses expected rating of the "
                                   f"top {spec.top_ratings} listings",
                                   "five_star_position: mean relative rank (0 = top) of held-out candidates "
                                   "that had a 5-star booking in training"])


RUNNERS = {
    "param_scaling": run_param_scaling,
    "rerank_tradeoff": run_rerank_tradeoff,
    "diversity": run_diversity,
    "uncertainty": run_uncertainty,
    "ab_offline": run_ab_offline,
    "stability": run_stability,
    "multi_objective": run_multi_objective,
}


def run(spec: ExperimentSpec) -> ExperimentReport:
    # build data up front: warning capture during generation is not thread-safe
    build_dataset(spec)
    return RUNNERS[spec.experiment](spec)


def load_spec(path) -> ExperimentSpec:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: spec must be a JSON object")
    return ExperimentSpec.from_dict(data)
