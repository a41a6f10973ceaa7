"""The ranker families, from a univariate scorer up to set-aware rerankers.

All scorers consume model-input rows (listing features followed by query
features, see :meth:`Impression.inputs`).  Batched methods score a whole
candidate set at once; the module-level functions give the per-listing API.

* :class:`PairwiseRanker` -- univariate ``f``; ``logit(a, b) = f(a) - f(b)``.
* :class:`TruePairwiseRanker` -- ``g(a, b) = h(a, b) - h(b, a)``, aggregated
  by average or generalized Bradley-Terry.
* :class:`AllPairwiseRanker` -- superiority/similarity features with
  listing-dependent weights feeding a logit network added to ``f``.
* :class:`AttentionRanker` -- the same residual head fed by single-head
  attention over listing embeddings.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from . import aggregation, kernels
from .errors import DegenerateInputError, ParseError, ShapeError, ValidationError
from .market import Listing, Query
from .nn import FeedForwardNet, NetConfig, net_init

RANKER_FORMAT = "ltrstack.ranker"
RANKER_FORMAT_VERSION = 1

PAIRWISE = "pairwise"
TRUE_PAIRWISE_AVG = "true_pairwise_avg"
TRUE_PAIRWISE_GBT = "true_pairwise_gbt"
ALL_PAIRWISE_APFN = "all_pairwise_apfn"
ALL_PAIRWISE_ATTN = "all_pairwise_attn"
VARIANTS = (PAIRWISE, TRUE_PAIRWISE_AVG, TRUE_PAIRWISE_GBT, ALL_PAIRWISE_APFN, ALL_PAIRWISE_ATTN)


def derive_seed(seed: int, *tags: int) -> int:
    return int(np.random.SeedSequence([int(seed), *tags]).generate_state(1, dtype=np.uint64)[0])


@dataclass
class EvalCounter:
    """Counts scorer evaluations; pass one in to instrument a call."""

    f_calls: int = 0
    g_calls: int = 0
    h_calls: int = 0
    interactions: int = 0


def _as_rows(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x[None, :] if x.ndim == 1 else x


def listing_inputs(listings: list[Listing], query: Query) -> np.ndarray:
    lm = np.stack([l.features for l in listings])
    q = np.broadcast_to(query.query_features, (lm.shape[0], query.query_features.size))
    return np.ascontiguousarray(np.hstack([lm, q]))


# --- pairwise -------------------------------------------------------------------


@dataclass
class PairwiseRanker:
    f: FeedForwardNet
    variant: str = PAIRWISE

    @property
    def input_width(self) -> int:
        return self.f.in_width

    def logits(self, x, counter: EvalCounter | None = None) -> np.ndarray:
        x = _as_rows(x)
        if counter is not None:
            counter.f_calls += x.shape[0]
        return self.f.forward(x)[:, 0]

    def scores(self, x, base_logits=None, counter=None) -> np.ndarray:
        return self.logits(x, counter)

    def parameters(self) -> list[np.ndarray]:
        return self.f.parameters()

    def nets(self) -> dict[str, FeedForwardNet]:
        return {"f": self.f}


# --- true pairwise ----------------------------------------------------------------


@dataclass
class TruePairwiseRanker:
    h: FeedForwardNet
    listing_width: int
    query_width: int
    aggregation: str = "gbt"

    def __post_init__(self):
        if self.aggregation not in ("avg", "gbt"):
            raise ValidationError(f"unknown aggregation {self.aggregation!r}")
        if self.h.in_width != 2 * self.listing_width + self.query_width:
            raise ShapeError("h input width must be 2 * listing_width + query_width")

    @property
    def variant(self) -> str:
        return TRUE_PAIRWISE_GBT if self.aggregation == "gbt" else TRUE_PAIRWISE_AVG

    @property
    def input_width(self) -> int:
        return self.listing_width + self.query_width

    def pair_rows(self, x: np.ndarray, a_idx, b_idx) -> np.ndarray:
        """Rows ``[listing_a, listing_b, query]`` for h."""
        F = self.listing_width
        a_idx = np.asarray(a_idx)
        b_idx = np.asarray(b_idx)
        return np.ascontiguousarray(np.hstack([x[a_idx, :F], x[b_idx, :F], x[a_idx, F:]]))

    def h_values(self, rows: np.ndarray) -> np.ndarray:
        return self.h.forward(rows)[:, 0]

    def logit_matrix(self, x, counter: EvalCounter | None = None) -> np.ndarray:
        """``G[i, j] = g(l_i, l_j)``; exactly anti-symmetric with zero diagonal.

        Each unordered pair is evaluated once: both orders of h go through
        one batch and ``G = H - H.T``.
        """
        x = _as_rows(x)
        n = x.shape[0]
        g = np.zeros((n, n))
        if n < 2:
            return g
        iu, ju = np.triu_indices(n, k=1)
        m = iu.size
        rows = self.pair_rows(x, np.concatenate([iu, ju]), np.concatenate([ju, iu]))
        hv = self.h_values(rows)
        upper = hv[:m] - hv[m:]
        g[iu, ju] = upper
        g[ju, iu] = hv[m:] - hv[:m]
        if counter is not None:
            counter.g_calls += m
            counter.h_calls += 2 * m
        return g

    def scores(self, x, base_logits=None, counter=None) -> np.ndarray:
        g = self.logit_matrix(x, counter)
        if x.shape[0] < 2:
            return np.zeros(x.shape[0]) if self.aggregation == "avg" else np.ones(x.shape[0])
        if self.aggregation == "gbt":
            return aggregation.gbt_scores(g)
        return aggregation.avg_scores(g)

    def parameters(self) -> list[np.ndarray]:
        return self.h.parameters()

    def nets(self) -> dict[str, FeedForwardNet]:
        return {"h": self.h}


# --- all pairwise (APFN) --------------------------------------------------------------


@dataclass
class AllPairwiseRanker:
    base: PairwiseRanker
    phi_sup: FeedForwardNet
    psi_embed: FeedForwardNet
    phi_sim: FeedForwardNet
    beta_sup: np.ndarray
    beta_sim: np.ndarray
    apln: FeedForwardNet
    residual: bool = True
    variant: str = ALL_PAIRWISE_APFN

    @property
    def k(self) -> int:
        return self.phi_sup.out_width

    @property
    def input_width(self) -> int:
        return self.base.input_width

    def forward(self, x, base_logits=None, counter: EvalCounter | None = None):
        """Final logits for every row of ``x`` plus the cache for :meth:`backward`."""
        x = _as_rows(x)
        s = self.base.logits(x, counter) if base_logits is None else np.asarray(base_logits, dtype=np.float64)
        n = x.shape[0]
        if n < 2:
            return (s.copy() if self.residual else np.zeros(n)), None
        a_sup = self.phi_sup.activations(x)
        a_psi = self.psi_embed.activations(x)
        a_sim = self.phi_sim.activations(x)
        emb = a_psi[-1]
        sup = kernels.superiority(s, a_sup[-1]) + self.beta_sup
        w = kernels.masked_softmax(np.ascontiguousarray(emb @ emb.T))
        sim = w @ a_sim[-1] + self.beta_sim
        a_apln = self.apln.activations(np.hstack([sup, sim]))
        out = a_apln[-1][:, 0]
        if counter is not None:
            counter.interactions += n * (n - 1)
        logits = s + out if self.residual else out.copy()
        cache = dict(s=s, a_sup=a_sup, a_psi=a_psi, a_sim=a_sim, w=w, a_apln=a_apln)
        return logits, cache

    def backward(self, cache, d_logits) -> list[np.ndarray]:
        """Gradients in :meth:`parameters` order; the base ranker is frozen."""
        d_out = np.asarray(d_logits, dtype=np.float64)[:, None]
        g_apln, dz = self.apln.backward_from(cache["a_apln"], d_out)
        k = self.k
        d_sup, d_sim = dz[:, :k], dz[:, k:]
        d_p = kernels.superiority_backward(cache["s"], np.ascontiguousarray(d_sup))
        w = cache["w"]
        r = cache["a_sim"][-1]
        emb = cache["a_psi"][-1]
        d_r = w.T @ d_sim
        d_w = np.ascontiguousarray(d_sim @ r.T)
        d_d = kernels.masked_softmax_backward(w, d_w)
        d_emb = (d_d + d_d.T) @ emb
        g_sup, _ = self.phi_sup.backward_from(cache["a_sup"], d_p)
        g_psi, _ = self.psi_embed.backward_from(cache["a_psi"], d_emb)
        g_sim, _ = self.phi_sim.backward_from(cache["a_sim"], d_r)
        return (g_sup.arrays() + g_psi.arrays() + g_sim.arrays()
                + [d_sup.sum(axis=0), d_sim.sum(axis=0)] + g_apln.arrays())

    def parameters(self) -> list[np.ndarray]:
        return (self.phi_sup.parameters() + self.psi_embed.parameters() + self.phi_sim.parameters()
                + [self.beta_sup, self.beta_sim] + self.apln.parameters())

    def scores(self, x, base_logits=None, counter=None) -> np.ndarray:
        return self.forward(x, base_logits, counter)[0]

    def nets(self) -> dict[str, FeedForwardNet]:
        return {"f": self.base.f, "phi_sup": self.phi_sup, "psi_embed": self.psi_embed,
                "phi_sim": self.phi_sim, "apln": self.apln}

    def arrays(self) -> dict[str, np.ndarray]:
        return {"beta_sup": self.beta_sup, "beta_sim": self.beta_sim}


# --- all pairwise (attention) ----------------------------------------------------------


@dataclass
class AttentionRanker:
    base: PairwiseRanker
    embed: FeedForwardNet
    w_query: np.ndarray
    w_key: np.ndarray
    w_value: np.ndarray
    apln: FeedForwardNet
    residual: bool = True
    variant: str = ALL_PAIRWISE_ATTN

    @property
    def e(self) -> int:
        return self.embed.out_width

    @property
    def input_width(self) -> int:
        return self.base.input_width

    def forward(self, x, base_logits=None, counter: EvalCounter | None = None):
        x = _as_rows(x)
        s = self.base.logits(x, counter) if base_logits is None else np.asarray(base_logits, dtype=np.float64)
        n = x.shape[0]
        if n < 2:
            return (s.copy() if self.residual else np.zeros(n)), None
        a_e = self.embed.activations(x)
        em = a_e[-1]
        qm = em @ self.w_query
        km = em @ self.w_key
        v = em @ self.w_value
        w = kernels.masked_softmax(np.ascontiguousarray(qm @ km.T / math.sqrt(self.e)))
        ctx = w @ v
        a_apln = self.apln.activations(np.hstack([em, ctx]))
        out = a_apln[-1][:, 0]
        if counter is not None:
            counter.interactions += n * (n - 1)
        logits = s + out if self.residual else out.copy()
        return logits, dict(a_e=a_e, qm=qm, km=km, v=v, w=w, a_apln=a_apln)

    def backward(self, cache, d_logits) -> list[np.ndarray]:
        d_out = np.asarray(d_logits, dtype=np.float64)[:, None]
        g_apln, dz = self.apln.backward_from(cache["a_apln"], d_out)
        e = self.e
        em = cache["a_e"][-1]
        w, v, qm, km = cache["w"], cache["v"], cache["qm"], cache["km"]
        d_em = dz[:, :e].copy()
        d_ctx = dz[:, e:]
        d_w = np.ascontiguousarray(d_ctx @ v.T)
        d_v = w.T @ d_ctx
        d_d = kernels.masked_softmax_backward(w, d_w) / math.sqrt(e)
        d_q = d_d @ km
        d_k = d_d.T @ qm
        d_wq = em.T @ d_q
        d_wk = em.T @ d_k
        d_wv = em.T @ d_v
        d_em += d_q @ self.w_query.T + d_k @ self.w_key.T + d_v @ self.w_value.T
        g_e, _ = self.embed.backward_from(cache["a_e"], d_em)
        return g_e.arrays() + [d_wq, d_wk, d_wv] + g_apln.arrays()

    def parameters(self) -> list[np.ndarray]:
        return self.embed.parameters() + [self.w_query, self.w_key, self.w_value] + self.apln.parameters()

    def scores(self, x, base_logits=None, counter=None) -> np.ndarray:
        return self.forward(x, base_logits, counter)[0]

    def nets(self) -> dict[str, FeedForwardNet]:
        return {"f": self.base.f, "embed": self.embed, "apln": self.apln}

    def arrays(self) -> dict[str, np.ndarray]:
        return {"w_query": self.w_query, "w_key": self.w_key, "w_value": self.w_value}


Ranker = Union[PairwiseRanker, TruePairwiseRanker, AllPairwiseRanker, AttentionRanker]


# --- construction -----------------------------------------------------------------


@dataclass
class ModelSize:
    hidden: tuple[int, ...] = (32, 32)
    feature_k: int = 16
    embed_e: int = 16
    activation: str = "relu"


def _net(widths, activation, seed) -> FeedForwardNet:
    return net_init(NetConfig(tuple(widths), activation, seed))


def make_pairwise(listing_width: int, query_width: int, size: ModelSize | None = None, seed: int = 0) -> PairwiseRanker:
    size = size or ModelSize()
    d = listing_width + query_width
    return PairwiseRanker(_net((d, *size.hidden, 1), size.activation, derive_seed(seed, 1)))


def make_ranker(variant: str, listing_width: int, query_width: int, size: ModelSize | None = None,
                seed: int = 0, base: PairwiseRanker | None = None, residual: bool = True) -> Ranker:
    """Fresh ranker of the given variant.

    All-pairwise variants wrap ``base`` (a new pairwise ranker when omitted)
    and start with a zero logit-network output layer, so their initial
    ranking equals the base ranking.
    """
    size = size or ModelSize()
    d = listing_width + query_width
    act = size.activation
    if variant == PAIRWISE:
        return make_pairwise(listing_width, query_width, size, seed)
    if variant in (TRUE_PAIRWISE_AVG, TRUE_PAIRWISE_GBT):
        h = _net((2 * listing_width + query_width, *size.hidden, 1), act, derive_seed(seed, 2))
        return TruePairwiseRanker(h, listing_width, query_width, "gbt" if variant == TRUE_PAIRWISE_GBT else "avg")
    if base is None:
        base = make_pairwise(listing_width, query_width, size, seed)
    if variant == ALL_PAIRWISE_APFN:
        k = size.feature_k
        apln = _net((2 * k, *size.hidden, 1), act, derive_seed(seed, 7))
        apln.zero_output_layer()
        return AllPairwiseRanker(
            base=base,
            phi_sup=_net((d, *size.hidden, k), act, derive_seed(seed, 3)),
            psi_embed=_net((d, *size.hidden, size.embed_e), act, derive_seed(seed, 4)),
            phi_sim=_net((d, *size.hidden, k), act, derive_seed(seed, 5)),
            beta_sup=np.zeros(k),
            beta_sim=np.zeros(k),
            apln=apln,
            residual=residual,
        )
    if variant == ALL_PAIRWISE_ATTN:
        e = size.embed_e
        rng = np.random.default_rng(derive_seed(seed, 6))
        bound = 1.0 / math.sqrt(e)
        apln = _net((2 * e, *size.hidden, 1), act, derive_seed(seed, 7))
        apln.zero_output_layer()
        return AttentionRanker(
            base=base,
            embed=_net((d, *size.hidden, e), act, derive_seed(seed, 8)),
            w_query=rng.uniform(-bound, bound, size=(e, e)),
            w_key=rng.uniform(-bound, bound, size=(e, e)),
            w_value=rng.uniform(-bound, bound, size=(e, e)),
            apln=apln,
            residual=residual,
        )
    raise ValidationError(f"unknown ranker variant {variant!r}")


def trainable_parameter_count(ranker: Ranker) -> int:
    return sum(p.size for p in ranker.parameters())


def total_parameter_count(ranker: Ranker) -> int:
    n = trainable_parameter_count(ranker)
    if isinstance(ranker, (AllPairwiseRanker, AttentionRanker)):
        n += ranker.base.f.parameter_count
    return n


# --- per-listing API --------------------------------------------------------------


def _check_width(ranker, x: np.ndarray) -> None:
    if x.shape[-1] != ranker.input_width:
        raise ShapeError(f"input width {x.shape[-1]} != ranker input width {ranker.input_width}")


def pointwise_logit(r: PairwiseRanker, listing: Listing, query: Query) -> float:
    x = listing_inputs([listing], query)
    _check_width(r, x)
    return float(r.logits(x)[0])


def pairwise_logit(r: PairwiseRanker, l_a: Listing, l_b: Listing, query: Query) -> float:
    return pointwise_logit(r, l_a, query) - pointwise_logit(r, l_b, query)


def true_pairwise_logit(r: TruePairwiseRanker, l_a: Listing, l_b: Listing, query: Query) -> float:
    x = listing_inputs([l_a, l_b], query)
    _check_width(r, x)
    # one row per call: both orders then see identical arithmetic, so
    # g(a, b) == -g(b, a) bit for bit
    h_ab = r.h_values(r.pair_rows(x, [0], [1]))[0]
    h_ba = r.h_values(r.pair_rows(x, [1], [0]))[0]
    return float(h_ab - h_ba)


def _apfn_parts(i: int, listings: list[Listing], r: AllPairwiseRanker, query: Query):
    n = len(listings)
    if n < 2:
        raise DegenerateInputError("all-pairwise features need at least two listings")
    if not 0 <= i < n:
        raise ValidationError(f"index {i} out of range for {n} listings")
    x = listing_inputs(listings, query)
    _check_width(r, x)
    return x


def superiority_features(i: int, listings: list[Listing], r: AllPairwiseRanker, query: Query) -> np.ndarray:
    x = _apfn_parts(i, listings, r, query)
    s = r.base.logits(x)
    p = r.phi_sup.forward(x)
    return kernels.superiority(s, p)[i] + r.beta_sup


def similarity_features(i: int, listings: list[Listing], r: AllPairwiseRanker, query: Query) -> np.ndarray:
    x = _apfn_parts(i, listings, r, query)
    emb = r.psi_embed.forward(x)
    w = kernels.masked_softmax(np.ascontiguousarray(emb @ emb.T))
    return w[i] @ r.phi_sim.forward(x) + r.beta_sim


def all_pairwise_logit(i: int, listings: list[Listing], r: AllPairwiseRanker, query: Query) -> float:
    """Final logit of listing ``i``; with one listing this is the base logit."""
    if len(listings) < 2:
        return pointwise_logit(r.base, listings[i], query)
    x = _apfn_parts(i, listings, r, query)
    return float(r.forward(x)[0][i])


def attention_logit(i: int, listings: list[Listing], r: AttentionRanker, query: Query) -> float:
    if len(listings) < 2:
        return pointwise_logit(r.base, listings[i], query)
    if not 0 <= i < len(listings):
        raise ValidationError(f"index {i} out of range")
    x = listing_inputs(listings, query)
    _check_width(r, x)
    return float(r.forward(x)[0][i])


def score_candidates(ranker: Ranker, x: np.ndarray, base_logits=None, counter=None) -> np.ndarray:
    """One real score per row of ``x``; higher ranks first."""
    return ranker.scores(_as_rows(x), base_logits, counter)


# --- serialization -----------------------------------------------------------------


def ranker_to_dict(ranker: Ranker) -> dict:
    out = {
        "format": RANKER_FORMAT,
        "version": RANKER_FORMAT_VERSION,
        "variant": ranker.variant,
        "nets": {k: v.to_dict() for k, v in ranker.nets().items()},
        "arrays": {},
        "widths": {},
    }
    if isinstance(ranker, TruePairwiseRanker):
        out["widths"] = {"F": ranker.listing_width, "Q": ranker.query_width}
    if isinstance(ranker, (AllPairwiseRanker, AttentionRanker)):
        out["residual"] = ranker.residual
        out["arrays"] = {k: {"shape": list(v.shape), "data": [float(x).hex() for x in v.ravel()]}
                         for k, v in ranker.arrays().items()}
        if isinstance(ranker, AllPairwiseRanker):
            out["widths"] = {"K": ranker.k, "E": ranker.psi_embed.out_width}
        else:
            out["widths"] = {"E": ranker.e}
    return out


def ranker_from_dict(data: dict) -> Ranker:
    if data.get("format") != RANKER_FORMAT:
        raise ParseError(f"not a serialized ranker: format={data.get('format')!r}")
    if data.get("version") != RANKER_FORMAT_VERSION:
        raise ParseError(f"unsupported ranker format version {data.get('version')!r}")
    nets = {k: FeedForwardNet.from_dict(v) for k, v in data["nets"].items()}
    arrays = {k: np.array([float.fromhex(x) for x in v["data"]]).reshape(v["shape"])
              for k, v in data.get("arrays", {}).items()}
    variant = data["variant"]
    if variant == PAIRWISE:
        return PairwiseRanker(nets["f"])
    if variant in (TRUE_PAIRWISE_AVG, TRUE_PAIRWISE_GBT):
        w = data["widths"]
        return TruePairwiseRanker(nets["h"], w["F"], w["Q"], "gbt" if variant == TRUE_PAIRWISE_GBT else "avg")
    base = PairwiseRanker(nets["f"])
    if variant == ALL_PAIRWISE_APFN:
        return AllPairwiseRanker(base, nets["phi_sup"], nets["psi_embed"], nets["phi_sim"],
                                 arrays["beta_sup"], arrays["beta_sim"], nets["apln"], data["residual"])
    if variant == ALL_PAIRWISE_ATTN:
        return AttentionRanker(base, nets["embed"], arrays["w_query"], arrays["w_key"], arrays["w_value"],
                               nets["apln"], data["residual"])
    raise ParseError(f"unknown variant {variant!r}")


def save_ranker(ranker: Ranker, path, extra: dict | None = None) -> None:
    data = ranker_to_dict(ranker)
    if extra:
        data["meta"] = extra
    Path(path).write_text(json.dumps(data, sort_keys=True))


def load_ranker(path) -> Ranker:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(str(exc), exc.lineno) from exc
    return ranker_from_dict(data)


def load_ranker_meta(path) -> dict:
    data = json.loads(Path(path).read_text())
    return data.get("meta", {})
