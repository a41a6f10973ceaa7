"""Synthetic marketplace and search logs driven by a context-dependent choice model.

Listings come in "buildings": units of one building share location,
amenities and latent quality and differ mainly in price, so near-duplicate
listings regularly appear in the same result set.

The ground-truth chooser discounts a listing's utility when a similar
listing in the same result set is better::

    u'_i = u_i - lam * sum_{j != i} sim(i, j) * max(0, u_j - u_i)
    sim(i, j) = exp(-|x_i - x_j|^2 / bandwidth)

and samples the booked listing from ``softmax(u' / temperature)``.  With
``lam = 0`` this is a plain multinomial logit.

Seed mixing: impression ``k`` of a log generated with seed ``s`` draws from
``np.random.default_rng(np.random.SeedSequence([s, k]))``; the query seed,
candidate sample, booking and rating all come from that stream.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import ConfigurationError, GenerationError, NumericError, ParseError, ShapeError

PRICE, LOC_X, LOC_Y, QUALITY = 0, 1, 2, 3
FEATURE_WIDTH = 8
QUERY_WIDTH = 2


@dataclass(eq=False)
class Listing:
    id: int
    features: np.ndarray
    # simulator-only ground truth; never serialized or fed to models
    latent_quality: float | None = None
    latent_appeal: float | None = None
    nightly_price: float | None = None
    building: int | None = None

    @property
    def price(self) -> float:
        return float(self.features[PRICE])

    @property
    def location(self) -> tuple[float, float]:
        return float(self.features[LOC_X]), float(self.features[LOC_Y])

    def __eq__(self, other):
        if not isinstance(other, Listing):
            return NotImplemented
        return self.id == other.id and np.array_equal(self.features, other.features)

    def __hash__(self):
        return hash(self.id)


@dataclass(eq=False)
class Query:
    map_bounds: tuple[float, float, float, float]  # x_min, x_max, y_min, y_max
    query_features: np.ndarray
    seed: int = 0

    def __post_init__(self):
        x0, x1, y0, y1 = (float(b) for b in self.map_bounds)
        if not (x0 < x1 and y0 < y1):
            raise ConfigurationError(f"degenerate map bounds {self.map_bounds}")
        self.map_bounds = (x0, x1, y0, y1)
        self.query_features = np.asarray(self.query_features, dtype=np.float64)

    def contains(self, listing: Listing) -> bool:
        x, y = listing.location
        x0, x1, y0, y1 = self.map_bounds
        return x0 <= x <= x1 and y0 <= y <= y1

    def __eq__(self, other):
        if not isinstance(other, Query):
            return NotImplemented
        return (
            self.map_bounds == other.map_bounds
            and np.array_equal(self.query_features, other.query_features)
            and self.seed == other.seed
        )


@dataclass(eq=False)
class Impression:
    query: Query
    candidates: list[Listing]
    booked_index: int
    trip_rating: int
    _inputs: np.ndarray | None = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return len(self.candidates)

    @property
    def booked(self) -> Listing:
        return self.candidates[self.booked_index]

    def listing_matrix(self) -> np.ndarray:
        return np.stack([c.features for c in self.candidates])

    def inputs(self) -> np.ndarray:
        """Model input rows: listing features followed by the query features."""
        if self._inputs is None:
            lm = self.listing_matrix()
            q = np.broadcast_to(self.query.query_features, (lm.shape[0], self.query.query_features.size))
            self._inputs = np.ascontiguousarray(np.hstack([lm, q]))
        return self._inputs

    def __eq__(self, other):
        if not isinstance(other, Impression):
            return NotImplemented
        return (
            self.query == other.query
            and self.candidates == other.candidates
            and self.booked_index == other.booked_index
            and self.trip_rating == other.trip_rating
        )


@dataclass
class ListingConfig:
    """Distributions behind :func:`generate_listings`."""

    price_log_mean: float = 0.0
    price_log_sigma: float = 0.5
    price_cap: float = 4.0  # nightly price mapped to [0, 1] by price / cap, clipped
    quality_beta: tuple[float, float] = (2.0, 2.0)
    quality_obs_noise: float = 0.1
    appeal_sigma: float = 0.0
    max_building_size: int = 4
    unit_noise: float = 0.02
    archetypes: int = 6  # > 0: amenity vectors cluster around this many centres
    archetype_spread: float = 0.05

    @property
    def price_mean(self) -> float:
        return math.exp(self.price_log_mean + self.price_log_sigma**2 / 2)

    @property
    def price_std(self) -> float:
        s2 = self.price_log_sigma**2
        return math.sqrt((math.exp(s2) - 1.0) * math.exp(2 * self.price_log_mean + s2))


@dataclass
class ChoiceModelConfig:
    utility_weights: tuple[float, ...] = (-3.0, 0.0, 0.0, 1.0, 1.5, 1.0, 0.5, 0.0)
    guests_amenity_weight: float = 1.5  # guests x amenity[0]
    trip_price_weight: float = 1.5  # trip length x price (penalty)
    appeal_weight: float = 1.0
    similarity_penalty: float = 10.0
    bandwidth: float = 0.3
    temperature: float = 1.0
    rating_noise: float = 0.6

    def __post_init__(self):
        if not self.temperature > 0:
            raise ConfigurationError("temperature must be positive")
        if self.similarity_penalty < 0 or self.rating_noise < 0:
            raise ConfigurationError("similarity_penalty and rating_noise must be non-negative")
        if not self.bandwidth > 0:
            raise ConfigurationError("bandwidth must be positive")


@dataclass
class QueryConfig:
    width_range: tuple[float, float] = (0.15, 0.25)


# --- listings ------------------------------------------------------------------


def generate_listings(count: int, feature_width: int = FEATURE_WIDTH, seed: int = 0,
                      cfg: ListingConfig | None = None) -> list[Listing]:
    """Draw ``count`` listings grouped into buildings.

    Feature layout: ``[price, loc_x, loc_y, quality, amenity...]``, all in
    [0, 1].  Nightly price is log-normal and mapped to [0, 1] by
    ``min(price / price_cap, 1)``; quality is a noisy view of a Beta latent
    quality; amenities are uniform.
    """
    if count < 1:
        raise ConfigurationError("count must be at least 1")
    if feature_width < 4:
        raise ConfigurationError("feature_width must be at least 4 (price, x, y, quality)")
    cfg = cfg or ListingConfig()
    rng = np.random.default_rng(seed)
    n_amen = feature_width - 4
    centres = rng.uniform(0.0, 1.0, size=(cfg.archetypes, n_amen)) if cfg.archetypes > 0 else None
    out: list[Listing] = []
    building = 0
    while len(out) < count:
        size = int(rng.integers(1, cfg.max_building_size + 1))
        loc = rng.uniform(0.0, 1.0, size=2)
        if centres is None:
            amen = rng.uniform(0.0, 1.0, size=n_amen)
        else:
            c = centres[rng.integers(0, cfg.archetypes)]
            amen = np.clip(c + rng.normal(0.0, cfg.archetype_spread, size=n_amen), 0.0, 1.0)
        q_lat = rng.beta(*cfg.quality_beta)
        for _ in range(min(size, count - len(out))):
            nightly = float(rng.lognormal(cfg.price_log_mean, cfg.price_log_sigma))
            f = np.empty(feature_width)
            f[PRICE] = min(nightly / cfg.price_cap, 1.0)
            f[LOC_X:LOC_Y + 1] = np.clip(loc + rng.normal(0.0, 0.002, size=2), 0.0, 1.0)
            unit_q = float(np.clip(q_lat + rng.normal(0.0, cfg.unit_noise), 0.0, 1.0))
            f[QUALITY] = np.clip(unit_q + rng.normal(0.0, cfg.quality_obs_noise), 0.0, 1.0)
            f[4:] = np.clip(amen + rng.normal(0.0, cfg.unit_noise, size=n_amen), 0.0, 1.0)
            out.append(Listing(
                id=len(out),
                features=f,
                latent_quality=unit_q,
                latent_appeal=float(rng.normal(0.0, cfg.appeal_sigma)),
                nightly_price=nightly,
                building=building,
            ))
        building += 1
    return out


# --- choice model -------------------------------------------------------------


def base_utilities(query: Query, candidates: list[Listing], cfg: ChoiceModelConfig) -> np.ndarray:
    x = np.stack([c.features for c in candidates])
    w = np.zeros(x.shape[1])
    k = min(len(cfg.utility_weights), x.shape[1])
    w[:k] = cfg.utility_weights[:k]
    u = x @ w
    trip, guests = (list(query.query_features) + [0.0, 0.0])[:2]
    if x.shape[1] > 4:
        u += cfg.guests_amenity_weight * guests * x[:, 4]
    u -= cfg.trip_price_weight * trip * x[:, PRICE]
    appeal = np.array([c.latent_appeal or 0.0 for c in candidates])
    return u + cfg.appeal_weight * appeal


def choice_probabilities(query: Query, candidates: list[Listing], cfg: ChoiceModelConfig) -> np.ndarray:
    if not candidates:
        raise ShapeError("no candidates to choose from")
    u = base_utilities(query, candidates, cfg)
    if cfg.similarity_penalty > 0 and len(candidates) > 1:
        x = np.stack([c.features for c in candidates])
        u = kernels.context_discount(u, x, cfg.similarity_penalty, cfg.bandwidth)
    z = u / cfg.temperature
    e = np.exp(z - z.max())
    return e / e.sum()


def ground_truth_choice(query: Query, candidates: list[Listing], cfg: ChoiceModelConfig,
                        rng_seed=None) -> int:
    """Sample the booked index; ``rng_seed`` may be an int or a Generator."""
    p = choice_probabilities(query, candidates, cfg)
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    return int(rng.choice(len(p), p=p))


def rating_distribution(quality: float, rating_noise: float) -> np.ndarray:
    """P(rating = 1..5) for ``clamp(floor(1 + 4 q + noise + 1/2), 1, 5)``, noise ~ N(0, sd)."""
    mu = 1.0 + 4.0 * quality
    if rating_noise == 0:
        r = int(min(max(math.floor(mu + 0.5), 1), 5))
        p = np.zeros(5)
        p[r - 1] = 1.0
        return p
    cdf = [0.5 * (1 + math.erf((c - mu) / (rating_noise * math.sqrt(2)))) for c in (1.5, 2.5, 3.5, 4.5)]
    edges = [0.0] + cdf + [1.0]
    return np.diff(edges)


def expected_rating(quality: float, rating_noise: float) -> float:
    return float(np.arange(1, 6) @ rating_distribution(quality, rating_noise))


def assign_trip_rating(booked: Listing, rating_noise: float, rng_seed=None) -> int:
    """Five-star rating centred on the listing's latent quality."""
    q = booked.latent_quality
    if q is None:
        q = float(booked.features[QUALITY])
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    noise = rng.normal(0.0, rating_noise) if rating_noise > 0 else 0.0
    return int(min(max(math.floor(1.0 + 4.0 * q + noise + 0.5), 1), 5))


# --- queries and logs -----------------------------------------------------------


def _impression_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def sample_query(rng: np.random.Generator, cfg: QueryConfig | None = None) -> Query:
    cfg = cfg or QueryConfig()
    w, h = rng.uniform(*cfg.width_range, size=2)
    cx = rng.uniform(w / 2, 1 - w / 2)
    cy = rng.uniform(h / 2, 1 - h / 2)
    feats = rng.uniform(0.0, 1.0, size=QUERY_WIDTH)
    seed = int(rng.integers(0, 2**63))
    return Query((cx - w / 2, cx + w / 2, cy - h / 2, cy + h / 2), feats, seed)


def in_bounds(query: Query, pool: list[Listing]) -> list[Listing]:
    return [l for l in pool if query.contains(l)]


def retrieve_candidates(query: Query, pool: list[Listing], limit: int | None = None) -> list[Listing]:
    """Deterministic retrieval: in-bounds listings in id order, truncated to ``limit``."""
    found = sorted(in_bounds(query, pool), key=lambda l: l.id)
    return found if limit is None else found[:limit]


def generate_search_log(num_impressions: int, candidates_per_impression: int, listing_pool: list[Listing],
                        cfg: ChoiceModelConfig, seed: int = 0,
                        query_cfg: QueryConfig | None = None) -> list[Impression]:
    """Simulate ``num_impressions`` searches; each books exactly one listing.

    Queries with fewer than ``candidates_per_impression`` listings in bounds
    are skipped (a warning reports how many).
    """
    n = candidates_per_impression
    if n > len(listing_pool):
        raise ConfigurationError("candidates_per_impression exceeds pool size")
    if num_impressions <= 0:
        return []
    xs = np.array([l.location[0] for l in listing_pool])
    ys = np.array([l.location[1] for l in listing_pool])
    log: list[Impression] = []
    skipped = 0
    for k in range(num_impressions):
        rng = _impression_rng(seed, k)
        query = sample_query(rng, query_cfg)
        x0, x1, y0, y1 = query.map_bounds
        idx = np.flatnonzero((xs >= x0) & (xs <= x1) & (ys >= y0) & (ys <= y1))
        if idx.size < n:
            skipped += 1
            continue
        chosen = rng.choice(idx, size=n, replace=False)
        candidates = [listing_pool[i] for i in chosen]
        booked = ground_truth_choice(query, candidates, cfg, rng)
        rating = assign_trip_rating(candidates[booked], cfg.rating_noise, rng)
        log.append(Impression(query, candidates, booked, rating))
    if skipped:
        if skipped == num_impressions:
            raise GenerationError(f"all {skipped} impressions skipped: too few listings in bounds")
        warnings.warn(f"skipped {skipped} of {num_impressions} impressions with < {n} listings in bounds",
                      stacklevel=2)
    return log


def jitter_query(query: Query, magnitude: float, seed: int = 0) -> Query:
    """Perturb each map bound by uniform(-magnitude, magnitude), clamped to [0, 1]."""
    if magnitude < 0:
        raise ConfigurationError("magnitude must be non-negative")
    if magnitude == 0:
        return Query(query.map_bounds, query.query_features.copy(), query.seed)
    rng = np.random.default_rng(seed)
    b = np.clip(np.array(query.map_bounds) + rng.uniform(-magnitude, magnitude, size=4), 0.0, 1.0)
    if not (b[0] < b[1] and b[2] < b[3]):
        raise NumericError(f"jitter inverted the map bounds: {b.tolist()}")
    return Query(tuple(b.tolist()), query.query_features.copy(), query.seed)


# --- log I/O -------------------------------------------------------------------


def impression_to_dict(imp: Impression) -> dict:
    return {
        "query": {
            "bounds": list(imp.query.map_bounds),
            "features": imp.query.query_features.tolist(),
            "seed": imp.query.seed,
        },
        "candidates": [{"id": c.id, "features": c.features.tolist()} for c in imp.candidates],
        "booked_index": imp.booked_index,
        "trip_rating": imp.trip_rating,
    }


def impression_from_dict(d: dict) -> Impression:
    q = d["query"]
    query = Query(tuple(q["bounds"]), np.array(q["features"], dtype=np.float64), int(q["seed"]))
    cands = [Listing(int(c["id"]), np.array(c["features"], dtype=np.float64)) for c in d["candidates"]]
    booked = int(d["booked_index"])
    rating = int(d["trip_rating"])
    if not 0 <= booked < len(cands):
        raise ValueError(f"booked_index {booked} out of range")
    if not 1 <= rating <= 5:
        raise ValueError(f"trip_rating {rating} out of range")
    return Impression(query, cands, booked, rating)


def save_log(log: list[Impression], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for imp in log:
            fh.write(json.dumps(impression_to_dict(imp)))
            fh.write("\n")


def load_log(path) -> list[Impression]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(impression_from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"{Path(path).name}: {exc}", lineno) from exc
    return out
