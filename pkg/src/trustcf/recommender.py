"""Influence-weighted neighborhood rating prediction.

A candidate neighbor for predicting user u on item i is any training
rater of i other than u.  Each candidate v gets an influence score

    influence = beta * similarity(u, v) + (1 - beta) * trust(u, v, i)

where similarity is either rating-pattern agreement (Pearson over
co-rated items, negatives clamped to 0) or a social closeness measure,
and trust is the fused facet score.  Up to ``neighbor_count`` candidates
with strictly positive influence, taken in descending influence order
(ties broken by ascending user handle), drive a mean-centered weighted
prediction clipped back into the rating scale.  When no candidate
qualifies the model falls back to u's training mean.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .dataset import RATING_MAX, RATING_MIN, RatingStore
from .errors import UnknownConfiguration, UnknownUser
from .social import SocialGraph, jaccard as _jaccard
from .trust import FacetWeights, TrustProfiles

SIMILARITY_MODES = ("pearson", "rel_direct", "rel_intersection")


class PredictionKind(enum.Enum):
    MODEL = "model"
    FALLBACK = "fallback"


class Prediction(NamedTuple):
    value: float
    kind: PredictionKind


@dataclass(frozen=True)
class InfluenceConfig:
    """Everything that determines how influence is scored."""

    name: str
    similarity_mode: str
    facet_weights: FacetWeights = field(default_factory=FacetWeights)
    beta: float = 0.1
    neighbor_count: int = 50
    min_pearson_overlap: int = 2

    def __post_init__(self):
        if self.similarity_mode not in SIMILARITY_MODES:
            raise ValueError(f"unknown similarity mode {self.similarity_mode!r}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        if self.neighbor_count < 1:
            raise ValueError("neighbor_count must be positive")
        if self.min_pearson_overlap < 1:
            raise ValueError("min_pearson_overlap must be positive")


def _in_sorted(haystack: np.ndarray, needles: np.ndarray) -> np.ndarray:
    """Boolean membership of each needle in a sorted unique array."""
    if haystack.size == 0:
        return np.zeros(needles.size, dtype=bool)
    at = np.minimum(np.searchsorted(haystack, needles), haystack.size - 1)
    return haystack[at] == needles


def pearson(train: RatingStore, u: int, v: int, min_overlap: int = 2) -> float:
    """Pearson agreement over co-rated items, clamped into [0, 1].

    Means are taken over the co-rated subset only.  Fewer than
    ``min_overlap`` co-rated items, or zero variance on either side,
    yields 0.
    """
    iu, ru = train.items_of(u)
    iv, rv = train.items_of(v)
    common, idx_u, idx_v = np.intersect1d(
        iu, iv, assume_unique=True, return_indices=True
    )
    if common.size < min_overlap:
        return 0.0
    x = ru[idx_u]
    y = rv[idx_v]
    xd = x - x.mean()
    yd = y - y.mean()
    den = np.sqrt(float(xd @ xd) * float(yd @ yd))
    if den == 0.0:
        return 0.0
    r = float(xd @ yd) / den
    return min(max(r, 0.0), 1.0)


class TrainedModel:
    """One configuration bound to a training rating store.

    Trust profiles come from the full dataset; only rating-derived state
    (candidate sets, Pearson similarity, user means) is fold-specific.
    Weighted facets the profiles do not provide are dropped; if nothing
    remains, influence degenerates to beta * similarity.
    """

    def __init__(
        self,
        train: RatingStore,
        profiles: TrustProfiles,
        social: SocialGraph,
        config: InfluenceConfig,
    ):
        if train.num_users != social.num_users:
            raise ValueError("training ratings and social graph disagree on users")
        if train.num_users != profiles.store.num_users:
            raise ValueError("training ratings and profiles disagree on users")
        self.train = train
        self.profiles = profiles
        self.social = social
        self.config = config

        active = config.facet_weights.active()
        self._w_rel = active.pop("rel", 0.0)
        self._w_frev = active.pop("frev", 0.0)
        unidim = {n: w for n, w in active.items() if n in profiles.vectors}
        self._w_total = self._w_rel + self._w_frev + sum(unidim.values())
        static = np.zeros(train.num_users, dtype=np.float64)
        for name in sorted(unidim):
            static += unidim[name] * profiles.vectors[name]
        self._static = static
        self._rel_mode = config.facet_weights.rel_mode

    # -- scoring ---------------------------------------------------------

    def _sigma(self, u: int, v_arr: np.ndarray, cache: dict | None) -> np.ndarray:
        mode = self.config.similarity_mode
        if mode == "pearson":
            out = np.empty(v_arr.size, dtype=np.float64)
            min_overlap = self.config.min_pearson_overlap
            for n, v in enumerate(v_arr):
                v = int(v)
                if cache is not None:
                    key = (u, v, min_overlap)
                    got = cache.get(key)
                    if got is None:
                        got = pearson(self.train, u, v, min_overlap)
                        cache[key] = got
                    out[n] = got
                else:
                    out[n] = pearson(self.train, u, v, min_overlap)
            return out
        direct = _in_sorted(self.social.friends_of(u), v_arr)
        sigma = direct.astype(np.float64)
        if mode == "rel_intersection":
            for n, v in enumerate(v_arr):
                if not direct[n]:
                    sigma[n] = _jaccard(self.social, u, int(v))
        return sigma

    def _trust(self, u: int, v_arr: np.ndarray, i: int) -> np.ndarray | None:
        if self._w_total == 0.0:
            return None
        t = self._static[v_arr].copy()
        if self._w_frev > 0:
            raters, scores = self.profiles.frev_for_item(i)
            vals = np.zeros(v_arr.size, dtype=np.float64)
            if raters.size:
                at = np.minimum(np.searchsorted(raters, v_arr), raters.size - 1)
                hit = raters[at] == v_arr
                vals[hit] = scores[at[hit]]
            t += self._w_frev * vals
        if self._w_rel > 0:
            direct = _in_sorted(self.social.friends_of(u), v_arr)
            rel = direct.astype(np.float64)
            if self._rel_mode == "intersection":
                for n, v in enumerate(v_arr):
                    if not direct[n]:
                        rel[n] = _jaccard(self.social, u, int(v))
            t += self._w_rel * rel
        return t / self._w_total

    def _scores(
        self, u: int, i: int, cache: dict | None = None
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(candidates, their ratings of i, influence of each) for (u, i)."""
        users_i, ratings_i, _ = self.train.raters_of(i)
        keep = users_i != u
        v_arr = users_i[keep]
        r_arr = ratings_i[keep]
        if v_arr.size == 0:
            return v_arr, r_arr, np.empty(0, dtype=np.float64)
        beta = self.config.beta
        sigma = self._sigma(u, v_arr, cache)
        trust = self._trust(u, v_arr, i)
        if trust is None:
            infl = beta * sigma
        else:
            infl = beta * sigma + (1.0 - beta) * trust
        return v_arr, r_arr, infl

    # -- public operations -------------------------------------------------

    def influence(self, u: int, v: int, i: int, cache: dict | None = None) -> float:
        """Influence of candidate v on u's prediction for item i."""
        self._check_known(u)
        v_arr = np.array([v], dtype=np.int64)
        beta = self.config.beta
        sigma = self._sigma(u, v_arr, cache)
        trust = self._trust(u, v_arr, i)
        if trust is None:
            return float(beta * sigma[0])
        return float(beta * sigma[0] + (1.0 - beta) * trust[0])

    def select_neighbors(
        self, u: int, i: int, cache: dict | None = None
    ) -> list[tuple[int, float]]:
        """Neighbors of u for item i: (candidate, influence), best first.

        Only strictly positive influence qualifies; ties are broken by
        ascending user handle, and at most ``neighbor_count`` survive.
        """
        self._check_known(u)
        v_arr, _, infl = self._scores(u, i, cache)
        keep = infl > 0.0
        v_arr, infl = v_arr[keep], infl[keep]
        order = np.lexsort((v_arr, -infl))[: self.config.neighbor_count]
        return [(int(v_arr[n]), float(infl[n])) for n in order]

    def predict(self, u: int, i: int, cache: dict | None = None) -> Prediction:
        """Predicted rating of u for i, flagged model-based or fallback."""
        self._check_known(u)
        mean_u = self.train.mean_of(u)
        v_arr, r_arr, infl = self._scores(u, i, cache)
        keep = infl > 0.0
        v_arr, r_arr, infl = v_arr[keep], r_arr[keep], infl[keep]
        if v_arr.size > self.config.neighbor_count:
            order = np.lexsort((v_arr, -infl))[: self.config.neighbor_count]
            v_arr, r_arr, infl = v_arr[order], r_arr[order], infl[order]
        if v_arr.size == 0:
            value = min(max(mean_u, RATING_MIN), RATING_MAX)
            return Prediction(float(value), PredictionKind.FALLBACK)
        deviations = r_arr - self.train.user_means()[v_arr]
        value = mean_u + float(infl @ deviations) / float(np.abs(infl).sum())
        value = min(max(value, RATING_MIN), RATING_MAX)
        return Prediction(float(value), PredictionKind.MODEL)

    def _check_known(self, u: int) -> None:
        if not 0 <= u < self.train.num_users:
            raise UnknownUser(f"user handle {u} out of range")
        if self.train.rating_count_of(u) == 0:
            raise UnknownUser(f"user {u} has no training ratings")


# -- configuration catalogue ------------------------------------------------

_AWARD_FACETS = ("elite", "lup", "opleader", "vis")


def _weights(names: tuple[str, ...], rel_mode: str = "none") -> FacetWeights:
    return FacetWeights({n: 1.0 for n in names}, rel_mode=rel_mode)

_CATALOGUE: dict[str, dict] = {
    # pure rating-pattern similarity; trust switched off entirely
    "U2UCF": dict(similarity_mode="pearson", facet_weights=FacetWeights(), pure=True),
    # pure social closeness
    "U2USocial": dict(
        similarity_mode="rel_intersection", facet_weights=FacetWeights(), pure=True
    ),
    "MTR-U": dict(
        similarity_mode="pearson",
        facet_weights=_weights(("fb", "frev", "rel"), rel_mode="direct"),
    ),
    "MTR-S": dict(
        similarity_mode="pearson",
        facet_weights=_weights(_AWARD_FACETS + ("fb", "frev")),
    ),
    "MTR-F": dict(
        similarity_mode="pearson",
        facet_weights=_weights(_AWARD_FACETS + ("rel",), rel_mode="direct"),
    ),
    "MTR-FS": dict(
        similarity_mode="pearson",
        facet_weights=_weights(_AWARD_FACETS),
    ),
    "MTR-US": dict(
        similarity_mode="pearson",
        facet_weights=_weights(("fb", "frev")),
    ),
    "MTR": dict(
        similarity_mode="pearson",
        facet_weights=_weights(_AWARD_FACETS + ("fb", "frev", "rel"), rel_mode="direct"),
    ),
    "MTRTrust1": dict(
        similarity_mode="rel_direct",
        facet_weights=_weights(_AWARD_FACETS + ("fb", "frev")),
    ),
    "MTRTrust2": dict(
        similarity_mode="rel_intersection",
        facet_weights=_weights(_AWARD_FACETS + ("fb", "frev")),
    ),
}


def config_names() -> tuple[str, ...]:
    return tuple(_CATALOGUE)


def make_config(name: str, beta: float = 0.1, neighbor_count: int = 50) -> InfluenceConfig:
    """Named configuration from the built-in catalogue.

    The two pure-similarity baselines ignore the requested beta: with no
    trust facets the blend is meaningless, so beta is pinned to 1.
    """
    entry = _CATALOGUE.get(name)
    if entry is None:
        raise UnknownConfiguration(
            f"unknown configuration {name!r}; valid names: {', '.join(_CATALOGUE)}"
        )
    beta_eff = 1.0 if entry.get("pure") else beta
    return InfluenceConfig(
        name=name,
        similarity_mode=entry["similarity_mode"],
        facet_weights=entry["facet_weights"],
        beta=beta_eff,
        neighbor_count=neighbor_count,
    )
