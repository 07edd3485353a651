"""Reputation facets and their weighted fusion into a trust score.

Every facet is normalized into [0, 1] against the population observed in
the full dataset, never per fold:

* endorsement   count_v / max_a count_a         (platform awards, fans, ...)
* visibility    apprec_v / (max_a apprec_a * contrib_v), clamped to [0, 1]
* contribution  feedback-sum_v / max_a feedback-sum_a
* review        feedback(v, i) / max_a feedback(a, i), per item

Zero denominators yield 0, so silent populations produce all-zero facets
instead of errors.  Fusion is a weighted mean over the facets that carry
positive weight; facets a profile does not provide are dropped from both
numerator and denominator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .dataset import Dataset, RatingStore, ReviewFeedback
from .errors import AllWeightsZero, WrongProvenance
from .social import SocialGraph, rel_direct, rel_social_intersection

REL_MODES = ("direct", "intersection", "none")

# facet names understood by fusion, besides "rel" and "frev"
UNIDIMENSIONAL_FACETS = (
    "elite", "lup", "opleader", "vis", "fb", "fendors", "fcontr",
)


def indicator_fendors(counts) -> np.ndarray:
    """Endorsement counts scaled by the population maximum."""
    arr = np.asarray(counts, dtype=np.float64)
    if arr.size and arr.min() < 0:
        raise ValueError("endorsement counts must be non-negative")
    top = arr.max() if arr.size else 0.0
    if top <= 0:
        return np.zeros_like(arr)
    return arr / top


def indicator_visibility(appreciations, contributions) -> np.ndarray:
    """Appreciations per contribution, scaled by the population's best.

    Users with no contributions get 0; the ratio is clamped into [0, 1]
    so a tiny contributor with outsized appreciation cannot exceed the
    ceiling.
    """
    apprec = np.asarray(appreciations, dtype=np.float64)
    contrib = np.asarray(contributions, dtype=np.float64)
    if apprec.shape != contrib.shape:
        raise ValueError("appreciation and contribution arrays must align")
    if apprec.size and (apprec.min() < 0 or contrib.min() < 0):
        raise ValueError("counts must be non-negative")
    top = apprec.max() if apprec.size else 0.0
    out = np.zeros_like(apprec)
    if top <= 0:
        return out
    active = contrib > 0
    out[active] = apprec[active] / (top * contrib[active])
    return np.clip(out, 0.0, 1.0)


def indicator_fcontr(feedback_sums) -> np.ndarray:
    """Total feedback received, scaled by the population maximum."""
    return indicator_fendors(feedback_sums)


def indicator_frev(rf: ReviewFeedback) -> np.ndarray:
    """Per-review feedback scaled by the best-rated review of the same item.

    Returns values aligned with the rating store's canonical order; items
    whose reviews drew no feedback at all yield 0 for every review.
    """
    totals = rf.totals().astype(np.float64)
    item_max = rf.item_max_totals().astype(np.float64)
    denom = item_max[rf.store.item_idx]
    out = np.zeros_like(totals)
    nz = denom > 0
    out[nz] = totals[nz] / denom[nz]
    return out


@dataclass(frozen=True)
class TrustProfiles:
    """Facet values for one dataset: per-user vectors plus per-review scores.

    ``frev`` aligns with ``store``'s canonical rating order.  A user who
    did not rate an item has review score 0 for it by convention.
    """

    store: RatingStore
    vectors: Mapping[str, np.ndarray]
    frev: np.ndarray

    def __post_init__(self):
        for name, vec in self.vectors.items():
            if name not in UNIDIMENSIONAL_FACETS:
                raise ValueError(f"unknown facet {name!r}")
            if vec.shape != (self.store.num_users,):
                raise ValueError(f"facet {name!r} must have one value per user")
            vec.setflags(write=False)
        if self.frev.shape != (len(self.store),):
            raise ValueError("frev must align with the rating store")
        self.frev.setflags(write=False)

    def frev_for_item(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """(rater handles ascending, their review scores) for item i."""
        users, _, pos = self.store.raters_of(i)
        return users, self.frev[pos]

    def frev_of(self, v: int, i: int) -> float:
        users, values = self.frev_for_item(i)
        at = np.searchsorted(users, v)
        if at < users.size and users[at] == v:
            return float(values[at])
        return 0.0


@dataclass(frozen=True)
class FacetWeights:
    """Fusion weights per facet name, plus how relatedness is measured.

    ``weights`` may mention any unidimensional facet, "frev" and "rel".
    A positive "rel" weight requires a relatedness mode other than
    "none".
    """

    weights: Mapping[str, float] = field(default_factory=dict)
    rel_mode: str = "none"

    def __post_init__(self):
        if self.rel_mode not in REL_MODES:
            raise ValueError(f"unknown rel mode {self.rel_mode!r}")
        known = set(UNIDIMENSIONAL_FACETS) | {"frev", "rel"}
        for name, w in self.weights.items():
            if name not in known:
                raise ValueError(f"unknown facet {name!r}")
            if not 0.0 <= float(w) <= 1.0:
                raise ValueError(f"weight for {name!r} must lie in [0, 1]")
        if self.weights.get("rel", 0.0) > 0 and self.rel_mode == "none":
            raise ValueError("positive rel weight requires a rel mode")

    def active(self) -> dict[str, float]:
        return {n: float(w) for n, w in self.weights.items() if w > 0}


def build_yelp_profiles(d: Dataset) -> TrustProfiles:
    """Facets for a Yelp-shaped dataset.

    elite years and fans are endorsement counts; compliments double as an
    endorsement count (lup) and as the appreciation side of visibility,
    with reviews+tips as the contribution side; review and tip feedback
    feeds the contribution facet.
    """
    if d.provenance not in ("yelp", "synthetic"):
        raise WrongProvenance(f"expected a yelp-shaped dataset, got {d.provenance!r}")
    fb = d.feedback
    compliments = fb.col("more") + fb.col("thx") + fb.col("gw")
    contributions = fb.col("review_count") + fb.col("tip_count")
    received = (
        fb.col("review_useful")
        + fb.col("review_funny")
        + fb.col("review_cool")
        + fb.col("tip_likes")
    )
    vectors = {
        "elite": indicator_fendors(fb.col("elite_years")),
        "lup": indicator_fendors(compliments),
        "opleader": indicator_fendors(fb.col("fans")),
        "vis": indicator_visibility(compliments, contributions),
        "fb": indicator_fcontr(received),
    }
    return TrustProfiles(d.ratings, vectors, indicator_frev(d.review_feedback))


def build_librarything_profiles(d: Dataset) -> TrustProfiles:
    """Facets for LibraryThing: helpfulness only, no platform awards."""
    if d.provenance != "librarything":
        raise WrongProvenance(
            f"expected a librarything dataset, got {d.provenance!r}"
        )
    vectors = {"fb": indicator_fcontr(d.feedback.col("nhelpful_total"))}
    return TrustProfiles(d.ratings, vectors, indicator_frev(d.review_feedback))


def build_profiles(d: Dataset) -> TrustProfiles:
    if d.provenance == "librarything":
        return build_librarything_profiles(d)
    return build_yelp_profiles(d)


def _rel_value(g: SocialGraph, mode: str, u: int, v: int) -> float:
    if mode == "direct":
        return rel_direct(g, u, v)
    if mode == "intersection":
        return rel_social_intersection(g, u, v)
    raise ValueError(f"unknown rel mode {mode!r}")


def fuse_trust(
    profiles: TrustProfiles,
    graph: SocialGraph,
    weights: FacetWeights,
    u: int,
    v: int,
    i: int,
) -> float:
    """Weighted mean of v's facet values from u's point of view for item i.

    Only facets with positive weight participate; weighted facets the
    profiles do not provide are dropped entirely.  Raises AllWeightsZero
    when nothing is left to fuse.
    """
    active = weights.active()
    numerator = 0.0
    denominator = 0.0
    for name in sorted(active):
        w = active[name]
        if name == "rel":
            value = _rel_value(graph, weights.rel_mode, u, v)
        elif name == "frev":
            value = profiles.frev_of(v, i)
        elif name in profiles.vectors:
            value = float(profiles.vectors[name][v])
        else:
            continue
        numerator += w * value
        denominator += w
    if denominator == 0.0:
        raise AllWeightsZero("no usable facet carries positive weight")
    return numerator / denominator
