"""Ranked-list retrieval metrics: rank-k (CMC), AP/mAP, and PNR/ASP/SD/mSD.

Everything here is a pure function of its inputs. A rank list is one
query's view of the gallery: similarity scores sorted descending plus a
boolean flag per position marking whether that gallery item shares the
query's identity.

The similarity-distribution (SD) score of a list is PNR * ASP, where

    PNR = 1 - exp(-k * x)   with x = mean(matched sims) / mean(unmatched sims)
    ASP = mean over matched ranks j of
          (sum of matched sims in the top j) / (sum of all sims in the top j)

computed on min-max normalized similarities. Unlike AP and rank-k, SD is
sensitive to the actual similarity values, not just the match positions.
mSD is the mean SD over all scorable queries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .exceptions import InvalidInputError, UnscorableQueryError


@dataclass(frozen=True)
class MetricConfig:
    """Knobs for the metric engine.

    msd_k: exponent scale of the PNR saturating transform (> 0).
    rank_cutoffs: the k values reported by CMC / rank-k.
    epsilon: floor for the unmatched-mean denominator in PNR, which also
        serves as the denominator when a list has no unmatched entries.
    """

    msd_k: float = 1.0
    rank_cutoffs: tuple[int, ...] = (1, 5, 10)
    epsilon: float = 1e-6

    def __post_init__(self) -> None:
        if not self.msd_k > 0:
            raise InvalidInputError("msd_k must be positive")
        if not self.epsilon > 0:
            raise InvalidInputError("epsilon must be positive")
        cutoffs = tuple(sorted({int(c) for c in self.rank_cutoffs}))
        if not cutoffs or cutoffs[0] < 1:
            raise InvalidInputError("rank_cutoffs must be a non-empty set of positive integers")
        object.__setattr__(self, "rank_cutoffs", cutoffs)


@dataclass(frozen=True)
class RankedList:
    """Similarities of one query against the gallery, sorted descending.

    matched[i] is True when the gallery item at rank i+1 shares the
    query's identity.
    """

    sims: np.ndarray
    matched: np.ndarray

    def __post_init__(self) -> None:
        sims = np.asarray(self.sims, dtype=np.float64)
        matched = np.asarray(self.matched, dtype=bool)
        if sims.ndim != 1 or sims.size == 0:
            raise InvalidInputError("rank list must be a non-empty 1-d sequence")
        if matched.shape != sims.shape:
            raise InvalidInputError("matched flags must have the same length as sims")
        if not np.all(np.isfinite(sims)):
            raise InvalidInputError("similarities must be finite")
        if np.any(sims[1:] > sims[:-1]):
            raise InvalidInputError("similarities must be non-increasing")
        object.__setattr__(self, "sims", sims)
        object.__setattr__(self, "matched", matched)

    def __len__(self) -> int:
        return int(self.sims.size)


@dataclass(frozen=True)
class NormalizedRankedList:
    """A RankedList whose scores were linearly mapped into [0, 1].

    Constructed by normalize_ranklist; ordering and match flags are
    identical to the source list.
    """

    sims: np.ndarray
    matched: np.ndarray

    def __len__(self) -> int:
        return int(self.sims.size)


@dataclass(frozen=True)
class QueryMetrics:
    """Per-query scores. first_hit_rank is None when nothing matched."""

    ap: float
    sd: float
    pnr: float
    asp: float
    first_hit_rank: int | None


def normalize_ranklist(ranklist: RankedList) -> NormalizedRankedList:
    """Min-max normalize a rank list's similarities into [0, 1].

    A constant list has no range to map, so every score becomes 0.5,
    which keeps the matched/unmatched mean ratio neutral.
    """
    sims = ranklist.sims
    span = sims[0] - sims[-1]
    if span == 0.0:
        norm = np.full_like(sims, 0.5)
    else:
        norm = (sims - sims[-1]) / span
    return NormalizedRankedList(sims=norm, matched=ranklist.matched)


# Largest double below 1.0; keeps PNR (and so SD) inside [0, 1) even when
# exp(-k*x) underflows for saturated ratios.
_BELOW_ONE = math.nextafter(1.0, 0.0)


def _pnr_from_normalized(sims: np.ndarray, matched: np.ndarray, cfg: MetricConfig) -> float:
    matched_sum = float(sims[matched].sum())
    n_pos = int(matched.sum())
    n_neg = sims.size - n_pos
    matched_mean = matched_sum / n_pos
    unmatched_mean = float(sims[~matched].sum()) / n_neg if n_neg else 0.0
    x = matched_mean / max(unmatched_mean, cfg.epsilon)
    return min(1.0 - math.exp(-cfg.msd_k * x), _BELOW_ONE)


def _asp_from_normalized(sims: np.ndarray, matched: np.ndarray) -> float:
    total_prefix = np.cumsum(sims)
    matched_prefix = np.cumsum(np.where(matched, sims, 0.0))
    hits = np.flatnonzero(matched)
    denom = total_prefix[hits]
    numer = matched_prefix[hits]
    # A zero prefix sum can only happen when every sim in the prefix is 0,
    # in which case the matched sum is 0 too and the ratio counts as 1.
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(denom > 0.0, numer / denom, 1.0)
    return float(ratios.mean())


def _ap_from_positions(hits: np.ndarray) -> float:
    ranks = hits + 1.0
    return float((np.arange(1, hits.size + 1) / ranks).mean())


def score_sorted(sims: np.ndarray, matched: np.ndarray, cfg: MetricConfig) -> QueryMetrics | None:
    """Score one query from pre-sorted arrays; the fast path for the harness.

    Trusts that sims is descending. Returns None when no entry is matched
    (the query is unscorable and should be skipped and counted).
    """
    matched = np.asarray(matched, dtype=bool)
    hits = np.flatnonzero(matched)
    if hits.size == 0:
        return None
    sims = np.asarray(sims, dtype=np.float64)
    span = sims[0] - sims[-1]
    norm = np.full_like(sims, 0.5) if span == 0.0 else (sims - sims[-1]) / span
    pnr = _pnr_from_normalized(norm, matched, cfg)
    asp = _asp_from_normalized(norm, matched)
    return QueryMetrics(
        ap=_ap_from_positions(hits),
        sd=pnr * asp,
        pnr=pnr,
        asp=asp,
        first_hit_rank=int(hits[0]) + 1,
    )


def compute_pnr(normalized: NormalizedRankedList, cfg: MetricConfig | None = None) -> float:
    """Saturating transform 1 - exp(-k*x) of the matched/unmatched mean ratio x.

    The unmatched mean is floored at cfg.epsilon, so a list with no
    unmatched entries (or all-zero unmatched scores) saturates toward 1.
    """
    cfg = cfg or MetricConfig()
    matched = normalized.matched
    if not matched.any():
        raise UnscorableQueryError("cannot compute PNR: no matched entries")
    return _pnr_from_normalized(normalized.sims, matched, cfg)


def compute_asp(normalized: NormalizedRankedList) -> float:
    """Average, over matched ranks, of the matched share of each prefix's similarity mass."""
    if not normalized.matched.any():
        raise UnscorableQueryError("cannot compute ASP: no matched entries")
    return _asp_from_normalized(normalized.sims, normalized.matched)


def compute_ap(ranklist: RankedList) -> float:
    """Non-interpolated average precision: mean of k / rank_of_kth_hit."""
    hits = np.flatnonzero(ranklist.matched)
    if hits.size == 0:
        raise UnscorableQueryError("cannot compute AP: no matched entries")
    return _ap_from_positions(hits)


def compute_sd(ranklist: RankedList, cfg: MetricConfig | None = None) -> QueryMetrics:
    """Normalize a raw rank list and score it (SD = PNR * ASP, plus AP)."""
    cfg = cfg or MetricConfig()
    result = score_sorted(ranklist.sims, ranklist.matched, cfg)
    if result is None:
        raise UnscorableQueryError("cannot compute SD: no matched entries")
    return result


def _scored(queries: Iterable[RankedList], cfg: MetricConfig) -> list[QueryMetrics]:
    """Per-query metrics for scorable queries, preserving input order (skip-and-count policy)."""
    out = []
    for ranklist in queries:
        m = score_sorted(ranklist.sims, ranklist.matched, cfg)
        if m is not None:
            out.append(m)
    return out


def compute_msd(queries: Sequence[RankedList], cfg: MetricConfig | None = None) -> float:
    """Mean SD over queries that have at least one matched entry."""
    cfg = cfg or MetricConfig()
    scored = _scored(queries, cfg)
    if not scored:
        raise InvalidInputError("no scorable queries (every list lacks matched entries)")
    return float(np.mean([m.sd for m in scored]))


def compute_map(queries: Sequence[RankedList], cfg: MetricConfig | None = None) -> float:
    """Mean AP over scorable queries."""
    cfg = cfg or MetricConfig()
    scored = _scored(queries, cfg)
    if not scored:
        raise InvalidInputError("no scorable queries (every list lacks matched entries)")
    return float(np.mean([m.ap for m in scored]))


def compute_cmc(queries: Sequence[RankedList], cutoffs: Iterable[int]) -> dict[int, float]:
    """Fraction of scorable queries whose first hit falls within each cutoff."""
    cutoffs = tuple(sorted({int(c) for c in cutoffs}))
    if not cutoffs or cutoffs[0] < 1:
        raise InvalidInputError("cutoffs must be positive integers")
    first_hits = []
    for ranklist in queries:
        hits = np.flatnonzero(ranklist.matched)
        if hits.size:
            first_hits.append(int(hits[0]) + 1)
    if not first_hits:
        raise InvalidInputError("no scorable queries (every list lacks matched entries)")
    ranks = np.array(first_hits)
    return {k: float(np.mean(ranks <= k)) for k in cutoffs}
