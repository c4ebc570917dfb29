"""Ranking quality metrics and the paired bootstrap significance test."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .data import Interaction


def dcg_at_k(ranked: Sequence[int], relevance: Mapping[int, int], k: int) -> float:
    """Discounted cumulative gain with exponential gains.

    Gain for the item at 1-based position j is (2^rel - 1) / log2(j + 1);
    items absent from the relevance map contribute zero.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    total = 0.0
    for pos, item in enumerate(ranked[:k], start=1):
        rel = relevance.get(item, 0)
        if rel:
            total += (2.0 ** rel - 1.0) / math.log2(pos + 1)
    return total


def ideal_dcg_at_k(relevance: Mapping[int, int], k: int) -> float:
    gains = sorted((r for r in relevance.values() if r > 0), reverse=True)
    total = 0.0
    for pos, rel in enumerate(gains[:k], start=1):
        total += (2.0 ** rel - 1.0) / math.log2(pos + 1)
    return total


def ndcg_at_k(ranked: Sequence[int], relevance: Mapping[int, int], k: int) -> float:
    """Normalized DCG in [0, 1]. Users with no positive held-out items score 0."""
    ideal = ideal_dcg_at_k(relevance, k)
    if ideal == 0.0:
        return 0.0
    return dcg_at_k(ranked, relevance, k) / ideal


def build_relevance(test: Iterable[Interaction]) -> dict[int, dict[int, int]]:
    """Per-user item -> held-out rating map (the graded relevance oracle)."""
    out: dict[int, dict[int, int]] = {}
    for x in test:
        out.setdefault(x.user_id, {})[x.item_id] = x.rating
    return out


def pass_rate(accepted: Mapping[int, bool], subset: Iterable[int] | None = None) -> float:
    """Fraction of users whose slate was accepted, as one exact division.

    With a subset, only those users count; every subset id must be present
    in the map. An empty user set has no defined rate and raises.
    """
    ids = list(subset) if subset is not None else list(accepted)
    if not ids:
        raise ValueError("pass rate over an empty user set is undefined")
    hits = sum(1 for u in ids if accepted[u])
    return hits / len(ids)


@dataclass(frozen=True)
class BootstrapResult:
    mean_diff: float
    p_value: float
    resamples: int
    seed: int


def paired_bootstrap_test(
    a: Sequence[float],
    b: Sequence[float],
    resamples: int = 10_000,
    seed: int = 0,
) -> BootstrapResult:
    """Two-sided paired bootstrap on the mean difference a - b.

    Resamples user indices with replacement (one seeded generator, one
    integer matrix, fully vectorized) and reports the doubled, add-one
    smoothed fraction of resampled means on the far side of zero, clamped
    to [0, 1]. A mean difference of exactly zero reports p = 1.
    """
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.ndim != 1 or x.shape != y.shape:
        raise ValueError("paired samples must be 1-d and of equal length")
    if x.size == 0:
        raise ValueError("paired samples must be non-empty")
    if resamples < 1:
        raise ValueError("resamples must be positive")
    diff = x - y
    observed = float(diff.mean())
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, diff.size, size=(resamples, diff.size))
    means = diff[idx].mean(axis=1)
    if observed == 0.0:
        p = 1.0
    elif observed > 0.0:
        p = 2.0 * (int(np.count_nonzero(means <= 0.0)) + 1) / (resamples + 1)
    else:
        p = 2.0 * (int(np.count_nonzero(means >= 0.0)) + 1) / (resamples + 1)
    return BootstrapResult(
        mean_diff=observed, p_value=min(1.0, p), resamples=resamples, seed=seed
    )
