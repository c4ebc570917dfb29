"""Shared builders for test fixtures: toy windows, metadata, random instances."""
from __future__ import annotations

from fractions import Fraction

import numpy as np

from slateguard.constraints import ConstraintSet
from slateguard.data import Bucket, ItemMeta
from slateguard.mf import CandidateWindow, WindowEntry

# rows are (item_id, score, "T"|"H", genres); scores must be non-increasing
Row = tuple[int, float, str, tuple[str, ...]]


def meta(item_id: int, bucket: Bucket, genres, count: int = 5) -> ItemMeta:
    return ItemMeta(
        item_id=item_id,
        genres=frozenset(genres),
        bucket=bucket,
        train_interaction_count=count,
    )


def instance(user_id: int, rows: list[Row]) -> tuple[CandidateWindow, dict[int, ItemMeta]]:
    entries = tuple(WindowEntry(item_id=i, score=s) for i, s, _, _ in rows)
    window = CandidateWindow(user_id=user_id, entries=entries)
    metadata = {
        i: meta(i, Bucket.TAIL if b == "T" else Bucket.HEAD, genres)
        for i, _, b, genres in rows
    }
    return window, metadata


def random_instance(
    rng: np.random.Generator,
    w: int,
    genre_pool: tuple[str, ...],
    tail_prob: float = 0.5,
    max_genres_per_item: int = 3,
) -> tuple[CandidateWindow, dict[int, ItemMeta]]:
    scores = np.sort(rng.random(w))[::-1]
    rows: list[Row] = []
    for k in range(w):
        bucket = "T" if rng.random() < tail_prob else "H"
        n_g = int(rng.integers(1, min(max_genres_per_item, len(genre_pool)) + 1))
        genres = tuple(rng.choice(genre_pool, size=n_g, replace=False))
        rows.append((k + 1, float(scores[k]), bucket, genres))
    return instance(0, rows)


def random_constraints(rng: np.random.Generator, n_lo: int, n_hi: int) -> ConstraintSet:
    n = int(rng.integers(n_lo, n_hi + 1))
    tau = Fraction(int(rng.integers(0, 4)), 4)
    kappa = Fraction(int(rng.integers(1, 5)), 4)
    g_min = int(rng.integers(0, 5))
    return ConstraintSet(tau=tau, kappa=kappa, g_min=g_min, n=n)
