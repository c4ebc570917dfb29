"""Deterministic synthetic corpus in the classic tab/pipe file layout.

Generates an interaction log and item catalog with the statistical shape
the pipeline cares about: a long-tailed popularity curve, genre structure
rich enough for diversity constraints, and a latent taste signal strong
enough for matrix factorization to learn something real but noisy enough
that it cannot be perfect. Same seed, same bytes.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import GENRE_VOCAB

LATENT_DIM = 8
RATING_BASE = 3.55
TASTE_WEIGHT = 1.35
QUALITY_SD = 0.45
QUALITY_POP_COUPLING = 0.85
USER_BIAS_SD = 0.35
RATING_NOISE_SD = 0.52
EXPOSURE_TASTE_WEIGHT = 0.9
POPULARITY_EXPONENT = 1.05
MIN_USER_INTERACTIONS = 20
MAX_USER_INTERACTIONS = 500

# rough real-world genre frequencies; "unknown" is handled separately
_GENRE_WEIGHTS = {
    "Drama": 725, "Comedy": 505, "Action": 251, "Thriller": 251,
    "Romance": 247, "Adventure": 135, "Children's": 122, "Crime": 109,
    "Sci-Fi": 101, "Horror": 92, "War": 71, "Mystery": 61, "Musical": 56,
    "Documentary": 50, "Animation": 42, "Western": 27, "Film-Noir": 24,
    "Fantasy": 22,
}


@dataclass(frozen=True)
class CorpusPaths:
    interactions: Path
    items: Path


def _apportion(weights: np.ndarray, total: int, low: int, high: int) -> np.ndarray:
    """Integer counts proportional to weights, summing to total exactly."""
    if low * len(weights) > total or high * len(weights) < total:
        raise ValueError("apportionment bounds cannot reach the requested total")
    scaled = weights / weights.sum() * total
    counts = np.clip(np.floor(scaled).astype(np.int64), low, high)
    order = np.argsort(-(scaled - np.floor(scaled)), kind="stable")
    diff = int(total - counts.sum())
    step = 1 if diff > 0 else -1
    k = 0
    while diff != 0:
        u = order[k % len(order)]
        moved = counts[u] + step
        if low <= moved <= high:
            counts[u] = moved
            diff -= step
        k += 1
    return counts


def generate_corpus(
    out_dir: str | Path,
    n_users: int = 943,
    n_items: int = 1682,
    n_interactions: int = 100_000,
    seed: int = 7,
) -> CorpusPaths:
    """Write u.data and u.item under out_dir and return their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    genre_labels = list(_GENRE_WEIGHTS)
    genre_p = np.array([_GENRE_WEIGHTS[g] for g in genre_labels], dtype=np.float64)
    genre_p /= genre_p.sum()

    # genre anchors in latent space; items inherit a blend of their anchors
    anchors = {g: rng.normal(0.0, 1.0, LATENT_DIM) for g in genre_labels}
    item_genres: list[frozenset[str]] = []
    unknown_items = set(rng.choice(n_items, size=2, replace=False).tolist())
    item_vecs = np.zeros((n_items, LATENT_DIM))
    for idx in range(n_items):
        if idx in unknown_items:
            item_genres.append(frozenset({"unknown"}))
            vec = rng.normal(0.0, 1.0, LATENT_DIM)
        else:
            k = rng.choice([1, 2, 3], p=[0.5, 0.35, 0.15])
            picks = rng.choice(len(genre_labels), size=k, replace=False, p=genre_p)
            labels = frozenset(genre_labels[j] for j in picks)
            item_genres.append(labels)
            vec = np.mean([anchors[g] for g in labels], axis=0)
            vec = vec + rng.normal(0.0, 0.35, LATENT_DIM)
        item_vecs[idx] = vec / np.linalg.norm(vec)

    pop_rank = np.empty(n_items, dtype=np.int64)
    pop_rank[rng.permutation(n_items)] = np.arange(n_items)
    pop_weight = (pop_rank + 5.0) ** (-POPULARITY_EXPONENT)
    # popular items skew better: keeps top-of-ranking head-heavy, so small
    # candidate windows really are tail-starved the way live traffic is
    log_pop = np.log(pop_weight)
    pop_z = (log_pop - log_pop.mean()) / log_pop.std()
    quality = QUALITY_SD * (
        QUALITY_POP_COUPLING * pop_z
        + np.sqrt(1.0 - QUALITY_POP_COUPLING**2) * rng.normal(0.0, 1.0, n_items)
    )

    user_vecs = rng.normal(0.0, 1.0, (n_users, LATENT_DIM)) / np.sqrt(LATENT_DIM)
    user_bias = rng.normal(0.0, USER_BIAS_SD, n_users)
    raw = rng.lognormal(mean=np.log(85.0), sigma=0.55, size=n_users)
    counts = _apportion(
        np.clip(raw, MIN_USER_INTERACTIONS, MAX_USER_INTERACTIONS),
        n_interactions,
        MIN_USER_INTERACTIONS,
        MAX_USER_INTERACTIONS,
    )

    lines: list[str] = []
    for u in range(n_users):
        affinity = item_vecs @ user_vecs[u]
        expose = pop_weight * np.exp(EXPOSURE_TASTE_WEIGHT * affinity)
        expose /= expose.sum()
        chosen = rng.choice(n_items, size=int(counts[u]), replace=False, p=expose)
        raw_r = (
            RATING_BASE
            + user_bias[u]
            + quality[chosen]
            + TASTE_WEIGHT * affinity[chosen]
            + rng.normal(0.0, RATING_NOISE_SD, len(chosen))
        )
        stars = np.clip(np.rint(raw_r), 1, 5).astype(np.int64)
        stamps = 874_000_000 + rng.integers(0, 2_000_000, size=len(chosen))
        for item, r, ts in zip(chosen, stars, stamps):
            lines.append(f"{u + 1}\t{int(item) + 1}\t{int(r)}\t{int(ts)}")

    data_path = out / "u.data"
    data_path.write_text("\n".join(lines) + "\n", encoding="ascii")

    item_lines = []
    for idx in range(n_items):
        flags = "|".join("1" if g in item_genres[idx] else "0" for g in GENRE_VOCAB)
        year = 1990 + (idx % 9)
        item_lines.append(
            f"{idx + 1}|Item {idx + 1} ({year})|01-Jan-{year}||"
            f"http://example.invalid/item/{idx + 1}|{flags}"
        )
    item_path = out / "u.item"
    item_path.write_text("\n".join(item_lines) + "\n", encoding="latin-1")
    return CorpusPaths(interactions=data_path, items=item_path)
