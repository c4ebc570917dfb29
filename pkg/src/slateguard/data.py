"""Dataset ingest: interaction logs, item metadata, popularity buckets, splits.

File formats follow the classic MovieLens 100K layout: a tab-separated
interaction log (user, item, rating, timestamp) and a pipe-separated item
catalog whose last 19 fields are binary genre flags in a fixed order.
"""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

# Canonical genre flag order for the 19 trailing columns of the item file.
GENRE_VOCAB: tuple[str, ...] = (
    "unknown",
    "Action",
    "Adventure",
    "Animation",
    "Children's",
    "Comedy",
    "Crime",
    "Documentary",
    "Drama",
    "Fantasy",
    "Film-Noir",
    "Horror",
    "Musical",
    "Mystery",
    "Romance",
    "Sci-Fi",
    "Thriller",
    "War",
    "Western",
)

ITEM_FILE_FIELDS = 5 + len(GENRE_VOCAB)  # id|title|date|video date|url|19 flags


class DataFormatError(ValueError):
    """A data file exists but a line in it does not parse."""


class Bucket(Enum):
    HEAD = "HEAD"
    TAIL = "TAIL"


@dataclass(frozen=True)
class Interaction:
    user_id: int
    item_id: int
    rating: int
    timestamp: int


@dataclass(frozen=True)
class ItemMeta:
    """Per-item facts the governance layer needs: genres and popularity bucket."""

    item_id: int
    genres: frozenset[str]
    bucket: Bucket
    train_interaction_count: int


@dataclass(frozen=True)
class DataSplit:
    train: tuple[Interaction, ...]
    test: tuple[Interaction, ...]
    seed: int


def load_interactions(path: str | Path) -> list[Interaction]:
    """Parse a tab-separated interaction log.

    Raises FileNotFoundError if the file is missing and DataFormatError
    (naming the 1-based line number) for any malformed line. Ratings must
    be integers in 1..5.
    """
    out: list[Interaction] = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise DataFormatError(
                    f"{path}: line {lineno}: expected 4 tab-separated fields, got {len(parts)}"
                )
            try:
                user_id, item_id, rating, ts = (int(p) for p in parts)
            except ValueError as exc:
                raise DataFormatError(f"{path}: line {lineno}: non-integer field") from exc
            if not 1 <= rating <= 5:
                raise DataFormatError(
                    f"{path}: line {lineno}: rating {rating} outside 1..5"
                )
            out.append(Interaction(user_id, item_id, rating, ts))
    return out


def load_item_genres(path: str | Path) -> dict[int, frozenset[str]]:
    """Parse the pipe-separated item catalog into an id -> genre-set map.

    The file is Latin-1 encoded. Each row must have exactly 24 fields; the
    last 19 are 0/1 genre flags. A row with every flag zero fails closed:
    genre-less items are expected to carry the explicit "unknown" flag.
    """
    out: dict[int, frozenset[str]] = {}
    with open(path, "r", encoding="latin-1") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            parts = line.split("|")
            if len(parts) != ITEM_FILE_FIELDS:
                raise DataFormatError(
                    f"{path}: line {lineno}: expected {ITEM_FILE_FIELDS} pipe-separated "
                    f"fields, got {len(parts)}"
                )
            try:
                item_id = int(parts[0])
            except ValueError as exc:
                raise DataFormatError(f"{path}: line {lineno}: bad item id") from exc
            if item_id in out:
                raise DataFormatError(f"{path}: line {lineno}: duplicate item id {item_id}")
            genres = set()
            for label, flag in zip(GENRE_VOCAB, parts[5:]):
                if flag == "1":
                    genres.add(label)
                elif flag != "0":
                    raise DataFormatError(
                        f"{path}: line {lineno}: genre flag must be 0 or 1, got {flag!r}"
                    )
            if not genres:
                raise DataFormatError(
                    f"{path}: line {lineno}: item {item_id} has no genre flags set"
                )
            out[item_id] = frozenset(genres)
    return out


def assign_popularity_buckets(
    train: Sequence[Interaction],
    catalog_ids: Iterable[int],
    head_fraction: float | str | Fraction,
) -> dict[int, Bucket]:
    """Split the catalog into HEAD (popular) and TAIL items.

    HEAD is the top ceil(head_fraction * |catalog|) items by training
    interaction count, ties broken by ascending item id. Items with zero
    training interactions are always TAIL, even when that leaves the HEAD
    set short of its quota.
    """
    frac = Fraction(str(head_fraction))
    if not 0 <= frac <= 1:
        raise ValueError(f"head_fraction must be in [0, 1], got {head_fraction}")
    catalog = sorted(set(catalog_ids))
    counts = Counter(x.item_id for x in train)
    quota = math.ceil(frac * len(catalog))
    # sort: count descending, then id ascending
    ranked = sorted(catalog, key=lambda i: (-counts[i], i))
    buckets = {i: Bucket.TAIL for i in catalog}
    for i in ranked[:quota]:
        if counts[i] > 0:
            buckets[i] = Bucket.HEAD
    return buckets


def build_item_metadata(
    genres: Mapping[int, frozenset[str]],
    buckets: Mapping[int, Bucket],
    train: Sequence[Interaction],
) -> dict[int, ItemMeta]:
    counts = Counter(x.item_id for x in train)
    return {
        i: ItemMeta(
            item_id=i,
            genres=genres[i],
            bucket=buckets[i],
            train_interaction_count=counts[i],
        )
        for i in genres
    }


def split_train_test(
    interactions: Sequence[Interaction],
    seed: int,
    holdout_fraction: float = 0.2,
) -> DataSplit:
    """Per-user random holdout split.

    Each user with at least 5 interactions contributes ceil(f * n) held-out
    interactions, clamped to n-1 so at least one stays in train. Users with
    fewer than 5 keep everything in train. Users are processed in ascending
    id order from a single seeded generator, so the split does not depend on
    input ordering beyond each user's own interaction order.
    """
    if not 0 < holdout_fraction < 1:
        raise ValueError(f"holdout_fraction must be in (0, 1), got {holdout_fraction}")
    by_user: dict[int, list[Interaction]] = {}
    for x in interactions:
        by_user.setdefault(x.user_id, []).append(x)
    rng = np.random.default_rng(seed)
    train: list[Interaction] = []
    test: list[Interaction] = []
    for user_id in sorted(by_user):
        rows = by_user[user_id]
        n = len(rows)
        if n < 5:
            train.extend(rows)
            continue
        n_test = min(math.ceil(holdout_fraction * n), n - 1)
        held = set(rng.choice(n, size=n_test, replace=False).tolist())
        for idx, x in enumerate(rows):
            (test if idx in held else train).append(x)
    return DataSplit(train=tuple(train), test=tuple(test), seed=seed)


def write_catalog(metadata: Mapping[int, ItemMeta], path: str | Path) -> None:
    """Persist item metadata as JSONL, one item per line, id-sorted."""
    with open(path, "w", encoding="utf-8") as fh:
        for item_id in sorted(metadata):
            m = metadata[item_id]
            fh.write(
                json.dumps(
                    {
                        "item_id": m.item_id,
                        "genres": sorted(m.genres),
                        "bucket": m.bucket.value,
                        "train_count": m.train_interaction_count,
                    }
                )
                + "\n"
            )


def load_catalog(path: str | Path) -> dict[int, ItemMeta]:
    out: dict[int, ItemMeta] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                meta = ItemMeta(
                    item_id=obj["item_id"],
                    genres=frozenset(obj["genres"]),
                    bucket=Bucket(obj["bucket"]),
                    train_interaction_count=obj["train_count"],
                )
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise DataFormatError(f"{path}: line {lineno}: bad catalog row: {exc}") from exc
            out[meta.item_id] = meta
    return out


def write_interactions(interactions: Sequence[Interaction], path: str | Path) -> None:
    """Write interactions back out in the same tab-separated layout."""
    with open(path, "w", encoding="ascii") as fh:
        for x in interactions:
            fh.write(f"{x.user_id}\t{x.item_id}\t{x.rating}\t{x.timestamp}\n")


def catalog_summary(metadata: Mapping[int, ItemMeta]) -> dict:
    """Aggregate counts used in experiment reports and sanity checks."""
    n_head = sum(1 for m in metadata.values() if m.bucket is Bucket.HEAD)
    genre_counts = Counter(g for m in metadata.values() for g in m.genres)
    return {
        "n_items": len(metadata),
        "n_head": n_head,
        "n_tail": len(metadata) - n_head,
        "genre_counts": dict(sorted(genre_counts.items())),
    }
