"""Slate-level governance constraints and their exact evaluation.

Three predicates over a fixed-size slate: a minimum fraction of long-tail
items, a maximum fraction of head (popular) items, and a minimum number of
distinct genres covered. All comparisons are exact rational arithmetic;
floats never decide a boundary case.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

from .data import Bucket, ItemMeta


class MissingMetadataError(LookupError):
    """A slate references an item with no metadata; evaluation fails closed."""


def exact_fraction(value: float | int | str | Fraction) -> Fraction:
    """Convert a threshold to an exact Fraction.

    Floats go through str() first, so a config value written as 0.3 means
    exactly 3/10 rather than the nearest binary double.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("bool is not a threshold")
    return Fraction(str(value))


@dataclass(frozen=True)
class ConstraintSet:
    """Policy thresholds for one slate size.

    tau: minimum tail fraction, kappa: maximum head fraction, g_min: minimum
    distinct genres, n: slate size. tau and kappa are inclusive bounds.
    """

    tau: Fraction
    kappa: Fraction
    g_min: int
    n: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "tau", exact_fraction(self.tau))
        object.__setattr__(self, "kappa", exact_fraction(self.kappa))
        if not 0 <= self.tau <= 1:
            raise ValueError(f"tau must be in [0, 1], got {self.tau}")
        if not 0 <= self.kappa <= 1:
            raise ValueError(f"kappa must be in [0, 1], got {self.kappa}")
        if not (isinstance(self.g_min, int) and self.g_min >= 0):
            raise ValueError(f"g_min must be a non-negative int, got {self.g_min!r}")
        if not (isinstance(self.n, int) and self.n >= 1):
            raise ValueError(f"n must be a positive int, got {self.n!r}")

    @property
    def min_tail_count(self) -> int:
        """Smallest integer tail count that satisfies the tail floor."""
        return math.ceil(self.tau * self.n)

    @property
    def max_head_count(self) -> int:
        """Largest integer head count that satisfies the head ceiling."""
        return math.floor(self.kappa * self.n)


DEFAULT_CONSTRAINTS = ConstraintSet(
    tau=Fraction(3, 10), kappa=Fraction(7, 10), g_min=3, n=10
)


@dataclass(frozen=True)
class Slate:
    """An ordered recommendation list for one user. Items must be distinct."""

    user_id: int
    items: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "items", tuple(self.items))
        if len(set(self.items)) != len(self.items):
            raise ValueError(f"slate for user {self.user_id} has duplicate items")


@dataclass(frozen=True)
class ConstraintReport:
    """Exact measured values plus per-constraint verdicts for one slate."""

    tail_fraction: Fraction
    head_fraction: Fraction
    covered_genres: int
    pass_tail: bool
    pass_head: bool
    pass_diversity: bool

    @property
    def pass_all(self) -> bool:
        return self.pass_tail and self.pass_head and self.pass_diversity


def _require_meta(slate: Slate, metadata: Mapping[int, ItemMeta]) -> list[ItemMeta]:
    metas = []
    for item_id in slate.items:
        meta = metadata.get(item_id)
        if meta is None:
            raise MissingMetadataError(
                f"no metadata for item {item_id} in slate for user {slate.user_id}"
            )
        metas.append(meta)
    return metas


def tail_fraction(slate: Slate, metadata: Mapping[int, ItemMeta]) -> Fraction:
    """Fraction of slate items in the TAIL bucket, as an exact rational."""
    metas = _require_meta(slate, metadata)
    tail = sum(1 for m in metas if m.bucket is Bucket.TAIL)
    return Fraction(tail, len(metas))


def head_fraction(slate: Slate, metadata: Mapping[int, ItemMeta]) -> Fraction:
    """Fraction of slate items in the HEAD bucket. Complements tail_fraction."""
    metas = _require_meta(slate, metadata)
    head = sum(1 for m in metas if m.bucket is Bucket.HEAD)
    return Fraction(head, len(metas))


def covered_genres(slate: Slate, metadata: Mapping[int, ItemMeta]) -> frozenset[str]:
    """Union of genres over the slate."""
    metas = _require_meta(slate, metadata)
    out: set[str] = set()
    for m in metas:
        out |= m.genres
    return frozenset(out)


def evaluate_all(
    slate: Slate,
    metadata: Mapping[int, ItemMeta],
    constraints: ConstraintSet,
) -> ConstraintReport:
    """Evaluate every constraint on a full-size slate.

    The slate must have exactly constraints.n items; metadata must cover all
    of them (MissingMetadataError otherwise). Boundary cases pass: a tail
    fraction exactly at tau or a head fraction exactly at kappa satisfies
    the policy.
    """
    if len(slate.items) != constraints.n:
        raise ValueError(
            f"slate has {len(slate.items)} items, policy slate size is {constraints.n}"
        )
    metas = _require_meta(slate, metadata)
    tail = sum(1 for m in metas if m.bucket is Bucket.TAIL)
    head = len(metas) - tail
    genres: set[str] = set()
    for m in metas:
        genres |= m.genres
    t_frac = Fraction(tail, constraints.n)
    h_frac = Fraction(head, constraints.n)
    return ConstraintReport(
        tail_fraction=t_frac,
        head_fraction=h_frac,
        covered_genres=len(genres),
        pass_tail=t_frac >= constraints.tau,
        pass_head=h_frac <= constraints.kappa,
        pass_diversity=len(genres) >= constraints.g_min,
    )
