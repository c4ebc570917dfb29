"""Exact window feasibility: can ANY size-n subset of a candidate window
satisfy the policy?

The decision runs in three stages. First, pure counting: the number of tail
items t in a compliant slate must lie in an interval fixed by the tail
floor, the head ceiling, and the window's tail/head supply; an empty
interval is an immediate no. Second, the window's genre union must reach
g_min. Third, for each candidate set T of g_min target genres, a dynamic
program over cover bitmasks finds the cheapest way to cover T, where cost
is the pair (tail items used, head items used) and "cheapest" is the Pareto
frontier of those pairs; a cover with frontier pair (a, b) completes into a
full slate iff some tail count t with a <= t and b <= n - t fits the
counting interval. Items are deduplicated per (genre-contribution, bucket)
class: two items contributing the same genres from the same bucket are
interchangeable for covering, and the fill step only consumes counts.

The brute-force oracle enumerates every size-n subset and exists to check
the DP, not to be fast.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Mapping, Sequence

from .constraints import ConstraintSet, MissingMetadataError, Slate
from .data import Bucket, ItemMeta
from .mf import CandidateWindow, window_prefix

BRUTE_FORCE_LIMIT = 1_000_000


class GuardrailError(ValueError):
    """An exhaustive enumeration was refused because the instance is too big."""


@dataclass(frozen=True)
class FeasibilityResult:
    user_id: int
    window_size: int
    feasible: bool
    witness: Slate | None
    tail_shortage: int  # how many tail items the window lacks; 0 when enough


@dataclass(frozen=True)
class SweepPoint:
    window_size: int
    feasible_count: int
    total_users: int
    tail_shortage_sum: int

    @property
    def feasibility_rate(self) -> float:
        return self.feasible_count / self.total_users

    @property
    def mean_tail_shortage(self) -> float:
        return self.tail_shortage_sum / self.total_users


@dataclass(frozen=True)
class SweepResult:
    points: tuple[SweepPoint, ...]
    per_user: dict[int, dict[int, bool]]  # window_size -> user_id -> feasible


def _window_facts(
    window: CandidateWindow, metadata: Mapping[int, ItemMeta]
) -> list[tuple[int, float, bool, frozenset[str]]]:
    facts = []
    for e in window.entries:
        meta = metadata.get(e.item_id)
        if meta is None:
            raise MissingMetadataError(f"no metadata for window item {e.item_id}")
        facts.append((e.item_id, e.score, meta.bucket is Bucket.TAIL, meta.genres))
    return facts


def is_feasible_exact(
    window: CandidateWindow,
    metadata: Mapping[int, ItemMeta],
    constraints: ConstraintSet,
) -> FeasibilityResult:
    """Exact feasibility decision with a compliant witness slate when yes.

    The window must hold at least n items. The witness, when present,
    satisfies every constraint (cheap to re-check and tests do).
    """
    n = constraints.n
    facts = _window_facts(window, metadata)
    if len(facts) < n:
        raise ValueError(f"window of {len(facts)} items cannot fill a slate of {n}")

    tail_pool = [(item, score) for item, score, is_tail, _ in facts if is_tail]
    head_pool = [(item, score) for item, score, is_tail, _ in facts if not is_tail]
    t_avail, h_avail = len(tail_pool), len(head_pool)
    shortage = max(0, constraints.min_tail_count - t_avail)

    t_lo = max(constraints.min_tail_count, n - constraints.max_head_count, n - h_avail)
    t_hi = min(n, t_avail)

    def no() -> FeasibilityResult:
        return FeasibilityResult(
            user_id=window.user_id,
            window_size=len(facts),
            feasible=False,
            witness=None,
            tail_shortage=shortage,
        )

    if t_lo > t_hi:
        return no()

    union = sorted({g for _, _, _, genres in facts for g in genres})
    if len(union) < constraints.g_min:
        return no()

    score_of = {item: score for item, score, _, _ in facts}
    is_tail_of = {item: is_tail for item, _, is_tail, _ in facts}

    for target in combinations(union, constraints.g_min):
        bit = {g: 1 << k for k, g in enumerate(target)}
        full = (1 << len(target)) - 1

        # one representative per (contribution mask, bucket) class; the
        # window is score-descending, so first seen is the best scorer
        classes: dict[tuple[int, bool], int] = {}
        for item, _, tail_flag, genres in facts:
            mask = 0
            for g in genres:
                mask |= bit.get(g, 0)
            if mask == 0:
                continue
            classes.setdefault((mask, tail_flag), item)

        # frontier[mask] -> Pareto-minimal (tail_used, head_used, cover items)
        frontier: dict[int, list[tuple[int, int, tuple[int, ...]]]] = {
            0: [(0, 0, ())]
        }
        for (mask, tail_flag), item in sorted(classes.items()):
            additions: list[tuple[int, int, int, tuple[int, ...]]] = []
            for have, states in frontier.items():
                grown = have | mask
                if grown == have:
                    continue  # adds no coverage, only cost: never helps
                for a, b, items in states:
                    na = a + (1 if tail_flag else 0)
                    nb = b + (0 if tail_flag else 1)
                    if na > t_hi or nb > n - t_lo:
                        continue
                    additions.append((grown, na, nb, items + (item,)))
            for grown, na, nb, items in additions:
                states = frontier.setdefault(grown, [])
                if any(a <= na and b <= nb for a, b, _ in states):
                    continue
                states[:] = [s for s in states if not (na <= s[0] and nb <= s[1])]
                states.append((na, nb, items))

        for a, b, cover in frontier.get(full, ()):  # Pareto frontier is tiny
            lo, hi = max(t_lo, a), min(t_hi, n - b)
            if lo > hi:
                continue
            t = lo
            used = set(cover)
            picks = list(cover)
            need_tail = t - a
            for item, _ in tail_pool:
                if need_tail == 0:
                    break
                if item not in used:
                    picks.append(item)
                    used.add(item)
                    need_tail -= 1
            need_head = n - t - b
            for item, _ in head_pool:
                if need_head == 0:
                    break
                if item not in used:
                    picks.append(item)
                    used.add(item)
                    need_head -= 1
            picks.sort(key=lambda i: (-score_of[i], i))
            witness = Slate(user_id=window.user_id, items=tuple(picks))
            assert len(picks) == n and sum(is_tail_of[i] for i in picks) == t
            return FeasibilityResult(
                user_id=window.user_id,
                window_size=len(facts),
                feasible=True,
                witness=witness,
                tail_shortage=0,
            )
    return no()


def brute_force_feasible(
    window: CandidateWindow,
    metadata: Mapping[int, ItemMeta],
    constraints: ConstraintSet,
) -> bool:
    """Reference decision by exhaustive enumeration of size-n subsets."""
    facts = _window_facts(window, metadata)
    n = constraints.n
    if len(facts) < n:
        raise ValueError(f"window of {len(facts)} items cannot fill a slate of {n}")
    if math.comb(len(facts), n) > BRUTE_FORCE_LIMIT:
        raise GuardrailError(
            f"C({len(facts)}, {n}) exceeds the enumeration limit of {BRUTE_FORCE_LIMIT}"
        )
    union = sorted({g for _, _, _, genres in facts for g in genres})
    bit = {g: 1 << k for k, g in enumerate(union)}
    compact = [
        (1 if is_tail else 0, sum(bit[g] for g in genres))
        for _, _, is_tail, genres in facts
    ]
    min_tail, max_head = constraints.min_tail_count, constraints.max_head_count
    for combo in combinations(compact, n):
        tails = sum(c[0] for c in combo)
        if tails < min_tail or (n - tails) > max_head:
            continue
        mask = 0
        for c in combo:
            mask |= c[1]
        if mask.bit_count() >= constraints.g_min:
            return True
    return False


def feasibility_sweep(
    windows: Mapping[int, CandidateWindow],
    metadata: Mapping[int, ItemMeta],
    constraints: ConstraintSet,
    window_sizes: Sequence[int],
) -> SweepResult:
    """Feasibility rate and tail-shortage curve across window sizes.

    Every window must already hold max(window_sizes) entries; smaller sizes
    are taken as prefixes, which is exactly how the recommender builds them.
    """
    sizes = list(window_sizes)
    if sizes != sorted(set(sizes)) or not sizes or sizes[0] < constraints.n:
        raise ValueError(
            f"window sizes must be strictly increasing and at least n={constraints.n}"
        )
    w_max = sizes[-1]
    for user_id, window in windows.items():
        if len(window.entries) < w_max:
            raise ValueError(
                f"user {user_id}: window has {len(window.entries)} entries, sweep needs {w_max}"
            )
    points: list[SweepPoint] = []
    per_user: dict[int, dict[int, bool]] = {}
    for w in sizes:
        flags: dict[int, bool] = {}
        shortage_sum = 0
        for user_id in sorted(windows):
            res = is_feasible_exact(window_prefix(windows[user_id], w), metadata, constraints)
            flags[user_id] = res.feasible
            shortage_sum += res.tail_shortage
        per_user[w] = flags
        points.append(
            SweepPoint(
                window_size=w,
                feasible_count=sum(flags.values()),
                total_users=len(flags),
                tail_shortage_sum=shortage_sum,
            )
        )
    return SweepResult(points=tuple(points), per_user=per_user)
