"""Deterministic slate repair and the exhaustive constrained optimum.

repair_greedy builds a compliant slate from a candidate window in three
phases: cover genres, fill the tail quota, then top up by score under the
head ceiling. The greedy result is re-checked; if it falls short (phase A
can overspend head slots on pathological windows), the exact feasibility
witness takes over. Consequence: repair returns None if and only if the
window is infeasible. That "if and only if" is load-bearing for the
pipeline's pass-rate guarantee and is what the completeness tests pin down.
"""
from __future__ import annotations

import math
from itertools import combinations
from typing import Mapping

from .constraints import ConstraintSet, Slate, evaluate_all
from .data import ItemMeta
from .feasibility import (
    BRUTE_FORCE_LIMIT,
    GuardrailError,
    _window_facts,
    is_feasible_exact,
)
from .mf import CandidateWindow


def repair_greedy(
    window: CandidateWindow,
    metadata: Mapping[int, ItemMeta],
    constraints: ConstraintSet,
) -> Slate | None:
    """Build a compliant slate from the window, or None if none exists.

    Phase A picks items that add unseen genres until g_min genres are
    covered, preferring (most new genres, tail over head, higher score,
    lower id). Phase B tops up the tail quota with the best remaining tail
    items. Phase C fills by score, skipping head items once the head budget
    is spent. Ties always break toward the lower item id, so repair is a
    pure function of its inputs.
    """
    n = constraints.n
    facts = _window_facts(window, metadata)
    if len(facts) < n:
        raise ValueError(f"window of {len(facts)} items cannot fill a slate of {n}")

    chosen: list[int] = []
    used: set[int] = set()
    covered: set[str] = set()
    tail_count = 0
    head_count = 0

    def take(item: int, is_tail: bool, genres: frozenset[str]) -> None:
        nonlocal tail_count, head_count
        chosen.append(item)
        used.add(item)
        covered.update(genres)
        if is_tail:
            tail_count += 1
        else:
            head_count += 1

    # phase A: genre coverage
    while len(chosen) < n and len(covered) < constraints.g_min:
        best = None
        best_key = None
        for item, score, is_tail, genres in facts:
            if item in used:
                continue
            new = len(genres - covered)
            if new == 0:
                continue
            key = (new, 1 if is_tail else 0, score, -item)
            if best_key is None or key > best_key:
                best, best_key = (item, is_tail, genres), key
        if best is None:
            break
        take(*best)

    # phase B: tail quota, best remaining tail items (facts are score-desc)
    if tail_count < constraints.min_tail_count:
        for item, _, is_tail, genres in facts:
            if len(chosen) >= n or tail_count >= constraints.min_tail_count:
                break
            if is_tail and item not in used:
                take(item, is_tail, genres)

    # phase C: fill by score under the head ceiling
    for item, _, is_tail, genres in facts:
        if len(chosen) >= n:
            break
        if item in used:
            continue
        if not is_tail and head_count >= constraints.max_head_count:
            continue
        take(item, is_tail, genres)

    if len(chosen) == n:
        score_of = {item: score for item, score, _, _ in facts}
        chosen.sort(key=lambda i: (-score_of[i], i))
        slate = Slate(user_id=window.user_id, items=tuple(chosen))
        if evaluate_all(slate, metadata, constraints).pass_all:
            return slate

    # greedy missed; the exact witness settles it either way
    return is_feasible_exact(window, metadata, constraints).witness


def greedy_reference_slate(
    window: CandidateWindow,
    metadata: Mapping[int, ItemMeta],
    constraints: ConstraintSet,
) -> Slate | None:
    """The constraint-aware baseline: repair applied straight to the window."""
    return repair_greedy(window, metadata, constraints)


def constrained_optimum_exact(
    window: CandidateWindow,
    metadata: Mapping[int, ItemMeta],
    constraints: ConstraintSet,
) -> Slate | None:
    """Highest-scoring compliant slate by full enumeration, None if infeasible.

    Ties on total score go to the lexicographically smallest sorted id
    tuple. Refuses instances where C(|window|, n) exceeds the enumeration
    limit. This is the oracle the repair-quality tests compare against.
    """
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
        (item, score, 1 if is_tail else 0, sum(bit[g] for g in genres))
        for item, score, is_tail, genres in facts
    ]
    min_tail, max_head = constraints.min_tail_count, constraints.max_head_count

    best_ids: tuple[int, ...] | None = None
    best_score = -math.inf
    for combo in combinations(compact, n):
        tails = sum(c[2] for c in combo)
        if tails < min_tail or (n - tails) > max_head:
            continue
        mask = 0
        for c in combo:
            mask |= c[3]
        if mask.bit_count() < constraints.g_min:
            continue
        total = sum(c[1] for c in combo)
        ids = tuple(sorted(c[0] for c in combo))
        if total > best_score or (total == best_score and (best_ids is None or ids < best_ids)):
            best_score = total
            best_ids = ids
    if best_ids is None:
        return None
    score_of = {item: score for item, score, _, _ in facts}
    ordered = sorted(best_ids, key=lambda i: (-score_of[i], i))
    return Slate(user_id=window.user_id, items=tuple(ordered))
