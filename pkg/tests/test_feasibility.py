"""Feasibility oracle: exact decision, witness quality, sweep monotonicity."""
from __future__ import annotations

import numpy as np
import pytest

from slateguard.constraints import ConstraintSet, evaluate_all
from slateguard.feasibility import (
    GuardrailError,
    brute_force_feasible,
    feasibility_sweep,
    is_feasible_exact,
)
from slateguard.mf import window_prefix
from helpers import instance, random_constraints, random_instance

GENRES = ("g0", "g1", "g2", "g3", "g4", "g5")


def test_matches_brute_force_on_random_small_instances():
    rng = np.random.default_rng(42)
    for _ in range(300):
        w = int(rng.integers(6, 13))
        cs = random_constraints(rng, 2, 4)
        window, metadata = random_instance(rng, w, GENRES, tail_prob=float(rng.uniform(0.1, 0.9)))
        got = is_feasible_exact(window, metadata, cs)
        assert got.feasible == brute_force_feasible(window, metadata, cs)


def test_witness_is_always_compliant_and_ordered():
    rng = np.random.default_rng(7)
    seen_feasible = 0
    for _ in range(200):
        cs = random_constraints(rng, 2, 4)
        window, metadata = random_instance(rng, 10, GENRES)
        res = is_feasible_exact(window, metadata, cs)
        if not res.feasible:
            assert res.witness is None
            continue
        seen_feasible += 1
        witness = res.witness
        assert len(witness.items) == cs.n
        assert evaluate_all(witness, metadata, cs).pass_all
        score_of = window.scores()
        keys = [(-score_of[i], i) for i in witness.items]
        assert keys == sorted(keys)
    assert seen_feasible > 50  # the sample must actually exercise the yes-branch


def test_all_head_window_is_infeasible_with_shortage():
    rows = [(i, 1.0 - i / 10, "H", ("g0", "g1", "g2")) for i in range(1, 7)]
    window, metadata = instance(0, rows)
    cs = ConstraintSet(tau="0.5", kappa="1", g_min=1, n=4)
    res = is_feasible_exact(window, metadata, cs)
    assert not res.feasible and res.witness is None
    assert res.tail_shortage == 2  # needs 2 tail items, window has none


def test_genre_scarcity_blocks_even_with_zero_shortage():
    rows = [(i, 1.0 - i / 10, "T", ("g0",) if i % 2 else ("g1",)) for i in range(1, 7)]
    window, metadata = instance(0, rows)
    cs = ConstraintSet(tau="0.5", kappa="0.5", g_min=3, n=4)
    res = is_feasible_exact(window, metadata, cs)
    assert not res.feasible
    assert res.tail_shortage == 0


def test_head_budget_blocks_when_tail_pool_is_thin():
    rows = [(1, 0.9, "T", ("g0",))] + [(i, 0.9 - i / 10, "H", ("g0",)) for i in range(2, 8)]
    window, metadata = instance(0, rows)
    cs = ConstraintSet(tau="0", kappa="0.25", g_min=1, n=4)
    # at most 1 head allowed but only 1 tail exists, so 4 items cannot fit
    assert not is_feasible_exact(window, metadata, cs).feasible


def test_zero_genre_floor_is_allowed():
    rows = [(i, 1.0 - i / 10, "T", ("g0",)) for i in range(1, 5)]
    window, metadata = instance(0, rows)
    cs = ConstraintSet(tau="0", kappa="1", g_min=0, n=2)
    res = is_feasible_exact(window, metadata, cs)
    assert res.feasible
    assert res.witness.items == (1, 2)


def test_window_smaller_than_slate_raises():
    rows = [(1, 0.9, "T", ("g0",)), (2, 0.8, "T", ("g1",))]
    window, metadata = instance(0, rows)
    with pytest.raises(ValueError):
        is_feasible_exact(window, metadata, ConstraintSet(tau="0", kappa="1", g_min=1, n=3))


def test_brute_force_guardrail_refuses_large_instances():
    rng = np.random.default_rng(0)
    window, metadata = random_instance(rng, 50, GENRES)
    cs = ConstraintSet(tau="0.3", kappa="0.7", g_min=3, n=10)
    with pytest.raises(GuardrailError):
        brute_force_feasible(window, metadata, cs)


def test_sweep_is_monotone_per_user_on_a_corpus_sample(corpus, windows100):
    users = sorted(windows100)[:40]
    sample = {u: windows100[u] for u in users}
    sweep = feasibility_sweep(sample, corpus.metadata, corpus.constraints, (20, 60, 100))
    for u in users:
        flags = [sweep.per_user[w][u] for w in (20, 60, 100)]
        assert flags == sorted(flags)  # False never follows True
    counts = [p.feasible_count for p in sweep.points]
    assert counts == sorted(counts)
    for point in sweep.points:
        assert point.total_users == len(users)


def test_sweep_validates_its_inputs(corpus, windows100):
    users = sorted(windows100)[:3]
    sample = {u: windows100[u] for u in users}
    with pytest.raises(ValueError):
        feasibility_sweep(sample, corpus.metadata, corpus.constraints, (60, 20))
    with pytest.raises(ValueError):
        feasibility_sweep(sample, corpus.metadata, corpus.constraints, (20, 120))
    short = {u: window_prefix(windows100[u], 10) for u in users}
    with pytest.raises(ValueError):
        feasibility_sweep(short, corpus.metadata, corpus.constraints, (20,))
