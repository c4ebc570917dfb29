"""Session-wide fixtures: one synthetic corpus, one trained model, one set of windows.

Everything downstream (unit tests and the acceptance suite) shares these, so
the expensive steps run once per session.
"""
from __future__ import annotations

from dataclasses import dataclass

import pytest

from slateguard.constraints import DEFAULT_CONSTRAINTS, ConstraintSet
from slateguard.data import (
    DataSplit,
    Interaction,
    ItemMeta,
    assign_popularity_buckets,
    build_item_metadata,
    load_interactions,
    load_item_genres,
    split_train_test,
)
from slateguard.metrics import build_relevance
from slateguard.mf import CandidateWindow, FactorModel, Hyperparams, train_mf, window_prefix
from slateguard.pipeline import build_windows, seen_items_by_user
from slateguard.synth import generate_corpus

CORPUS_SEED = 7
SPLIT_SEED = 13
HOLDOUT_FRACTION = 0.2
HEAD_FRACTION = 0.2
SWEEP_MAX_W = 100


@dataclass(frozen=True)
class Corpus:
    interactions: list[Interaction]
    split: DataSplit
    metadata: dict[int, ItemMeta]
    catalog_ids: tuple[int, ...]
    constraints: ConstraintSet


@pytest.fixture(scope="session")
def corpus(tmp_path_factory: pytest.TempPathFactory) -> Corpus:
    raw = tmp_path_factory.mktemp("raw")
    paths = generate_corpus(raw, seed=CORPUS_SEED)
    interactions = load_interactions(paths.interactions)
    genres = load_item_genres(paths.items)
    split = split_train_test(interactions, seed=SPLIT_SEED, holdout_fraction=HOLDOUT_FRACTION)
    buckets = assign_popularity_buckets(split.train, genres.keys(), HEAD_FRACTION)
    metadata = build_item_metadata(genres, buckets, split.train)
    return Corpus(
        interactions=interactions,
        split=split,
        metadata=metadata,
        catalog_ids=tuple(sorted(genres)),
        constraints=DEFAULT_CONSTRAINTS,
    )


@pytest.fixture(scope="session")
def model(corpus: Corpus) -> FactorModel:
    return train_mf(corpus.split.train, Hyperparams())


@pytest.fixture(scope="session")
def windows100(corpus: Corpus, model: FactorModel) -> dict[int, CandidateWindow]:
    seen = seen_items_by_user(corpus.split.train)
    users = {x.user_id for x in corpus.interactions}
    return build_windows(model, users, corpus.catalog_ids, seen, SWEEP_MAX_W)


@pytest.fixture(scope="session")
def windows80(windows100: dict[int, CandidateWindow]) -> dict[int, CandidateWindow]:
    return {u: window_prefix(w, 80) for u, w in windows100.items()}


@pytest.fixture(scope="session")
def relevance(corpus: Corpus) -> dict[int, dict[int, int]]:
    return build_relevance(corpus.split.test)
