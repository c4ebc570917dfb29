"""Biased matrix factorization and candidate window construction.

Training is plain SGD on the regularized squared error of
mu + b_u + b_i + <p_u, q_i>, with the inner loop JIT-compiled. Everything
is seeded and iteration order is fixed, so two trainings from the same
inputs produce bit-identical models.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from numba import njit

from .data import Interaction


class TrainingDivergedError(RuntimeError):
    """SGD produced a non-finite parameter; message names the epoch."""


@dataclass(frozen=True)
class Hyperparams:
    factors: int = 32
    learning_rate: float = 0.005
    regularization: float = 0.05
    epochs: int = 30
    seed: int = 42


@dataclass(frozen=True)
class WindowEntry:
    item_id: int
    score: float


@dataclass(frozen=True)
class CandidateWindow:
    """Top-scoring unseen items for one user, score descending.

    Ties break toward the lower item id. Windows built at different sizes
    from the same model are prefixes of one another.
    """

    user_id: int
    entries: tuple[WindowEntry, ...]

    @property
    def item_ids(self) -> tuple[int, ...]:
        return tuple(e.item_id for e in self.entries)

    def scores(self) -> dict[int, float]:
        return {e.item_id: e.score for e in self.entries}


def window_prefix(window: CandidateWindow, w: int) -> CandidateWindow:
    if w > len(window.entries):
        raise ValueError(f"prefix size {w} exceeds window of {len(window.entries)}")
    return CandidateWindow(user_id=window.user_id, entries=window.entries[:w])


@njit(cache=True)
def _sgd_epoch(u_idx, i_idx, ratings, mu, bu, bi, P, Q, lr, reg):  # pragma: no cover
    se = 0.0
    for k in range(u_idx.shape[0]):
        u = u_idx[k]
        i = i_idx[k]
        pred = mu + bu[u] + bi[i] + np.dot(P[u], Q[i])
        err = ratings[k] - pred
        se += err * err
        bu[u] += lr * (err - reg * bu[u])
        bi[i] += lr * (err - reg * bi[i])
        pu = P[u].copy()
        P[u] += lr * (err * Q[i] - reg * pu)
        Q[i] += lr * (err * pu - reg * Q[i])
    return se


class FactorModel:
    """Trained factors plus id maps. Scoring is pure and bit-stable."""

    def __init__(
        self,
        user_ids: np.ndarray,
        item_ids: np.ndarray,
        mu: float,
        bu: np.ndarray,
        bi: np.ndarray,
        P: np.ndarray,
        Q: np.ndarray,
        hyperparams: Hyperparams,
    ) -> None:
        self.user_ids = user_ids
        self.item_ids = item_ids
        self.mu = mu
        self.bu = bu
        self.bi = bi
        self.P = P
        self.Q = Q
        self.hyperparams = hyperparams
        self.user_index = {int(u): k for k, u in enumerate(user_ids)}
        self.item_index = {int(i): k for k, i in enumerate(item_ids)}

    def score(self, user_id: int, item_id: int) -> float:
        """Predicted rating. Unknown ids fall back to the known bias terms."""
        ui = self.user_index.get(user_id)
        ii = self.item_index.get(item_id)
        if ui is None and ii is None:
            return float(self.mu)
        if ui is None:
            return float(self.mu + self.bi[ii])
        if ii is None:
            return float(self.mu + self.bu[ui])
        return float(self.mu + self.bu[ui] + self.bi[ii] + np.dot(self.P[ui], self.Q[ii]))


def train_mf(train: Sequence[Interaction], hyperparams: Hyperparams) -> FactorModel:
    """Train from scratch. Deterministic: seeded init, one fixed shuffle."""
    if not train:
        raise ValueError("cannot train on an empty interaction list")
    hp = hyperparams
    user_ids = np.array(sorted({x.user_id for x in train}), dtype=np.int64)
    item_ids = np.array(sorted({x.item_id for x in train}), dtype=np.int64)
    user_index = {int(u): k for k, u in enumerate(user_ids)}
    item_index = {int(i): k for k, i in enumerate(item_ids)}

    u_idx = np.array([user_index[x.user_id] for x in train], dtype=np.int64)
    i_idx = np.array([item_index[x.item_id] for x in train], dtype=np.int64)
    ratings = np.array([x.rating for x in train], dtype=np.float64)

    rng = np.random.default_rng(hp.seed)
    P = rng.normal(0.0, 0.1, size=(len(user_ids), hp.factors))
    Q = rng.normal(0.0, 0.1, size=(len(item_ids), hp.factors))
    bu = np.zeros(len(user_ids))
    bi = np.zeros(len(item_ids))
    mu = float(ratings.mean())

    # one shuffle up front; the visit order then stays fixed across epochs
    perm = rng.permutation(len(train))
    u_idx, i_idx, ratings = u_idx[perm], i_idx[perm], ratings[perm]

    for epoch in range(hp.epochs):
        _sgd_epoch(u_idx, i_idx, ratings, mu, bu, bi, P, Q, hp.learning_rate, hp.regularization)
        if not (
            np.all(np.isfinite(bu))
            and np.all(np.isfinite(bi))
            and np.all(np.isfinite(P))
            and np.all(np.isfinite(Q))
        ):
            raise TrainingDivergedError(
                f"non-finite parameters after epoch {epoch + 1}; lower the learning rate"
            )
    return FactorModel(user_ids, item_ids, mu, bu, bi, P, Q, hp)


def top_w_window(
    model: FactorModel,
    user_id: int,
    catalog_ids: Iterable[int],
    seen_item_ids: set[int] | frozenset[int],
    w: int,
) -> CandidateWindow:
    """Highest-scoring w unseen catalog items for one user.

    Seen items never appear. Scores are computed with the same kernel as
    score(), so window entries and point queries agree bit-for-bit.
    """
    unseen = sorted(i for i in set(catalog_ids) if i not in seen_item_ids)
    if w < 1 or w > len(unseen):
        raise ValueError(
            f"window size {w} invalid: user {user_id} has {len(unseen)} unseen items"
        )
    ui = model.user_index.get(user_id)
    mu = model.mu
    scored: list[tuple[float, int]] = []
    if ui is None:
        for i in unseen:
            ii = model.item_index.get(i)
            s = float(mu) if ii is None else float(mu + model.bi[ii])
            scored.append((s, i))
    else:
        bu_u = model.bu[ui]
        pu = model.P[ui]
        for i in unseen:
            ii = model.item_index.get(i)
            if ii is None:
                s = float(mu + bu_u)
            else:
                s = float(mu + bu_u + model.bi[ii] + np.dot(pu, model.Q[ii]))
            scored.append((s, i))
    scored.sort(key=lambda t: (-t[0], t[1]))
    return CandidateWindow(
        user_id=user_id,
        entries=tuple(WindowEntry(item_id=i, score=s) for s, i in scored[:w]),
    )


def save_model(model: FactorModel, path: str | Path) -> None:
    meta = json.dumps({"mu": model.mu, "hyperparams": asdict(model.hyperparams)})
    np.savez(
        path,
        user_ids=model.user_ids,
        item_ids=model.item_ids,
        bu=model.bu,
        bi=model.bi,
        P=model.P,
        Q=model.Q,
        meta=np.array(meta),
    )


def load_model(path: str | Path) -> FactorModel:
    """Reload a saved model bit-exactly (float64 arrays round-trip losslessly)."""
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["meta"]))
        return FactorModel(
            user_ids=z["user_ids"],
            item_ids=z["item_ids"],
            mu=float(meta["mu"]),
            bu=z["bu"],
            bi=z["bi"],
            P=z["P"],
            Q=z["Q"],
            hyperparams=Hyperparams(**meta["hyperparams"]),
        )
