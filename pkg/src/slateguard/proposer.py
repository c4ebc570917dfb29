"""Slate proposers: a deterministic negotiation loop, a fault-injecting
variant for stress tests, and an HTTP client for external proposers.

Proposers are untrusted by design. Whatever they emit goes through the
verifier; the only promise the local ones keep is that their certificates
are honest (claims computed from metadata, never asserted). The faulty
proposer keeps that promise too: when it misbehaves, it serves a slate that
genuinely violates policy and says so truthfully in the certificate.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

import numpy as np
import requests

from .certificate import (
    Certificate,
    CertificateError,
    CERT_SCHEMA_VERSION,
    make_certificate,
    parse_certificate,
)
from .constraints import ConstraintSet, Slate
from .data import Bucket, ItemMeta
from .mf import CandidateWindow


class ProposerError(Exception):
    """The proposer failed to produce a parseable proposal at all."""


class ProposerKind(Enum):
    HEURISTIC = "heuristic"
    FAULTY = "faulty"
    REMOTE = "remote"


@dataclass(frozen=True)
class EndpointConfig:
    url: str
    timeout_s: float = 10.0


@dataclass(frozen=True)
class ProposerConfig:
    kind: ProposerKind
    rounds: int = 8
    fault_probability: float = 0.0
    seed: int = 0
    endpoint: EndpointConfig | None = None
    proposer_id: str = ""

    def __post_init__(self) -> None:
        if self.rounds < 1:
            raise ValueError("rounds must be at least 1")
        if not 0.0 <= self.fault_probability <= 1.0:
            raise ValueError("fault_probability must be in [0, 1]")
        if (self.kind is ProposerKind.REMOTE) != (self.endpoint is not None):
            raise ValueError("endpoint must be set for remote proposers and only for them")
        if not self.proposer_id:
            object.__setattr__(self, "proposer_id", self.kind.value)


@dataclass(frozen=True)
class SwapSuggestion:
    remove_item: int
    insert_item: int


@dataclass(frozen=True)
class PolicyCritique:
    violated: tuple[str, ...]  # subset of ("tail", "head", "diversity")
    swap: SwapSuggestion | None


@dataclass(frozen=True)
class NegotiationRound:
    advocate_items: tuple[int, ...]
    critique: PolicyCritique
    accepted: bool


@dataclass(frozen=True)
class Proposal:
    slate: Slate
    certificate: Certificate
    transcript: tuple[NegotiationRound, ...] = field(default=())


def _deficiency(
    items: tuple[int, ...],
    metadata: Mapping[int, ItemMeta],
    constraints: ConstraintSet,
) -> tuple[int, int, int]:
    """(tail shortfall, genre shortfall, head excess); all zero means compliant."""
    tail = sum(1 for i in items if metadata[i].bucket is Bucket.TAIL)
    head = len(items) - tail
    genres: set[str] = set()
    for i in items:
        genres |= metadata[i].genres
    return (
        max(0, constraints.min_tail_count - tail),
        max(0, constraints.g_min - len(genres)),
        max(0, head - constraints.max_head_count),
    )


def _violated_labels(deficiency: tuple[int, int, int]) -> tuple[str, ...]:
    labels = []
    if deficiency[0] > 0:
        labels.append("tail")
    if deficiency[2] > 0:
        labels.append("head")
    if deficiency[1] > 0:
        labels.append("diversity")
    return tuple(labels)


def _pick_removal(
    items: tuple[int, ...],
    metadata: Mapping[int, ItemMeta],
    constraints: ConstraintSet,
    score_of: Mapping[int, float],
) -> int:
    """Lowest-scoring item that is safe to drop.

    Safe means the removal neither breaks a satisfied constraint nor deepens
    an unsatisfied one: tail items stay put while the slate is at or under
    the tail floor, and sole contributors of a needed genre stay put while
    coverage is at or under the minimum. Head items are always droppable
    (the head bound is an upper bound). If nothing is safe, the
    lowest-scoring item goes anyway and the mediator gets to reject.
    """
    tail = sum(1 for i in items if metadata[i].bucket is Bucket.TAIL)
    genres: set[str] = set()
    for i in items:
        genres |= metadata[i].genres
    by_score = sorted(items, key=lambda i: (score_of[i], i))
    for item in by_score:
        meta = metadata[item]
        if meta.bucket is Bucket.TAIL and tail - 1 < constraints.min_tail_count:
            continue
        others: set[str] = set()
        for j in items:
            if j != item:
                others |= metadata[j].genres
        if len(others) < constraints.g_min and len(others) < len(genres):
            continue
        return item
    return by_score[0]


def heuristic_negotiate(
    user_id: int,
    window: CandidateWindow,
    metadata: Mapping[int, ItemMeta],
    constraints: ConstraintSet,
    rounds: int,
    proposer_id: str,
) -> Proposal:
    """Advocate/critic/mediator loop, one swap per round.

    The advocate opens with the top-n by score. Each round the critic
    flags violated constraints and suggests one swap: drop the cheapest
    removable item, insert the unused window item whose addition best
    reduces the deficiency vector (tail shortfall first, then genre
    shortfall, then head excess, then score, then id). The mediator accepts
    a swap only if total deficiency strictly drops; on the first rejected
    swap the loop stops, because the critic is deterministic and would
    repeat itself. The certificate at the end is honest regardless of
    whether the loop converged.
    """
    score_of = window.scores()
    ordered = window.item_ids
    if len(ordered) < constraints.n:
        raise ValueError(
            f"window of {len(ordered)} items cannot open a slate of {constraints.n}"
        )
    current = tuple(ordered[: constraints.n])
    transcript: list[NegotiationRound] = []

    for _ in range(rounds):
        deficiency = _deficiency(current, metadata, constraints)
        if sum(deficiency) == 0:
            break
        labels = _violated_labels(deficiency)
        unused = [i for i in ordered if i not in current]
        if not unused:
            transcript.append(
                NegotiationRound(current, PolicyCritique(labels, None), accepted=False)
            )
            break
        out = _pick_removal(current, metadata, constraints, score_of)
        base = [i for i in current if i != out]
        best_in = None
        best_key = None
        for cand in unused:
            after = _deficiency(tuple(base + [cand]), metadata, constraints)
            key = (after[0], after[1], after[2], -score_of[cand], cand)
            if best_key is None or key < best_key:
                best_in, best_key = cand, key
        swap = SwapSuggestion(remove_item=out, insert_item=best_in)
        candidate = tuple(
            sorted(base + [best_in], key=lambda i: (-score_of[i], i))
        )
        accepted = sum(_deficiency(candidate, metadata, constraints)) < sum(deficiency)
        transcript.append(
            NegotiationRound(current, PolicyCritique(labels, swap), accepted=accepted)
        )
        if not accepted:
            break
        current = candidate

    slate = Slate(user_id=user_id, items=current)
    cert = make_certificate(slate, metadata, constraints, proposer_id=proposer_id)
    return Proposal(slate=slate, certificate=cert, transcript=tuple(transcript))


def _top_n_unchecked(
    user_id: int,
    window: CandidateWindow,
    metadata: Mapping[int, ItemMeta],
    constraints: ConstraintSet,
    proposer_id: str,
) -> Proposal:
    items = tuple(window.item_ids[: constraints.n])
    slate = Slate(user_id=user_id, items=items)
    cert = make_certificate(slate, metadata, constraints, proposer_id=proposer_id)
    labels = _violated_labels(_deficiency(items, metadata, constraints))
    transcript = (
        NegotiationRound(items, PolicyCritique(labels, None), accepted=False),
    )
    return Proposal(slate=slate, certificate=cert, transcript=transcript)


def remote_propose(
    user_id: int,
    window: CandidateWindow,
    constraints: ConstraintSet,
    metadata: Mapping[int, ItemMeta],
    endpoint: EndpointConfig,
) -> Proposal:
    """Ask an external service for a certified slate.

    The request carries the candidate window with per-item bucket and genre
    facts plus the thresholds; the response body must be a bare certificate
    document. Transport failures, HTTP errors, and unparseable bodies all
    raise ProposerError. The response is returned as-is: out-of-window or
    non-compliant slates are the verifier's problem, not ours.
    """
    payload = {
        "schema_version": CERT_SCHEMA_VERSION,
        "user_id": user_id,
        "n": constraints.n,
        "thresholds": {
            "tau": float(constraints.tau),
            "kappa": float(constraints.kappa),
            "g_min": constraints.g_min,
            "n": constraints.n,
        },
        "candidates": [
            {
                "item_id": e.item_id,
                "score": e.score,
                "bucket": metadata[e.item_id].bucket.value,
                "genres": sorted(metadata[e.item_id].genres),
            }
            for e in window.entries
        ],
    }
    try:
        resp = requests.post(endpoint.url, json=payload, timeout=endpoint.timeout_s)
        resp.raise_for_status()
    except requests.RequestException as exc:
        raise ProposerError(f"remote proposer unreachable or errored: {exc}") from exc
    try:
        cert = parse_certificate(resp.content)
    except CertificateError as exc:
        raise ProposerError(f"remote proposer returned a bad certificate: {exc}") from exc
    slate = Slate(user_id=user_id, items=cert.slate_items)
    return Proposal(slate=slate, certificate=cert, transcript=())


def propose(
    user_id: int,
    window: CandidateWindow,
    metadata: Mapping[int, ItemMeta],
    constraints: ConstraintSet,
    config: ProposerConfig,
) -> Proposal:
    """Dispatch to the configured proposer.

    The faulty kind draws once from a per-user stream seeded by
    (config.seed, user_id), so whether a given user is hit does not depend
    on evaluation order.
    """
    if config.kind is ProposerKind.REMOTE:
        assert config.endpoint is not None
        return remote_propose(user_id, window, constraints, metadata, config.endpoint)
    if config.kind is ProposerKind.FAULTY:
        rng = np.random.default_rng([config.seed, user_id])
        if rng.random() < config.fault_probability:
            return _top_n_unchecked(user_id, window, metadata, constraints, config.proposer_id)
    return heuristic_negotiate(
        user_id, window, metadata, constraints, config.rounds, config.proposer_id
    )
