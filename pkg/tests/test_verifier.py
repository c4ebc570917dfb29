"""Verifier behavior: fail-closed, complete reason codes, never raises."""
from __future__ import annotations

import json

from slateguard.certificate import (
    Certificate,
    certificate_to_dict,
    make_certificate,
    serialize_certificate,
)
from slateguard.constraints import ConstraintSet, Slate, evaluate_all
from slateguard.verifier import FailureReason, verify
from helpers import instance

CS = ConstraintSet(tau="0.5", kappa="0.5", g_min=2, n=4)

ROWS = [
    (1, 0.9, "T", ("Drama",)),
    (2, 0.8, "H", ("Comedy",)),
    (3, 0.7, "T", ("War",)),
    (4, 0.6, "H", ("Comedy", "Drama")),
    (5, 0.5, "T", ("Horror",)),
    (6, 0.4, "H", ("Comedy",)),
]


def _fixture(items=(1, 2, 3, 4)):
    _, metadata = instance(9, ROWS)
    slate = Slate(user_id=9, items=items)
    cert = make_certificate(slate, metadata, CS, proposer_id="unit")
    return slate, cert, metadata


def test_honest_certificate_on_compliant_slate_is_accepted():
    slate, cert, metadata = _fixture()
    verdict = verify(slate, cert, metadata, CS)
    assert verdict.accepted
    assert verdict.failure_reasons == ()
    assert verdict.report is not None and verdict.report.pass_all


def test_accepts_serialized_form_identically():
    slate, cert, metadata = _fixture()
    a = verify(slate, cert, metadata, CS)
    b = verify(slate, serialize_certificate(cert), metadata, CS)
    assert a == b


def test_honest_certificate_cannot_launder_a_violating_slate():
    # 1 tail / 3 head violates both bucket constraints at n=4
    slate, cert, metadata = _fixture(items=(2, 4, 6, 1))
    verdict = verify(slate, cert, metadata, CS)
    assert not verdict.accepted
    assert verdict.failure_reasons == (
        FailureReason.VIOLATES_TAIL,
        FailureReason.VIOLATES_HEAD,
    )
    assert verdict.report is not None and not verdict.report.pass_all


def test_garbage_bytes_are_malformed_with_no_report():
    slate, _, metadata = _fixture()
    verdict = verify(slate, b"{broken", metadata, CS)
    assert not verdict.accepted
    assert verdict.failure_reasons == (FailureReason.MALFORMED_CERT,)
    assert verdict.report is None


def test_threshold_echo_must_match_enforced_policy():
    slate, cert, metadata = _fixture()
    other = ConstraintSet(tau="0.25", kappa="0.5", g_min=2, n=4)
    forged = Certificate(
        schema_version=cert.schema_version,
        user_id=cert.user_id,
        slate_items=cert.slate_items,
        claimed_tail_items=cert.claimed_tail_items,
        claimed_covered_genres=cert.claimed_covered_genres,
        thresholds=other,
        proposer_id=cert.proposer_id,
    )
    verdict = verify(slate, forged, metadata, CS)
    assert FailureReason.MALFORMED_CERT in verdict.failure_reasons


def test_certificate_for_other_items_is_a_slate_mismatch():
    slate, _, metadata = _fixture()
    other = Slate(user_id=9, items=(1, 2, 3, 5))
    cert = make_certificate(other, metadata, CS, proposer_id="unit")
    verdict = verify(slate, cert, metadata, CS)
    assert FailureReason.SLATE_MISMATCH in verdict.failure_reasons


def test_item_order_is_part_of_the_slate_identity():
    slate, _, metadata = _fixture()
    reordered = Slate(user_id=9, items=(2, 1, 3, 4))
    cert = make_certificate(reordered, metadata, CS, proposer_id="unit")
    verdict = verify(slate, cert, metadata, CS)
    assert FailureReason.SLATE_MISMATCH in verdict.failure_reasons


def test_wrong_user_is_a_slate_mismatch():
    slate, cert, metadata = _fixture()
    verdict = verify(Slate(user_id=8, items=slate.items), cert, metadata, CS)
    assert FailureReason.SLATE_MISMATCH in verdict.failure_reasons


def _mutated(cert, **overrides):
    doc = certificate_to_dict(cert)
    doc.update(overrides)
    return json.dumps(doc)


def test_dropped_tail_claim_is_caught():
    slate, cert, metadata = _fixture()
    forged = _mutated(cert, claimed_tail_items=list(cert.claimed_tail_items[1:]))
    verdict = verify(slate, forged, metadata, CS)
    assert verdict.failure_reasons == (FailureReason.CLAIM_TAIL_MISMATCH,)


def test_head_item_claimed_as_tail_is_caught():
    slate, cert, metadata = _fixture()
    forged = _mutated(cert, claimed_tail_items=sorted((*cert.claimed_tail_items, 2)))
    verdict = verify(slate, forged, metadata, CS)
    assert verdict.failure_reasons == (FailureReason.CLAIM_TAIL_MISMATCH,)


def test_phantom_genre_claim_is_caught():
    slate, cert, metadata = _fixture()
    forged = _mutated(
        cert, claimed_covered_genres=sorted((*cert.claimed_covered_genres, "Opera"))
    )
    verdict = verify(slate, forged, metadata, CS)
    assert verdict.failure_reasons == (FailureReason.CLAIM_GENRE_MISMATCH,)


def test_dropped_genre_claim_is_caught():
    slate, cert, metadata = _fixture()
    forged = _mutated(cert, claimed_covered_genres=list(cert.claimed_covered_genres[1:]))
    verdict = verify(slate, forged, metadata, CS)
    assert verdict.failure_reasons == (FailureReason.CLAIM_GENRE_MISMATCH,)


def test_missing_metadata_fails_closed_without_judging_claims():
    slate, cert, metadata = _fixture()
    del metadata[3]
    verdict = verify(slate, cert, metadata, CS)
    assert not verdict.accepted
    assert verdict.failure_reasons == (FailureReason.METADATA_MISSING,)
    assert verdict.report is None


def test_reasons_come_back_in_declaration_order():
    # forged tail claim on a slate that also violates diversity
    rows = [(i, 1.0 - i / 10, "T", ("Drama",)) for i in range(1, 5)]
    _, metadata = instance(9, rows)
    slate = Slate(user_id=9, items=(1, 2, 3, 4))
    cert = make_certificate(slate, metadata, CS, proposer_id="unit")
    forged = _mutated(cert, claimed_tail_items=[1, 2, 3])
    verdict = verify(slate, forged, metadata, CS)
    assert verdict.failure_reasons == (
        FailureReason.CLAIM_TAIL_MISMATCH,
        FailureReason.VIOLATES_DIV,
    )


def test_verifier_never_raises_on_adversarial_documents():
    slate, cert, metadata = _fixture()
    hostile = [
        b"",
        b"\xff\xfe garbage",
        json.dumps(None),
        json.dumps({"schema_version": "1"}),
        _mutated(cert, user_id=2**63),
        _mutated(cert, thresholds={"tau": float("nan")} ),
        serialize_certificate(cert) + b"trailing",
    ]
    for doc in hostile:
        verdict = verify(slate, doc, metadata, CS)  # must not raise
        assert not verdict.accepted
        assert verdict.failure_reasons


def test_acceptance_equals_ground_truth_on_fixture_slates():
    _, metadata = instance(9, ROWS)
    from itertools import combinations
    for combo in combinations([r[0] for r in ROWS], 4):
        slate = Slate(user_id=9, items=combo)
        cert = make_certificate(slate, metadata, CS, proposer_id="unit")
        verdict = verify(slate, cert, metadata, CS)
        assert verdict.accepted == evaluate_all(slate, metadata, CS).pass_all
