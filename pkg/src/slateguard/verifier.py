"""Deterministic slate verification.

The verifier is the trust boundary: it takes a slate, a certificate of
unknown provenance, item metadata, and the enforced policy, and recomputes
everything from scratch. It never trusts a claim, never raises, and always
returns a verdict. Failure modes are reported as reason codes, all
applicable ones at once, in a fixed order.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping

from .certificate import (
    Certificate,
    CertificateError,
    consistent_with_slate,
    parse_certificate,
)
from .constraints import ConstraintReport, ConstraintSet, Slate, evaluate_all
from .data import Bucket, ItemMeta


class FailureReason(Enum):
    """Rejection reason codes. Declaration order is report order."""

    MALFORMED_CERT = "MALFORMED_CERT"
    SLATE_MISMATCH = "SLATE_MISMATCH"
    CLAIM_TAIL_MISMATCH = "CLAIM_TAIL_MISMATCH"
    CLAIM_GENRE_MISMATCH = "CLAIM_GENRE_MISMATCH"
    METADATA_MISSING = "METADATA_MISSING"
    VIOLATES_TAIL = "VIOLATES_TAIL"
    VIOLATES_HEAD = "VIOLATES_HEAD"
    VIOLATES_DIV = "VIOLATES_DIV"


_REASON_ORDER = {reason: i for i, reason in enumerate(FailureReason)}


@dataclass(frozen=True)
class VerifierVerdict:
    """Outcome of one verification. accepted iff failure_reasons is empty."""

    accepted: bool
    failure_reasons: tuple[FailureReason, ...]
    report: ConstraintReport | None


def verify(
    slate: Slate,
    certificate: Certificate | bytes | str,
    metadata: Mapping[int, ItemMeta],
    constraints: ConstraintSet,
) -> VerifierVerdict:
    """Check a (slate, certificate) pair against the enforced policy.

    Accepts iff all of the following hold: the certificate parses under the
    strict schema; its echoed thresholds equal the enforced constraints (a
    proof for a different policy is no proof); it certifies exactly this
    slate (same user, same items, same order); metadata covers every slate
    item; the certificate's tail and genre claims equal the ground truth
    recomputed from metadata (set equality, not sufficiency); and the slate
    itself satisfies every constraint.

    Failures never raise; they come back as reason codes. Claims are judged
    against the slate under verification, and the constraint report is
    attached whenever the certificate parsed, metadata was complete, and the
    slate has the policy's size.
    """
    reasons: set[FailureReason] = set()

    cert: Certificate | None
    if isinstance(certificate, Certificate):
        cert = certificate
    else:
        try:
            cert = parse_certificate(certificate)
        except CertificateError:
            cert = None
            reasons.add(FailureReason.MALFORMED_CERT)

    if cert is not None and cert.thresholds != constraints:
        # certified thresholds must be the enforced ones, exactly
        reasons.add(FailureReason.MALFORMED_CERT)

    if cert is not None and not consistent_with_slate(cert, slate):
        reasons.add(FailureReason.SLATE_MISMATCH)

    missing = [i for i in slate.items if i not in metadata]
    if missing:
        reasons.add(FailureReason.METADATA_MISSING)

    if cert is not None and not missing:
        true_tail = {
            i for i in slate.items if metadata[i].bucket is Bucket.TAIL
        }
        if set(cert.claimed_tail_items) != true_tail:
            reasons.add(FailureReason.CLAIM_TAIL_MISMATCH)
        true_genres: set[str] = set()
        for i in slate.items:
            true_genres |= metadata[i].genres
        if set(cert.claimed_covered_genres) != true_genres:
            reasons.add(FailureReason.CLAIM_GENRE_MISMATCH)

    report: ConstraintReport | None = None
    if (
        FailureReason.MALFORMED_CERT not in reasons
        and not missing
        and len(slate.items) == constraints.n
    ):
        report = evaluate_all(slate, metadata, constraints)
        if not report.pass_tail:
            reasons.add(FailureReason.VIOLATES_TAIL)
        if not report.pass_head:
            reasons.add(FailureReason.VIOLATES_HEAD)
        if not report.pass_diversity:
            reasons.add(FailureReason.VIOLATES_DIV)

    ordered = tuple(sorted(reasons, key=_REASON_ORDER.__getitem__))
    return VerifierVerdict(accepted=not ordered, failure_reasons=ordered, report=report)
