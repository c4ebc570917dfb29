"""Machine-checkable slate certificates.

A certificate is the proposer's claim that a specific slate satisfies a
specific policy: the slate itself, the items claimed to be tail, the genres
claimed to be covered, and the thresholds the claim is made against. The
schema is closed-world: exactly these fields, exactly these types. The
parser never repairs input; any deviation raises a distinct error class so
callers can tell failure modes apart.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Mapping

from .constraints import ConstraintSet, MissingMetadataError, Slate
from .data import Bucket, ItemMeta

CERT_SCHEMA_VERSION = "1"

_TOP_FIELDS = frozenset(
    {
        "schema_version",
        "user_id",
        "slate_items",
        "claimed_tail_items",
        "claimed_covered_genres",
        "thresholds",
        "proposer_id",
    }
)
_THRESHOLD_FIELDS = frozenset({"tau", "kappa", "g_min", "n"})


class CertificateError(ValueError):
    """Base class for every certificate well-formedness failure."""


class MalformedDocumentError(CertificateError):
    """Not JSON, not an object, bad schema version, or internally inconsistent."""


class MissingFieldError(CertificateError):
    pass


class UnknownFieldError(CertificateError):
    pass


class FieldTypeError(CertificateError):
    pass


class DuplicateItemError(CertificateError):
    pass


@dataclass(frozen=True)
class Certificate:
    schema_version: str
    user_id: int
    slate_items: tuple[int, ...]
    claimed_tail_items: tuple[int, ...]
    claimed_covered_genres: tuple[str, ...]
    thresholds: ConstraintSet
    proposer_id: str


def make_certificate(
    slate: Slate,
    metadata: Mapping[int, ItemMeta],
    constraints: ConstraintSet,
    proposer_id: str,
) -> Certificate:
    """Build an honest certificate: claims computed from metadata, not asserted.

    Raises MissingMetadataError if any slate item lacks metadata.
    """
    tail: list[int] = []
    genres: set[str] = set()
    for item_id in slate.items:
        meta = metadata.get(item_id)
        if meta is None:
            raise MissingMetadataError(
                f"no metadata for item {item_id}; cannot certify slate for user {slate.user_id}"
            )
        if meta.bucket is Bucket.TAIL:
            tail.append(item_id)
        genres |= meta.genres
    return Certificate(
        schema_version=CERT_SCHEMA_VERSION,
        user_id=slate.user_id,
        slate_items=tuple(slate.items),
        claimed_tail_items=tuple(sorted(tail)),
        claimed_covered_genres=tuple(sorted(genres)),
        thresholds=constraints,
        proposer_id=proposer_id,
    )


def certificate_to_dict(cert: Certificate) -> dict[str, Any]:
    return {
        "schema_version": cert.schema_version,
        "user_id": cert.user_id,
        "slate_items": list(cert.slate_items),
        "claimed_tail_items": sorted(cert.claimed_tail_items),
        "claimed_covered_genres": sorted(cert.claimed_covered_genres),
        "thresholds": {
            "tau": float(cert.thresholds.tau),
            "kappa": float(cert.thresholds.kappa),
            "g_min": cert.thresholds.g_min,
            "n": cert.thresholds.n,
        },
        "proposer_id": cert.proposer_id,
    }


def serialize_certificate(cert: Certificate) -> bytes:
    """Canonical byte form: sorted keys, no whitespace, UTF-8.

    Serializing the same certificate twice yields identical bytes, and
    parse_certificate(serialize_certificate(c)) == c. Thresholds are written
    as JSON numbers; float(Fraction(str(x))) == x for every finite float, so
    the round trip through decimal text is exact.
    """
    return json.dumps(
        certificate_to_dict(cert), sort_keys=True, separators=(",", ":")
    ).encode("utf-8")


def _typed(obj: Mapping[str, Any], field: str, where: str = "certificate") -> Any:
    if field not in obj:
        raise MissingFieldError(f"{where}: missing field {field!r}")
    return obj[field]


def _as_int(value: Any, field: str) -> int:
    # bool is an int subclass; certificates must not smuggle flags as counts
    if isinstance(value, bool) or not isinstance(value, int):
        raise FieldTypeError(f"field {field!r} must be an integer, got {type(value).__name__}")
    return value


def _as_str(value: Any, field: str) -> str:
    if not isinstance(value, str):
        raise FieldTypeError(f"field {field!r} must be a string, got {type(value).__name__}")
    return value


def _as_int_list(value: Any, field: str) -> list[int]:
    if not isinstance(value, list):
        raise FieldTypeError(f"field {field!r} must be an array, got {type(value).__name__}")
    return [_as_int(v, field) for v in value]


def _as_str_list(value: Any, field: str) -> list[str]:
    if not isinstance(value, list):
        raise FieldTypeError(f"field {field!r} must be an array, got {type(value).__name__}")
    return [_as_str(v, field) for v in value]


def parse_certificate(data: bytes | str) -> Certificate:
    """Strict parse of a certificate document.

    Checks, in order: valid JSON object; no unknown and no missing fields
    (both top level and inside thresholds); field types (bool never passes
    for int); schema_version equal to the supported version; distinct slate
    items; distinct claim entries; claimed tail items a subset of the slate;
    slate length equal to the thresholds' slate size. Each failure mode has
    its own error class, all subclasses of CertificateError.
    """
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedDocumentError(f"certificate is not UTF-8: {exc}") from exc
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as exc:
        raise MalformedDocumentError(f"certificate is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise MalformedDocumentError(
            f"certificate must be a JSON object, got {type(obj).__name__}"
        )

    unknown = set(obj) - _TOP_FIELDS
    if unknown:
        raise UnknownFieldError(f"certificate: unknown fields {sorted(unknown)}")
    for field in sorted(_TOP_FIELDS):
        if field not in obj:
            raise MissingFieldError(f"certificate: missing field {field!r}")

    version = _as_str(obj["schema_version"], "schema_version")
    if version != CERT_SCHEMA_VERSION:
        raise MalformedDocumentError(
            f"unsupported schema_version {version!r}, expected {CERT_SCHEMA_VERSION!r}"
        )

    user_id = _as_int(obj["user_id"], "user_id")
    slate_items = _as_int_list(obj["slate_items"], "slate_items")
    if len(set(slate_items)) != len(slate_items):
        raise DuplicateItemError("slate_items contains duplicates")
    claimed_tail = _as_int_list(obj["claimed_tail_items"], "claimed_tail_items")
    if len(set(claimed_tail)) != len(claimed_tail):
        raise DuplicateItemError("claimed_tail_items contains duplicates")
    claimed_genres = _as_str_list(obj["claimed_covered_genres"], "claimed_covered_genres")
    if len(set(claimed_genres)) != len(claimed_genres):
        raise DuplicateItemError("claimed_covered_genres contains duplicates")

    thresholds_obj = obj["thresholds"]
    if not isinstance(thresholds_obj, dict):
        raise FieldTypeError("field 'thresholds' must be an object")
    t_unknown = set(thresholds_obj) - _THRESHOLD_FIELDS
    if t_unknown:
        raise UnknownFieldError(f"thresholds: unknown fields {sorted(t_unknown)}")
    for field in sorted(_THRESHOLD_FIELDS):
        if field not in thresholds_obj:
            raise MissingFieldError(f"thresholds: missing field {field!r}")

    def _as_ratio(value: Any, field: str) -> Fraction:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise FieldTypeError(f"thresholds.{field} must be a number")
        return Fraction(str(value))

    try:
        thresholds = ConstraintSet(
            tau=_as_ratio(thresholds_obj["tau"], "tau"),
            kappa=_as_ratio(thresholds_obj["kappa"], "kappa"),
            g_min=_as_int(thresholds_obj["g_min"], "thresholds.g_min"),
            n=_as_int(thresholds_obj["n"], "thresholds.n"),
        )
    except ValueError as exc:
        if isinstance(exc, CertificateError):
            raise
        raise MalformedDocumentError(f"thresholds out of range: {exc}") from exc

    if not set(claimed_tail) <= set(slate_items):
        raise MalformedDocumentError(
            "claimed_tail_items is not a subset of slate_items"
        )
    if len(slate_items) != thresholds.n:
        raise MalformedDocumentError(
            f"slate_items has {len(slate_items)} entries but thresholds.n is {thresholds.n}"
        )

    return Certificate(
        schema_version=version,
        user_id=user_id,
        slate_items=tuple(slate_items),
        claimed_tail_items=tuple(sorted(claimed_tail)),
        claimed_covered_genres=tuple(sorted(claimed_genres)),
        thresholds=thresholds,
        proposer_id=_as_str(obj["proposer_id"], "proposer_id"),
    )


def consistent_with_slate(cert: Certificate, slate: Slate) -> bool:
    """True iff the certificate certifies exactly this slate, order included."""
    return cert.user_id == slate.user_id and cert.slate_items == tuple(slate.items)
