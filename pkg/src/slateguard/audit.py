"""Audit records: one JSON line per user decision, append-only.

Each record carries enough to re-run the verifier later with zero ambiguity:
the proposal and final slates, their certificates in canonical byte form,
both verdicts including exact rational constraint measurements, and the
policy in force. Replay tooling lives in pipeline.verify_log.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable

from .constraints import ConstraintReport, ConstraintSet
from .verifier import FailureReason, VerifierVerdict

AUDIT_SCHEMA_VERSION = "1"


class Outcome(Enum):
    PASS = "PASS"                          # proposal verified on the first try
    FAIL_REPAIR_PASS = "FAIL_REPAIR_PASS"  # proposal rejected, repair verified
    FAIL = "FAIL"                          # rejected and repair disabled; served anyway
    INFEASIBLE = "INFEASIBLE"              # no compliant slate exists in the window


@dataclass(frozen=True)
class AuditRecord:
    user_id: int
    window_size: int
    window_items: tuple[int, ...]  # replay re-scopes metadata to exactly these
    method: str
    outcome: Outcome
    constraints: ConstraintSet
    proposal_items: tuple[int, ...] | None
    proposal_certificate: str | None  # canonical JSON text
    proposal_verdict: VerifierVerdict | None
    repair_applied: bool
    final_items: tuple[int, ...] | None
    final_certificate: str | None
    final_verdict: VerifierVerdict | None
    negotiation_rounds: int
    schema_version: str = AUDIT_SCHEMA_VERSION


def _report_to_dict(report: ConstraintReport | None) -> dict[str, Any] | None:
    if report is None:
        return None
    return {
        "tail_fraction": str(report.tail_fraction),
        "head_fraction": str(report.head_fraction),
        "covered_genres": report.covered_genres,
        "pass_tail": report.pass_tail,
        "pass_head": report.pass_head,
        "pass_diversity": report.pass_diversity,
    }


def _report_from_dict(obj: dict[str, Any] | None) -> ConstraintReport | None:
    if obj is None:
        return None
    return ConstraintReport(
        tail_fraction=Fraction(obj["tail_fraction"]),
        head_fraction=Fraction(obj["head_fraction"]),
        covered_genres=obj["covered_genres"],
        pass_tail=obj["pass_tail"],
        pass_head=obj["pass_head"],
        pass_diversity=obj["pass_diversity"],
    )


def verdict_to_dict(verdict: VerifierVerdict | None) -> dict[str, Any] | None:
    if verdict is None:
        return None
    return {
        "accepted": verdict.accepted,
        "failure_reasons": [r.value for r in verdict.failure_reasons],
        "report": _report_to_dict(verdict.report),
    }


def verdict_from_dict(obj: dict[str, Any] | None) -> VerifierVerdict | None:
    if obj is None:
        return None
    return VerifierVerdict(
        accepted=obj["accepted"],
        failure_reasons=tuple(FailureReason(r) for r in obj["failure_reasons"]),
        report=_report_from_dict(obj["report"]),
    )


def record_to_dict(record: AuditRecord) -> dict[str, Any]:
    return {
        "schema_version": record.schema_version,
        "user_id": record.user_id,
        "window_size": record.window_size,
        "window_items": list(record.window_items),
        "method": record.method,
        "outcome": record.outcome.value,
        "constraints": {
            "tau": float(record.constraints.tau),
            "kappa": float(record.constraints.kappa),
            "g_min": record.constraints.g_min,
            "n": record.constraints.n,
        },
        "proposal_items": None
        if record.proposal_items is None
        else list(record.proposal_items),
        "proposal_certificate": record.proposal_certificate,
        "proposal_verdict": verdict_to_dict(record.proposal_verdict),
        "repair_applied": record.repair_applied,
        "final_items": None if record.final_items is None else list(record.final_items),
        "final_certificate": record.final_certificate,
        "final_verdict": verdict_to_dict(record.final_verdict),
        "negotiation_rounds": record.negotiation_rounds,
    }


def record_from_dict(obj: dict[str, Any]) -> AuditRecord:
    if obj.get("schema_version") != AUDIT_SCHEMA_VERSION:
        raise ValueError(
            f"unsupported audit schema version {obj.get('schema_version')!r}"
        )
    c = obj["constraints"]
    return AuditRecord(
        user_id=obj["user_id"],
        window_size=obj["window_size"],
        window_items=tuple(obj["window_items"]),
        method=obj["method"],
        outcome=Outcome(obj["outcome"]),
        constraints=ConstraintSet(
            tau=Fraction(str(c["tau"])),
            kappa=Fraction(str(c["kappa"])),
            g_min=c["g_min"],
            n=c["n"],
        ),
        proposal_items=None
        if obj["proposal_items"] is None
        else tuple(obj["proposal_items"]),
        proposal_certificate=obj["proposal_certificate"],
        proposal_verdict=verdict_from_dict(obj["proposal_verdict"]),
        repair_applied=obj["repair_applied"],
        final_items=None if obj["final_items"] is None else tuple(obj["final_items"]),
        final_certificate=obj["final_certificate"],
        final_verdict=verdict_from_dict(obj["final_verdict"]),
        negotiation_rounds=obj["negotiation_rounds"],
    )


def append_record(path: str | Path, record: AuditRecord) -> None:
    """Append one record as one line; flushed so partial runs stay readable."""
    line = json.dumps(record_to_dict(record), sort_keys=True)
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(line + "\n")
        fh.flush()


def load_audit_log(path: str | Path) -> list[AuditRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(record_from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise ValueError(f"{path}: line {lineno}: bad audit record: {exc}") from exc
    return records


def iter_audit_log(path: str | Path) -> Iterable[AuditRecord]:
    yield from load_audit_log(path)
